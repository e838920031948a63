use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// Cosine-annealed rate within one warm-restart period, annealing to zero.
pub fn sgdr_learning_rate(epoch_in_period: f64, period_length: f64, l_max: f64) -> f64 {
    debug_assert!(period_length > 0.0);
    let t = epoch_in_period.clamp(0.0, period_length);
    (l_max * (1.0 + (PI * t / period_length).cos()) / 2.0).max(0.0)
}

/// Warm-restart schedule whose periods grow geometrically: `t0`, `t0*t_mult`,
/// `t0*t_mult^2`, ...
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgdrSchedule {
    pub l_max: f64,
    pub t0: f64,
    pub t_mult: f64,
}

impl SgdrSchedule {
    pub fn new(l_max: f64, t0: f64, t_mult: f64) -> Self {
        assert!(t0 >= 1.0 && t_mult >= 1.0, "need t0 >= 1 and t_mult >= 1");
        Self { l_max, t0, t_mult }
    }

    /// Splits a cumulative (fractional) epoch into its period: returns
    /// `(epoch_in_period, period_length)`.
    pub fn locate(&self, epoch: f64) -> (f64, f64) {
        let mut start = 0.0;
        let mut period = self.t0;
        while epoch >= start + period {
            start += period;
            period *= self.t_mult;
        }
        (epoch - start, period)
    }

    pub fn rate_at(&self, epoch: f64) -> f64 {
        let (t, period) = self.locate(epoch.max(0.0));
        sgdr_learning_rate(t, period, self.l_max)
    }

    /// Cumulative epochs at which restarts happen, up to and including `limit`.
    pub fn restart_boundaries(&self, limit: f64) -> Vec<f64> {
        let mut out = Vec::new();
        let mut end = self.t0;
        let mut period = self.t0;
        while end <= limit {
            out.push(end);
            period *= self.t_mult;
            end += period;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_of_a_period() {
        assert_eq!(sgdr_learning_rate(0.0, 4.0, 0.05), 0.05);
        assert!((sgdr_learning_rate(2.0, 4.0, 0.05) - 0.025).abs() < 1e-15);
        assert!(sgdr_learning_rate(4.0, 4.0, 0.05).abs() < 1e-15);
    }

    #[test]
    fn doubling_periods_restart_at_powers_of_two_minus_one() {
        let s = SgdrSchedule::new(0.05, 1.0, 2.0);
        assert_eq!(s.restart_boundaries(31.0), vec![1.0, 3.0, 7.0, 15.0, 31.0]);
        assert_eq!(s.locate(3.0), (0.0, 4.0));
        assert_eq!(s.rate_at(7.0), 0.05);
    }

    #[test]
    fn constant_periods_when_multiplier_is_one() {
        let s = SgdrSchedule::new(1.0, 2.0, 1.0);
        assert_eq!(s.restart_boundaries(7.0), vec![2.0, 4.0, 6.0]);
    }
}
