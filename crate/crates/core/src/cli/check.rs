use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::arch::ArchitectureSpec;
use crate::error::Result;
use crate::growth::{apply_increment, AccountingMode, Genotype, GrowthContext, GrowthFunctionId};
use crate::network::NetworkInstance;
use crate::search::{draw_mutation, stream_rng};
use crate::tensor::{Scalar, Tensor4};
use crate::widen::{max_deviation, widen_network, NoiseSpec};

pub const PRESERVATION_TOLERANCE: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MutationDeviation {
    pub mutation: GrowthFunctionId,
    pub max_deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WidenCheckReport {
    pub spec: String,
    pub trials: usize,
    pub delta: f64,
    pub precision: Precision,
    /// Empty when `trials` is 0.
    pub deviations: Vec<MutationDeviation>,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug)]
pub struct WidenCheck {
    pub seed: u64,
    pub trials: usize,
    pub delta: f64,
    pub base_width: usize,
    pub lambda: f64,
    pub batch: usize,
    pub precision: Precision,
}

impl Default for WidenCheck {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: 100,
            delta: 0.0,
            base_width: 8,
            lambda: 0.2,
            batch: 2,
            precision: Precision::F32,
        }
    }
}

/// Deviation of every mutation on one random parent and input batch.
/// The parent has `trial % 3` random mutations already applied.
fn trial<T: Scalar>(spec: &ArchitectureSpec, cfg: &WidenCheck, ctx: &GrowthContext, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let mut g = Genotype::uniform(spec.slot_count(), cfg.base_width as f64, AccountingMode::Compound);
    for _ in 0..rng.random_range(0..3) {
        g = apply_increment(&g, draw_mutation(rng), ctx)?;
    }
    let mut parent = NetworkInstance::<T>::materialize(spec, &g.realize_for(spec)?, rng)?;
    parent.randomize_normalization(rng);
    let [h, w, c] = spec.input;
    let x = Tensor4::from_fn([cfg.batch, h, w, c], |_| T::of(rng.sample::<f64, _>(StandardNormal)));
    let before = parent.logits(&x)?;
    let noise = NoiseSpec {
        delta_max: cfg.delta,
        per_channel: false,
    };
    let mut out = Vec::with_capacity(GrowthFunctionId::ALL.len());
    for tag in GrowthFunctionId::ALL {
        let child_g = apply_increment(&g, tag, ctx)?;
        let mut child = parent.clone();
        widen_network(&mut child, &child_g.realize_for(spec)?, &noise, rng)?;
        out.push(max_deviation(&before, &child.logits(&x)?));
    }
    Ok(out)
}

pub fn widen_check(spec: &ArchitectureSpec, cfg: &WidenCheck) -> Result<WidenCheckReport> {
    let ctx = GrowthContext::for_spec(spec, cfg.lambda)?;
    let mut worst = vec![0.0f64; GrowthFunctionId::ALL.len()];
    for t in 0..cfg.trials {
        let mut rng = stream_rng(cfg.seed, t as u64);
        let devs = match cfg.precision {
            Precision::F32 => trial::<f32>(spec, cfg, &ctx, &mut rng)?,
            Precision::F64 => trial::<f64>(spec, cfg, &ctx, &mut rng)?,
        };
        for (w, d) in worst.iter_mut().zip(devs) {
            *w = w.max(d);
        }
    }
    let deviations: Vec<MutationDeviation> = if cfg.trials == 0 {
        Vec::new()
    } else {
        GrowthFunctionId::ALL
            .into_iter()
            .zip(worst)
            .map(|(mutation, max_deviation)| MutationDeviation { mutation, max_deviation })
            .collect()
    };
    let within = deviations.iter().all(|d| d.max_deviation <= PRESERVATION_TOLERANCE);
    Ok(WidenCheckReport {
        spec: spec.name.clone(),
        trials: cfg.trials,
        delta: cfg.delta,
        precision: cfg.precision,
        deviations,
        tolerance: PRESERVATION_TOLERANCE,
        passed: within || cfg.delta > 0.0,
    })
}

pub fn print_check(report: &WidenCheckReport, out: &mut dyn Write) -> Result<()> {
    writeln!(
        out,
        "{}: {} trials, delta {}, {:?}",
        report.spec, report.trials, report.delta, report.precision
    )?;
    for d in &report.deviations {
        let flag = if d.max_deviation <= report.tolerance { "ok" } else { "exceeds" };
        writeln!(out, "  {:<6} {:.3e}  {flag}", d.mutation.tag(), d.max_deviation)?;
    }
    writeln!(out, "{}", if report.passed { "preserved" } else { "NOT preserved" })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::fixtures;

    #[test]
    fn toy_preserves() {
        let spec = fixtures::toy_3conv();
        let rep = widen_check(&spec, &WidenCheck { trials: 5, ..WidenCheck::default() }).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert_eq!(rep.deviations.len(), 9);
    }

    #[test]
    fn zero_trials_is_empty() {
        let rep = widen_check(&fixtures::toy_3conv(), &WidenCheck { trials: 0, ..WidenCheck::default() }).unwrap();
        assert!(rep.deviations.is_empty() && rep.passed);
    }

    #[test]
    fn noise_reported_not_failed() {
        let cfg = WidenCheck {
            trials: 3,
            delta: 0.05,
            ..WidenCheck::default()
        };
        let rep = widen_check(&fixtures::toy_3conv(), &cfg).unwrap();
        assert!(rep.passed);
        assert!(rep.deviations.iter().any(|d| d.max_deviation > PRESERVATION_TOLERANCE));
    }
}
