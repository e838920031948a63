//! Width-growth functions and the real-valued genotype they act on.
//!
//! Each function maps a layer position `x` in `(0, N]` to an increment
//! fraction in `[0, lambda]`. Three smooth pairs (`A`/`B` exponential,
//! `C`/`D` linear, `E`/`F` the mirrored exponentials), two step functions
//! over the downsampling segments (`G` rising, `H` falling) and a constant
//! `lambda/2`.

use serde::{Deserialize, Serialize};

use crate::arch::{ArchitectureSpec, ChannelSchedule};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GrowthFunctionId {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
    H,
    #[serde(rename = "CONST")]
    Const,
}

impl GrowthFunctionId {
    pub const ALL: [GrowthFunctionId; 9] = [
        Self::A,
        Self::B,
        Self::C,
        Self::D,
        Self::E,
        Self::F,
        Self::G,
        Self::H,
        Self::Const,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Self::A => "A",
            Self::B => "B",
            Self::C => "C",
            Self::D => "D",
            Self::E => "E",
            Self::F => "F",
            Self::G => "G",
            Self::H => "H",
            Self::Const => "CONST",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|id| id.tag() == tag)
    }
}

impl std::fmt::Display for GrowthFunctionId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthContext {
    n: usize,
    lambda: f64,
    boundaries: Vec<usize>,
}

impl GrowthContext {
    pub fn new(n: usize, lambda: f64, boundaries: Vec<usize>) -> Result<Self> {
        if n < 1 {
            return Err(Error::input("growth context needs at least one layer"));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::input(format!("lambda {lambda} must be positive")));
        }
        let increasing = boundaries.windows(2).all(|w| w[0] < w[1]);
        if !increasing || boundaries.iter().any(|&k| k == 0 || k > n) {
            return Err(Error::input(format!("boundaries {boundaries:?} must increase within (0, {n}]")));
        }
        Ok(Self { n, lambda, boundaries })
    }

    pub fn for_spec(spec: &ArchitectureSpec, lambda: f64) -> Result<Self> {
        Self::new(spec.slot_count(), lambda, spec.segment_boundaries())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn boundaries(&self) -> &[usize] {
        &self.boundaries
    }

    pub fn segments(&self) -> usize {
        self.boundaries.len() + 1
    }

    /// 1-based segment containing `x`: segment `s` covers `(K_{s-1}, K_s]`.
    fn segment_of(&self, x: f64) -> usize {
        1 + self.boundaries.iter().filter(|&&k| (k as f64) < x).count()
    }
}

/// Increment fraction of growth function `id` at layer position `x`.
pub fn eval_growth(id: GrowthFunctionId, x: f64, ctx: &GrowthContext) -> Result<f64> {
    let n = ctx.n as f64;
    if !(x > 0.0 && x <= n) {
        return Err(Error::input(format!("layer position {x} outside (0, {n}]")));
    }
    let l = ctx.lambda;
    let q = 1.0 + l;
    let denom = q.powf(n) - 1.0;
    let v = match id {
        GrowthFunctionId::A => l * (q.powf(x) - 1.0) / denom,
        GrowthFunctionId::B => l * (q.powf(n - x) - 1.0) / denom,
        GrowthFunctionId::C => l / n * x,
        GrowthFunctionId::D => l - l / n * x,
        GrowthFunctionId::E => l * (q.powf(n) - q.powf(n - x)) / denom,
        GrowthFunctionId::F => l * (q.powf(n) - q.powf(x)) / denom,
        GrowthFunctionId::G => {
            let s = ctx.segment_of(x);
            l / 2f64.powi((ctx.segments() - s) as i32)
        }
        GrowthFunctionId::H => {
            let s = ctx.segment_of(x);
            l / 2f64.powi((s - 1) as i32)
        }
        GrowthFunctionId::Const => l / 2.0,
    };
    Ok(v.clamp(0.0, l))
}

/// Nearest integer (ties to even), bumped up by one when odd; at least 2.
pub fn round_width(w: f64) -> usize {
    let r = w.round_ties_even().max(0.0) as usize;
    (r + r % 2).max(2)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AccountingMode {
    /// Each increment scales the current widths: `theta_i * prod(1 + f(i))`.
    #[default]
    Compound,
    /// Each increment is computed from the initial widths:
    /// `theta_i * (1 + sum f(i))`.
    FixedBase,
}

/// Real-valued widths per slot: base widths times accumulated multipliers,
/// plus the ordered list of applied growth functions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Genotype {
    pub base_widths: Vec<f64>,
    pub multipliers: Vec<f64>,
    pub history: Vec<GrowthFunctionId>,
    pub mode: AccountingMode,
}

impl Genotype {
    pub fn new(base_widths: Vec<f64>, mode: AccountingMode) -> Self {
        Self {
            multipliers: vec![1.0; base_widths.len()],
            base_widths,
            history: Vec::new(),
            mode,
        }
    }

    pub fn uniform(n: usize, width: f64, mode: AccountingMode) -> Self {
        Self::new(vec![width; n], mode)
    }

    pub fn len(&self) -> usize {
        self.base_widths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base_widths.is_empty()
    }

    pub fn real_widths(&self) -> Vec<f64> {
        self.base_widths
            .iter()
            .zip(&self.multipliers)
            .map(|(b, m)| b * m)
            .collect()
    }

    /// Per-slot integer widths. Rounding happens here only.
    pub fn realize_slots(&self) -> Vec<usize> {
        self.real_widths().into_iter().map(round_width).collect()
    }

    /// Integer schedule for specs whose slots are single convolutions.
    pub fn realize_schedule(&self) -> ChannelSchedule {
        ChannelSchedule(self.realize_slots())
    }

    /// Integer schedule for any spec, expanding bottleneck slots.
    pub fn realize_for(&self, spec: &ArchitectureSpec) -> Result<ChannelSchedule> {
        spec.expand_slots(&self.realize_slots())
    }

    pub fn validate(&self) -> Result<()> {
        if self.multipliers.len() != self.base_widths.len() {
            return Err(Error::input("genotype multipliers and base widths differ in length"));
        }
        if self.multipliers.iter().any(|&m| !(m >= 1.0)) {
            return Err(Error::input("genotype multipliers must be at least 1"));
        }
        if self.base_widths.iter().any(|&b| !(b >= 1.0)) {
            return Err(Error::input("genotype base widths must be at least 1"));
        }
        Ok(())
    }
}

/// Multipliers from a history, accumulated in tag order so any permutation
/// of the same history yields bit-identical values.
fn accumulate(history: &[GrowthFunctionId], mode: AccountingMode, ctx: &GrowthContext) -> Result<Vec<f64>> {
    let mut sorted = history.to_vec();
    sorted.sort_unstable();
    let mut out = vec![1.0; ctx.n];
    for (i, m) in out.iter_mut().enumerate() {
        let x = (i + 1) as f64;
        for &id in &sorted {
            let f = eval_growth(id, x, ctx)?;
            match mode {
                AccountingMode::Compound => *m *= 1.0 + f,
                AccountingMode::FixedBase => *m += f,
            }
        }
    }
    Ok(out)
}

/// Applies one growth function to a genotype.
pub fn apply_increment(g: &Genotype, id: GrowthFunctionId, ctx: &GrowthContext) -> Result<Genotype> {
    if g.len() != ctx.n {
        return Err(Error::input(format!("genotype has {} slots, context {}", g.len(), ctx.n)));
    }
    let mut history = g.history.clone();
    history.push(id);
    Ok(Genotype {
        multipliers: accumulate(&history, g.mode, ctx)?,
        base_widths: g.base_widths.clone(),
        history,
        mode: g.mode,
    })
}

/// Rebuilds a genotype from its base widths and history.
pub fn replay_history(
    base_widths: Vec<f64>,
    history: &[GrowthFunctionId],
    mode: AccountingMode,
    ctx: &GrowthContext,
) -> Result<Genotype> {
    let mut g = Genotype::new(base_widths, mode);
    for &id in history {
        g = apply_increment(&g, id, ctx)?;
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx16() -> GrowthContext {
        GrowthContext::new(16, 0.2, vec![4, 8, 12]).unwrap()
    }

    #[test]
    fn linear_reaches_lambda_at_n() {
        assert_eq!(eval_growth(GrowthFunctionId::C, 16.0, &ctx16()).unwrap(), 0.2);
    }

    #[test]
    fn exponential_matches_high_precision_value() {
        // 0.2 * (1.2^8 - 1) / (1.2^16 - 1), evaluated at 50 digits
        let expect = 0.037_737_152_341_200_855_359_351_882_220_48;
        let got = eval_growth(GrowthFunctionId::A, 8.0, &ctx16()).unwrap();
        assert!((got - expect).abs() < 1e-15, "{got}");
        let e = eval_growth(GrowthFunctionId::E, 8.0, &ctx16()).unwrap();
        assert!((e - 0.162_262_847_658_799_144_640_648_117_779_52).abs() < 1e-15);
    }

    #[test]
    fn step_functions() {
        let c = ctx16();
        assert_eq!(eval_growth(GrowthFunctionId::G, 3.0, &c).unwrap(), 0.025);
        assert_eq!(eval_growth(GrowthFunctionId::G, 4.0, &c).unwrap(), 0.025);
        assert_eq!(eval_growth(GrowthFunctionId::G, 4.5, &c).unwrap(), 0.05);
        assert_eq!(eval_growth(GrowthFunctionId::G, 16.0, &c).unwrap(), 0.2);
        assert_eq!(eval_growth(GrowthFunctionId::H, 1.0, &c).unwrap(), 0.2);
        assert_eq!(eval_growth(GrowthFunctionId::H, 13.0, &c).unwrap(), 0.025);
    }

    #[test]
    fn step_without_boundaries_is_lambda() {
        let c = GrowthContext::new(5, 0.3, vec![]).unwrap();
        assert_eq!(eval_growth(GrowthFunctionId::G, 2.0, &c).unwrap(), 0.3);
        assert_eq!(eval_growth(GrowthFunctionId::H, 5.0, &c).unwrap(), 0.3);
    }

    #[test]
    fn position_out_of_range() {
        let c = ctx16();
        assert!(eval_growth(GrowthFunctionId::A, 0.0, &c).is_err());
        assert!(eval_growth(GrowthFunctionId::A, 16.5, &c).is_err());
    }

    #[test]
    fn rounding_rule() {
        assert_eq!(round_width(38.4), 38);
        assert_eq!(round_width(35.2), 36);
        assert_eq!(round_width(32.0), 32);
        assert_eq!(round_width(36.5), 36);
        assert_eq!(round_width(37.5), 38);
        assert_eq!(round_width(1.0), 2);
    }

    #[test]
    fn one_linear_step() {
        let g = apply_increment(&Genotype::uniform(16, 32.0, AccountingMode::Compound), GrowthFunctionId::C, &ctx16()).unwrap();
        assert!((g.real_widths()[15] - 38.4).abs() < 1e-12);
        assert_eq!(g.realize_slots()[15], 38);
    }

    #[test]
    fn decreasing_linear_endpoints() {
        let g = apply_increment(&Genotype::uniform(16, 32.0, AccountingMode::Compound), GrowthFunctionId::D, &ctx16()).unwrap();
        let s = g.realize_slots();
        assert_eq!(s[0], 38);
        assert_eq!(s[15], 32);
    }

    #[test]
    fn constant_twice() {
        let c = ctx16();
        let mut g = Genotype::uniform(16, 32.0, AccountingMode::Compound);
        for _ in 0..2 {
            g = apply_increment(&g, GrowthFunctionId::Const, &c).unwrap();
        }
        assert!(g.multipliers.iter().all(|&m| (m - 1.21).abs() < 1e-14));
        assert_eq!(g.history.len(), 2);
    }

    #[test]
    fn fixed_base_adds_increments() {
        let c = ctx16();
        let mut g = Genotype::uniform(16, 32.0, AccountingMode::FixedBase);
        for _ in 0..2 {
            g = apply_increment(&g, GrowthFunctionId::Const, &c).unwrap();
        }
        assert!(g.multipliers.iter().all(|&m| (m - 1.2).abs() < 1e-14));
    }

    #[test]
    fn empty_history_is_identity() {
        let g = Genotype::uniform(16, 32.0, AccountingMode::Compound);
        assert!(g.multipliers.iter().all(|&m| m == 1.0));
        assert_eq!(g.realize_slots(), vec![32; 16]);
    }

    #[test]
    fn serialized_tags() {
        let g = apply_increment(&Genotype::uniform(16, 8.0, AccountingMode::Compound), GrowthFunctionId::Const, &ctx16()).unwrap();
        let text = serde_json::to_string(&g).unwrap();
        assert!(text.contains("\"CONST\"") && text.contains("\"COMPOUND\""));
        assert_eq!(serde_json::from_str::<Genotype>(&text).unwrap(), g);
        assert_eq!(GrowthFunctionId::from_tag("H"), Some(GrowthFunctionId::H));
    }

    #[test]
    fn context_validation() {
        assert!(GrowthContext::new(0, 0.2, vec![]).is_err());
        assert!(GrowthContext::new(4, 0.0, vec![]).is_err());
        assert!(GrowthContext::new(4, 0.2, vec![2, 2]).is_err());
        assert!(GrowthContext::new(4, 0.2, vec![5]).is_err());
    }
}
