use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::growth::{AccountingMode, GrowthFunctionId};
use crate::widen::NoiseSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    /// Largest fractional increment a growth function can apply.
    pub lambda: f64,
    /// Initial population size.
    pub p1: usize,
    /// Population capacity.
    pub p2: usize,
    /// Tournament size.
    pub k: usize,
    pub child_epochs: usize,
    pub init_epochs: usize,
    pub param_budget: u64,
    /// Search stops once the best individual has this fraction of the budget.
    pub budget_fraction: f64,
    pub seed: u64,
    pub mode: AccountingMode,
    /// Upper bound on evolve steps after seeding.
    pub max_generations: usize,
    /// Children start from fresh random weights instead of inheriting.
    pub cold_start: bool,
    pub noise: NoiseSpec,
    /// Growth functions mutation draws from, uniformly.
    pub mutation_pool: Vec<GrowthFunctionId>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            lambda: 0.2,
            p1: 12,
            p2: 20,
            k: 3,
            child_epochs: 15,
            init_epochs: 31,
            param_budget: 0,
            budget_fraction: 0.95,
            seed: 0,
            mode: AccountingMode::Compound,
            max_generations: 1000,
            cold_start: false,
            noise: NoiseSpec::default(),
            mutation_pool: GrowthFunctionId::ALL.to_vec(),
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::input(format!("lambda {} outside (0, 1]", self.lambda)));
        }
        if !(1 <= self.k && self.k <= self.p1 && self.p1 <= self.p2) {
            return Err(Error::input(format!(
                "need 1 <= k <= p1 <= p2, got k={} p1={} p2={}",
                self.k, self.p1, self.p2
            )));
        }
        if !(self.budget_fraction > 0.0 && self.budget_fraction <= 1.0) {
            return Err(Error::input(format!("budget_fraction {} outside (0, 1]", self.budget_fraction)));
        }
        if self.mutation_pool.is_empty() {
            return Err(Error::input("mutation_pool is empty"));
        }
        for (i, id) in self.mutation_pool.iter().enumerate() {
            if self.mutation_pool[..i].contains(id) {
                return Err(Error::input(format!("mutation_pool lists {id} twice")));
            }
        }
        self.noise.validate()
    }

    pub fn budget_threshold(&self) -> f64 {
        self.budget_fraction * self.param_budget as f64
    }
}
