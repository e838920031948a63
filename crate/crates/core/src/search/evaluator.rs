use rand_chacha::ChaCha8Rng;

use super::Individual;
use crate::data::{AugmentConfig, LabeledDataset};
use crate::error::{Error, Result};
use crate::train::{evaluate_accuracy, train, TrainConfig};

/// Scores an individual. May train its weights in place. Called
/// concurrently on distinct individuals during seeding.
pub trait FitnessEvaluator: Sync {
    fn evaluate(&self, ind: &mut Individual, rng: &mut ChaCha8Rng) -> Result<f64>;
}

/// Fitness from a closure over the individual's size and genotype; no training.
pub struct SyntheticFitness<F> {
    f: F,
}

impl<F: Fn(&Individual) -> f64 + Sync> SyntheticFitness<F> {
    pub fn new(f: F) -> Self {
        Self { f }
    }
}

impl<F: Fn(&Individual) -> f64 + Sync> FitnessEvaluator for SyntheticFitness<F> {
    fn evaluate(&self, ind: &mut Individual, _rng: &mut ChaCha8Rng) -> Result<f64> {
        Ok((self.f)(ind))
    }
}

/// `-|params - budget|`: highest for the individual closest to the budget.
pub fn budget_distance(budget: u64) -> SyntheticFitness<impl Fn(&Individual) -> f64 + Sync> {
    SyntheticFitness::new(move |ind: &Individual| -(ind.params as f64 - budget as f64).abs())
}

/// Trains the individual's network and returns validation accuracy.
pub struct TrainingEvaluator {
    pub train: LabeledDataset,
    pub validation: LabeledDataset,
    pub config: TrainConfig,
    pub augmentation: Option<AugmentConfig>,
}

impl TrainingEvaluator {
    pub fn new(train: LabeledDataset, validation: LabeledDataset, config: TrainConfig) -> Self {
        Self {
            train,
            validation,
            config,
            augmentation: None,
        }
    }

    pub fn with_augmentation(mut self, aug: AugmentConfig) -> Self {
        self.augmentation = Some(aug);
        self
    }
}

impl FitnessEvaluator for TrainingEvaluator {
    fn evaluate(&self, ind: &mut Individual, rng: &mut ChaCha8Rng) -> Result<f64> {
        let net = ind
            .network
            .as_mut()
            .ok_or_else(|| Error::input(format!("individual {} has no weights to train", ind.id)))?;
        train(net, &self.train, &self.config, self.augmentation.as_ref(), rng)?;
        evaluate_accuracy(net, &self.validation, self.config.batch_size)
    }
}

/// Accuracy minus a size penalty: `inner - param_weight * params / reference`.
pub struct WeightedObjective<E> {
    pub inner: E,
    pub param_weight: f64,
    pub flop_weight: f64,
    pub reference_params: f64,
    pub reference_flops: f64,
}

impl<E: FitnessEvaluator> FitnessEvaluator for WeightedObjective<E> {
    fn evaluate(&self, ind: &mut Individual, rng: &mut ChaCha8Rng) -> Result<f64> {
        let base = self.inner.evaluate(ind, rng)?;
        let mut penalty = self.param_weight * ind.params as f64 / self.reference_params.max(1.0);
        if self.flop_weight != 0.0 {
            let spec = ind
                .network
                .as_ref()
                .map(|n| n.spec().clone())
                .ok_or_else(|| Error::input("flop penalty needs the individual's network"))?;
            let flops = crate::arch::flop_count(&spec, &ind.schedule)?;
            penalty += self.flop_weight * flops as f64 / self.reference_flops.max(1.0);
        }
        Ok(base - penalty)
    }
}
