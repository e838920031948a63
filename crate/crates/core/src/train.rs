//! Child training: mini-batch SGD with Nesterov momentum, L2 weight decay on
//! kernels and a per-iteration SGDR learning rate.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{augment, AugmentConfig, LabeledDataset};
use crate::error::{Error, Result};
use crate::network::{Gradients, NetworkInstance};
use crate::tensor::SgdrSchedule;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub momentum: f64,
    pub l_max: f64,
    pub t0: f64,
    pub t_mult: f64,
    pub weight_decay: f64,
    pub epochs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            momentum: 0.9,
            l_max: 0.05,
            t0: 1.0,
            t_mult: 2.0,
            weight_decay: 1e-4,
            epochs: 15,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 1 {
            return Err(Error::input("batch_size must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::input(format!("momentum {} outside [0, 1)", self.momentum)));
        }
        if !(self.l_max >= 0.0) {
            return Err(Error::input(format!("l_max {} must be non-negative", self.l_max)));
        }
        if !(self.t0 >= 1.0) || !(self.t_mult >= 1.0) {
            return Err(Error::input("t0 and t_mult must be at least 1"));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::input("weight_decay must be non-negative"));
        }
        Ok(())
    }

    pub fn schedule(&self) -> SgdrSchedule {
        SgdrSchedule::new(self.l_max, self.t0, self.t_mult)
    }

    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs = epochs;
        self
    }
}

/// Nesterov momentum in the form `v = mu*v + g; w -= lr*(g + mu*v)`.
pub struct NesterovSgd {
    velocity: Vec<Vec<f32>>,
    momentum: f32,
    weight_decay: f32,
}

impl NesterovSgd {
    pub fn new(net: &NetworkInstance<f32>, momentum: f64, weight_decay: f64) -> Self {
        Self {
            velocity: net.params().iter().map(|(_, p)| vec![0.0; p.len()]).collect(),
            momentum: momentum as f32,
            weight_decay: weight_decay as f32,
        }
    }

    pub fn step(&mut self, net: &mut NetworkInstance<f32>, grads: &Gradients<f32>, lr: f64) {
        let lr = lr as f32;
        let mu = self.momentum;
        for (((role, w), g), v) in net.params_mut().into_iter().zip(&grads.0).zip(&mut self.velocity) {
            let wd = if role.decays() { self.weight_decay } else { 0.0 };
            for ((wi, &gi), vi) in w.iter_mut().zip(g).zip(v.iter_mut()) {
                let g = gi + wd * *wi;
                *vi = mu * *vi + g;
                *wi -= lr * (g + mu * *vi);
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training loss of each epoch.
    pub losses: Vec<f64>,
}

/// Trains in place for `cfg.epochs` epochs with a fresh SGDR cycle.
pub fn train<R: Rng + ?Sized>(
    net: &mut NetworkInstance<f32>,
    data: &LabeledDataset,
    cfg: &TrainConfig,
    augmentation: Option<&AugmentConfig>,
    rng: &mut R,
) -> Result<TrainReport> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::input("training set is empty"));
    }
    let schedule = cfg.schedule();
    let mut opt = NesterovSgd::new(net, cfg.momentum, cfg.weight_decay);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let batches = data.len().div_ceil(cfg.batch_size);
    let mut report = TrainReport::default();
    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            let (mut x, y) = data.batch(idx)?;
            if let Some(aug) = augmentation {
                x = augment(&x, aug, rng);
            }
            let lr = schedule.rate_at(epoch as f64 + b as f64 / batches as f64);
            let (grads, loss) = match net.loss_and_gradients(&x, &y, rng) {
                Ok(r) => r,
                Err(Error::Numeric(_)) => return Err(Error::Divergence { epoch, loss: f64::NAN }),
                Err(e) => return Err(e),
            };
            let loss = loss as f64;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, loss });
            }
            total += loss * idx.len() as f64;
            opt.step(net, &grads, lr);
        }
        report.losses.push(total / data.len() as f64);
    }
    Ok(report)
}

/// Fraction of correctly classified samples, inference mode.
pub fn evaluate_accuracy(net: &NetworkInstance<f32>, data: &LabeledDataset, batch_size: usize) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::input("evaluation set is empty"));
    }
    let idx: Vec<usize> = (0..data.len()).collect();
    let mut correct = 0usize;
    for chunk in idx.chunks(batch_size.max(1)) {
        let (x, y) = data.batch(chunk)?;
        correct += net.predict(&x)?.iter().zip(&y).filter(|(p, t)| p == t).count();
    }
    Ok(correct as f64 / data.len() as f64)
}

/// Mean inference-mode cross-entropy.
pub fn evaluate_loss(net: &NetworkInstance<f32>, data: &LabeledDataset, batch_size: usize) -> Result<f64> {
    let idx: Vec<usize> = (0..data.len()).collect();
    let mut total = 0.0;
    for chunk in idx.chunks(batch_size.max(1)) {
        let (x, y) = data.batch(chunk)?;
        let logits = net.logits(&x)?;
        let (loss, _) = crate::tensor::softmax_cross_entropy(&logits, &y, net.classes())?;
        total += loss as f64 * chunk.len() as f64;
    }
    Ok(total / data.len().max(1) as f64)
}
