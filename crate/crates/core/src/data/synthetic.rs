use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::LabeledDataset;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticParams {
    pub seed: u64,
    pub count: usize,
    pub classes: usize,
    /// `(height, width, channels)`.
    pub dims: [usize; 3],
    /// Standard deviation of the blob position, in pixels.
    #[serde(default = "default_jitter")]
    pub jitter: f64,
    /// Standard deviation of additive pixel noise.
    #[serde(default = "default_noise")]
    pub noise: f64,
}

fn default_jitter() -> f64 {
    0.75
}

fn default_noise() -> f64 {
    0.08
}

impl SyntheticParams {
    pub fn new(seed: u64, count: usize, classes: usize, dims: [usize; 3]) -> Self {
        Self {
            seed,
            count,
            classes,
            dims,
            jitter: default_jitter(),
            noise: default_noise(),
        }
    }

    pub fn with_difficulty(mut self, jitter: f64, noise: f64) -> Self {
        self.jitter = jitter;
        self.noise = noise;
        self
    }
}

struct Prototype {
    center: (f64, f64),
    sigma: f64,
    color: Vec<f64>,
}

/// Class-conditional Gaussian blobs: each class has its own blob position,
/// spread and per-channel colour; samples jitter the position and amplitude
/// and add pixel noise. Classes are balanced to within one sample.
pub fn synthetic_dataset(params: &SyntheticParams) -> Result<LabeledDataset> {
    let SyntheticParams { seed, count, classes, dims, jitter, noise } = *params;
    if !(jitter >= 0.0 && noise >= 0.0) {
        return Err(Error::input("jitter and noise must be non-negative"));
    }
    if classes == 0 || count < classes {
        return Err(Error::input(format!("need at least one sample per class ({count} for {classes})")));
    }
    let [h, w, c] = dims;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (hf, wf) = (h as f64, w as f64);
    // spread prototype centres around a circle so classes stay apart
    let phase = rng.random::<f64>() * std::f64::consts::TAU;
    let protos: Vec<Prototype> = (0..classes)
        .map(|k| {
            let a = phase + std::f64::consts::TAU * k as f64 / classes as f64;
            let r = 0.25 + 0.05 * rng.random::<f64>();
            Prototype {
                center: (hf * (0.5 + r * a.sin()), wf * (0.5 + r * a.cos())),
                sigma: (hf.min(wf) / 6.0) * (0.8 + 0.4 * rng.random::<f64>()),
                color: (0..c).map(|_| 0.3 + 0.7 * rng.random::<f64>()).collect(),
            }
        })
        .collect();
    let mut labels: Vec<usize> = (0..count).map(|i| i % classes).collect();
    labels.shuffle(&mut rng);
    let jitter = Normal::new(0.0, jitter).expect("non-negative std");
    let noise = Normal::new(0.0, noise).expect("non-negative std");
    let per = h * w * c;
    let mut pixels = vec![0f32; count * per];
    for (img, &label) in pixels.chunks_exact_mut(per).zip(&labels) {
        let p = &protos[label];
        let cy = p.center.0 + jitter.sample(&mut rng);
        let cx = p.center.1 + jitter.sample(&mut rng);
        let amp = 0.75 + 0.25 * rng.random::<f64>();
        for y in 0..h {
            for x in 0..w {
                let d2 = (y as f64 + 0.5 - cy).powi(2) + (x as f64 + 0.5 - cx).powi(2);
                let g = amp * (-d2 / (2.0 * p.sigma * p.sigma)).exp();
                for ch in 0..c {
                    let v = 0.1 + g * p.color[ch] + noise.sample(&mut rng);
                    img[(y * w + x) * c + ch] = v.clamp(0.0, 1.0) as f32;
                }
            }
        }
    }
    LabeledDataset::new(dims, pixels, labels, classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(seed: u64) -> SyntheticParams {
        SyntheticParams::new(seed, 103, 4, [8, 8, 3])
    }

    #[test]
    fn deterministic_under_seed() {
        assert_eq!(synthetic_dataset(&params(4)).unwrap(), synthetic_dataset(&params(4)).unwrap());
        assert_ne!(synthetic_dataset(&params(4)).unwrap(), synthetic_dataset(&params(5)).unwrap());
    }

    #[test]
    fn classes_are_balanced() {
        let h = synthetic_dataset(&params(1)).unwrap().class_histogram();
        assert!(h.iter().max().unwrap() - h.iter().min().unwrap() <= 1);
    }

    #[test]
    fn too_few_samples() {
        let p = SyntheticParams { count: 3, ..params(0) };
        assert!(synthetic_dataset(&p).is_err());
    }

    #[test]
    fn pixels_in_unit_range() {
        let d = synthetic_dataset(&params(2)).unwrap();
        assert!(d.pixels().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
