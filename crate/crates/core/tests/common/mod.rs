//! Helpers shared by integration targets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use widthsearch::arch::{ArchitectureSpec, ChannelSchedule};
use widthsearch::network::NetworkInstance;
use widthsearch::tensor::Tensor4;

pub const H: f64 = 1e-5;
pub const GRAD_TOLERANCE: f64 = 1e-6;

pub fn plain_spec() -> ArchitectureSpec {
    ArchitectureSpec::from_json(
        r#"{
        "name": "grad-plain", "input": [6, 6, 2], "classes": 3,
        "layers": [
            {"kind": "conv", "kernel": 3, "batch_norm": false, "bias": true},
            {"kind": "pool", "pool": "max"},
            {"kind": "conv", "kernel": 3},
            {"kind": "dropout", "rate": 0.3},
            {"kind": "pool", "pool": "avg"},
            {"kind": "conv", "kernel": 1, "relu": false, "bias": true, "batch_norm": false},
            {"kind": "global_pool"},
            {"kind": "dense", "width": 5},
            {"kind": "classifier"}
        ]}"#,
    )
    .unwrap()
}

pub fn residual_spec() -> ArchitectureSpec {
    ArchitectureSpec::from_json(
        r#"{
        "name": "grad-residual", "input": [4, 4, 2], "classes": 2,
        "layers": [
            {"kind": "conv", "kernel": 3},
            {"kind": "basic_block", "shortcut": "identity"},
            {"kind": "basic_block", "stride": 2, "shortcut": "projection"},
            {"kind": "bottleneck", "shortcut": "projection"},
            {"kind": "global_pool"},
            {"kind": "classifier"}
        ]}"#,
    )
    .unwrap()
}

fn batch(spec: &ArchitectureSpec, n: usize, rng: &mut ChaCha8Rng) -> (Tensor4<f64>, Vec<usize>) {
    let [h, w, c] = spec.input;
    let x = Tensor4::from_fn([n, h, w, c], |_| rng.random_range(-1.0..1.0));
    let y = (0..n).map(|i| i % spec.classes).collect();
    (x, y)
}

/// Largest relative error over every parameter entry. The denominator is
/// floored so entries with near-zero gradients are judged absolutely.
pub fn worst_relative_error(spec: &ArchitectureSpec, schedule: ChannelSchedule, seed: u64) -> (f64, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = NetworkInstance::<f64>::materialize(spec, &schedule, &mut rng).unwrap();
    net.randomize_normalization(&mut rng);
    let (x, y) = batch(spec, 4, &mut rng);
    let mask_seed = rng.random::<u64>();
    let loss_of = |net: &mut NetworkInstance<f64>| {
        let mut r = ChaCha8Rng::seed_from_u64(mask_seed);
        net.loss_and_gradients(&x, &y, &mut r).unwrap()
    };
    let (grads, _) = loss_of(&mut net);
    let count = net.param_count() as usize;
    let mut worst = 0.0f64;
    for (t, g) in grads.0.iter().enumerate() {
        for (j, &analytic) in g.iter().enumerate() {
            let mut plus = net.clone();
            plus.params_mut()[t].1[j] += H;
            let mut minus = net.clone();
            minus.params_mut()[t].1[j] -= H;
            let numeric = (loss_of(&mut plus).1 - loss_of(&mut minus).1) / (2.0 * H);
            let denom = analytic.abs().max(numeric.abs()).max(1e-3);
            worst = worst.max((analytic - numeric).abs() / denom);
        }
    }
    (worst, count)
}
