//! Analytic gradients against central finite differences, in f64.

mod common;

use common::{plain_spec, residual_spec, worst_relative_error, GRAD_TOLERANCE};
use widthsearch::arch::ChannelSchedule;

#[test]
fn plain_network_gradients() {
    let spec = plain_spec();
    for seed in 0..3 {
        let (err, count) = worst_relative_error(&spec, ChannelSchedule(vec![4, 4, 4]), seed);
        assert!(count <= 1000, "{count} parameters");
        assert!(err <= GRAD_TOLERANCE, "seed {seed}: relative error {err:e}");
    }
}

#[test]
fn residual_network_gradients() {
    let spec = residual_spec();
    let schedule = spec.expand_slots(&[4, 4, 4, 4, 4, 2]).unwrap();
    for seed in 0..3 {
        let (err, count) = worst_relative_error(&spec, schedule.clone(), seed);
        assert!(count <= 1000, "{count} parameters");
        assert!(err <= GRAD_TOLERANCE, "seed {seed}: relative error {err:e}");
    }
}
