//! Channel-width search for convolutional networks.
//!
//! Widths are grown by closed-form growth functions applied to a
//! real-valued genotype; each child network inherits its parent's weights
//! through a function-preserving widening transform and is then briefly
//! trained; a steady-state evolutionary loop with tournament selection
//! drives the search until the best network reaches a parameter budget.
//!
//! Module map:
//!
//! - [`tensor`]: dense kernels, SGDR schedule, checkpoint format
//! - [`network`] and [`train`]: materialized networks and the training loop
//! - [`arch`]: architecture specs, schedules, parameter and MAC counts
//! - [`growth`]: growth functions, genotypes, rounding
//! - [`widen`]: the widening transform
//! - [`search`]: population, selection, mutation, run log
//! - [`data`]: CIFAR binary loader, synthetic data, splits, augmentation
//! - [`cli`]: the `schedule`, `widen-check`, `search` and `eval` commands

pub mod arch;
pub mod cli;
pub mod data;
pub mod error;
pub mod growth;
pub mod network;
pub mod search;
pub mod tensor;
pub mod train;
pub mod widen;

pub use error::{Error, Result};
