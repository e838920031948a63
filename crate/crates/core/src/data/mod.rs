//! Datasets: the CIFAR binary layout, a seeded synthetic generator,
//! stratified splitting, per-channel normalization and augmentation.

mod augment;
mod cifar;
mod dataset;
mod normalize;
mod split;
mod synthetic;

pub use augment::{augment, cutout, flip_horizontal, AugmentConfig};
pub use cifar::{decode_binary_dataset, encode_binary_dataset, load_binary_dataset};
pub use dataset::LabeledDataset;
pub use normalize::{channel_stats, denormalize, normalize, ChannelStats};
pub use split::{stratified_indices, stratified_quotas, stratified_split};
pub use synthetic::{synthetic_dataset, SyntheticParams};
