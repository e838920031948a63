use serde::{Deserialize, Serialize};

use super::LabeledDataset;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

/// Per-channel mean and population standard deviation over all pixels.
pub fn channel_stats(data: &LabeledDataset) -> ChannelStats {
    let c = data.dims()[2];
    let mut sum = vec![0f64; c];
    let mut sq = vec![0f64; c];
    let px = data.pixels();
    let count = (px.len() / c).max(1) as f64;
    for row in px.chunks_exact(c) {
        for ch in 0..c {
            sum[ch] += row[ch] as f64;
        }
    }
    let means: Vec<f64> = sum.iter().map(|s| s / count).collect();
    for row in px.chunks_exact(c) {
        for ch in 0..c {
            let d = row[ch] as f64 - means[ch];
            sq[ch] += d * d;
        }
    }
    ChannelStats {
        stds: sq.iter().map(|s| (s / count).sqrt()).collect(),
        means,
    }
}

fn check(data: &LabeledDataset, stats: &ChannelStats) -> Result<()> {
    let c = data.dims()[2];
    if stats.means.len() != c || stats.stds.len() != c {
        return Err(Error::input(format!("statistics for {} channels, data has {c}", stats.means.len())));
    }
    if let Some(ch) = stats.stds.iter().position(|&s| !(s > 0.0) || !s.is_finite()) {
        return Err(Error::input(format!("channel {ch} has standard deviation {}", stats.stds[ch])));
    }
    Ok(())
}

pub fn normalize(data: &LabeledDataset, stats: &ChannelStats) -> Result<LabeledDataset> {
    check(data, stats)?;
    let c = data.dims()[2];
    let mut out = data.clone();
    for row in out.pixels_mut().chunks_exact_mut(c) {
        for ch in 0..c {
            row[ch] = ((row[ch] as f64 - stats.means[ch]) / stats.stds[ch]) as f32;
        }
    }
    Ok(out)
}

pub fn denormalize(data: &LabeledDataset, stats: &ChannelStats) -> Result<LabeledDataset> {
    check(data, stats)?;
    let c = data.dims()[2];
    let mut out = data.clone();
    for row in out.pixels_mut().chunks_exact_mut(c) {
        for ch in 0..c {
            row[ch] = (row[ch] as f64 * stats.stds[ch] + stats.means[ch]) as f32;
        }
    }
    Ok(out)
}
