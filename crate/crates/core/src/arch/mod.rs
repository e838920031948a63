//! Symbolic architectures: layer descriptions, width schedules, parameter
//! and MAC counting.

pub mod fixtures;
mod layout;
mod spec;

pub use layout::{
    flop_count, layout, param_count, ChannelGroup, Layout, UnitId, UnitKind, UnitPart, UnitShape,
};
pub use spec::{ArchitectureSpec, ChannelSchedule, ConvSite, LayerSpec, ShortcutKind};

use crate::error::{Error, Result};

/// Segment boundaries `K_i` and segment count `n = |K| + 1`.
pub fn segment_boundaries(spec: &ArchitectureSpec) -> (Vec<usize>, usize) {
    let k = spec.segment_boundaries();
    let n = k.len() + 1;
    (k, n)
}

/// Half of the narrowest width of a reference schedule, rounded up to even.
pub fn default_base_width(reference: &ChannelSchedule) -> Result<usize> {
    let min = *reference
        .widths()
        .iter()
        .min()
        .ok_or_else(|| Error::input("empty reference schedule"))?;
    let half = (min / 2).max(2);
    Ok(half + half % 2)
}
