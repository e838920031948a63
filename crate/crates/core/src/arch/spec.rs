use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{conv_output_dim, PoolKind};

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShortcutKind {
    /// 1x1 convolution plus batch norm on the skip path.
    Projection,
    /// Plain skip; input and output widths must agree.
    Identity,
}

/// One entry of an architecture description.
///
/// Convolutions without a `width` are searchable; each contributes one
/// width slot. A basic block contributes two slots (its two 3x3 convs), a
/// bottleneck block one slot whose three convs take widths `w, w, 4w`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv {
        kernel: usize,
        #[serde(default = "one")]
        stride: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        width: Option<usize>,
        #[serde(default = "yes")]
        batch_norm: bool,
        #[serde(default)]
        bias: bool,
        #[serde(default = "yes")]
        relu: bool,
    },
    Pool {
        pool: PoolKind,
    },
    Dropout {
        rate: f64,
    },
    BasicBlock {
        #[serde(default = "one")]
        stride: usize,
        shortcut: ShortcutKind,
    },
    Bottleneck {
        #[serde(default = "one")]
        stride: usize,
        shortcut: ShortcutKind,
    },
    GlobalPool,
    Dense {
        width: usize,
        #[serde(default = "yes")]
        relu: bool,
    },
    Classifier,
}

impl LayerSpec {
    pub fn conv(kernel: usize) -> Self {
        LayerSpec::Conv {
            kernel,
            stride: 1,
            width: None,
            batch_norm: true,
            bias: false,
            relu: true,
        }
    }

    pub fn fixed_conv(kernel: usize, width: usize) -> Self {
        LayerSpec::Conv {
            kernel,
            stride: 1,
            width: Some(width),
            batch_norm: true,
            bias: false,
            relu: true,
        }
    }

    pub fn basic(stride: usize, shortcut: ShortcutKind) -> Self {
        LayerSpec::BasicBlock { stride, shortcut }
    }

    pub fn bottleneck(stride: usize, shortcut: ShortcutKind) -> Self {
        LayerSpec::Bottleneck { stride, shortcut }
    }

    /// Number of width slots this layer contributes.
    pub fn slot_count(&self) -> usize {
        match self {
            LayerSpec::Conv { width: None, .. } => 1,
            LayerSpec::BasicBlock { .. } => 2,
            LayerSpec::Bottleneck { .. } => 1,
            _ => 0,
        }
    }

    /// Number of searchable convolutions (entries in a [`ChannelSchedule`]).
    pub fn schedule_len(&self) -> usize {
        match self {
            LayerSpec::Conv { width: None, .. } => 1,
            LayerSpec::BasicBlock { .. } => 2,
            LayerSpec::Bottleneck { .. } => 3,
            _ => 0,
        }
    }

    /// Whether the layer reduces spatial resolution.
    pub fn is_downsample(&self) -> bool {
        match self {
            LayerSpec::Conv { stride, .. }
            | LayerSpec::BasicBlock { stride, .. }
            | LayerSpec::Bottleneck { stride, .. } => *stride > 1,
            LayerSpec::Pool { .. } => true,
            _ => false,
        }
    }
}

/// One searchable convolution together with the slot it belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvSite {
    pub layer: usize,
    pub slot: usize,
    /// Width of this conv as a multiple of its slot's width.
    pub ratio: usize,
}

/// Integer widths, one per searchable convolution, in layer order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChannelSchedule(pub Vec<usize>);

impl ChannelSchedule {
    pub fn widths(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Every width at least 2 and even.
    pub fn check_even(&self) -> Result<()> {
        match self.0.iter().position(|&w| w < 2 || w % 2 != 0) {
            Some(i) => Err(Error::input(format!(
                "width {} at conv {} must be even and at least 2",
                self.0[i],
                i + 1
            ))),
            None => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureSpec {
    pub name: String,
    /// `(height, width, channels)` of one input image.
    pub input: [usize; 3],
    pub classes: usize,
    pub layers: Vec<LayerSpec>,
}

impl ArchitectureSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.input.iter().any(|&d| d == 0) {
            return Err(Error::input(format!("input dims {:?} must be positive", self.input)));
        }
        if self.classes < 1 {
            return Err(Error::input("at least one class is required"));
        }
        if self.slot_count() == 0 {
            return Err(Error::input(format!("{} has no searchable convolution", self.name)));
        }
        let mut flat = false;
        let (mut h, mut w) = (self.input[0], self.input[1]);
        for (i, layer) in self.layers.iter().enumerate() {
            let spatial = matches!(
                layer,
                LayerSpec::Conv { .. }
                    | LayerSpec::Pool { .. }
                    | LayerSpec::BasicBlock { .. }
                    | LayerSpec::Bottleneck { .. }
            );
            if flat && spatial {
                return Err(Error::input(format!("layer {i} is spatial but follows global pooling")));
            }
            match layer {
                LayerSpec::GlobalPool => flat = true,
                LayerSpec::Dense { width, .. } => {
                    if !flat {
                        return Err(Error::input(format!("dense layer {i} needs global pooling first")));
                    }
                    if *width == 0 {
                        return Err(Error::input(format!("dense layer {i} has zero width")));
                    }
                }
                LayerSpec::Classifier => {
                    if !flat || i + 1 != self.layers.len() {
                        return Err(Error::input("classifier must be the last layer, after global pooling"));
                    }
                }
                LayerSpec::Dropout { rate } if !(0.0..1.0).contains(rate) => {
                    return Err(Error::input(format!("dropout rate {rate} outside [0, 1)")));
                }
                LayerSpec::Conv { kernel, stride, width, .. } => {
                    if *kernel == 0 || *stride == 0 || *width == Some(0) {
                        return Err(Error::input(format!("conv layer {i} has a zero kernel, stride or width")));
                    }
                    let p = kernel / 2;
                    h = conv_output_dim(h, *kernel, *stride, p).ok_or_else(|| Error::input(format!("conv layer {i} kernel larger than its input")))?;
                    w = conv_output_dim(w, *kernel, *stride, p).ok_or_else(|| Error::input(format!("conv layer {i} kernel larger than its input")))?;
                }
                LayerSpec::BasicBlock { stride, .. } | LayerSpec::Bottleneck { stride, .. } => {
                    if *stride == 0 {
                        return Err(Error::input(format!("block {i} has zero stride")));
                    }
                    h = conv_output_dim(h, 3, *stride, 1).unwrap_or(0);
                    w = conv_output_dim(w, 3, *stride, 1).unwrap_or(0);
                }
                LayerSpec::Pool { .. } => {
                    if h < 2 || w < 2 {
                        return Err(Error::input(format!("pool layer {i} applied to a {h}x{w} map")));
                    }
                    h /= 2;
                    w /= 2;
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Total number of width slots, the layer count `N` seen by the
    /// growth functions.
    pub fn slot_count(&self) -> usize {
        self.layers.iter().map(LayerSpec::slot_count).sum()
    }

    /// Number of searchable convolutions, the length of a schedule.
    pub fn schedule_len(&self) -> usize {
        self.layers.iter().map(LayerSpec::schedule_len).sum()
    }

    pub fn has_bottleneck(&self) -> bool {
        self.layers.iter().any(|l| matches!(l, LayerSpec::Bottleneck { .. }))
    }

    pub fn has_classifier(&self) -> bool {
        matches!(self.layers.last(), Some(LayerSpec::Classifier))
    }

    /// Searchable convolutions in schedule order.
    pub fn conv_sites(&self) -> Vec<ConvSite> {
        let mut sites = Vec::new();
        let mut slot = 0;
        for (layer, spec) in self.layers.iter().enumerate() {
            match spec {
                LayerSpec::Conv { width: None, .. } => {
                    sites.push(ConvSite { layer, slot, ratio: 1 });
                    slot += 1;
                }
                LayerSpec::BasicBlock { .. } => {
                    sites.push(ConvSite { layer, slot, ratio: 1 });
                    sites.push(ConvSite { layer, slot: slot + 1, ratio: 1 });
                    slot += 2;
                }
                LayerSpec::Bottleneck { .. } => {
                    for ratio in [1, 1, 4] {
                        sites.push(ConvSite { layer, slot, ratio });
                    }
                    slot += 1;
                }
                _ => {}
            }
        }
        sites
    }

    /// Expands per-slot widths into a per-conv schedule.
    pub fn expand_slots(&self, slot_widths: &[usize]) -> Result<ChannelSchedule> {
        if slot_widths.len() != self.slot_count() {
            return Err(Error::input(format!(
                "{} slot widths given, {} has {}",
                slot_widths.len(),
                self.name,
                self.slot_count()
            )));
        }
        Ok(ChannelSchedule(
            self.conv_sites()
                .iter()
                .map(|s| slot_widths[s.slot] * s.ratio)
                .collect(),
        ))
    }

    /// Inverse of [`expand_slots`](Self::expand_slots). Fails when a
    /// bottleneck block does not keep its 1:1:4 ratio.
    pub fn slot_widths(&self, schedule: &ChannelSchedule) -> Result<Vec<usize>> {
        self.check_schedule(schedule)?;
        let mut slots = vec![0usize; self.slot_count()];
        for (site, &w) in self.conv_sites().iter().zip(schedule.widths()) {
            if w % site.ratio != 0 {
                return Err(Error::input(format!(
                    "width {w} of layer {} is not a multiple of {}",
                    site.layer, site.ratio
                )));
            }
            let base = w / site.ratio;
            if slots[site.slot] == 0 {
                slots[site.slot] = base;
            } else if slots[site.slot] != base {
                return Err(Error::input(format!(
                    "bottleneck at layer {} must keep widths in ratio 1:1:4",
                    site.layer
                )));
            }
        }
        Ok(slots)
    }

    /// Length and evenness check; bottleneck ratios are checked by
    /// [`slot_widths`](Self::slot_widths).
    pub fn check_schedule(&self, schedule: &ChannelSchedule) -> Result<()> {
        if schedule.len() != self.schedule_len() {
            return Err(Error::input(format!(
                "schedule has {} widths, {} has {} searchable convs",
                schedule.len(),
                self.name,
                self.schedule_len()
            )));
        }
        schedule.check_even()
    }

    /// Number of width slots preceding each downsampling operation, keeping
    /// only boundaries that split the slots into non-empty segments.
    pub fn segment_boundaries(&self) -> Vec<usize> {
        let n = self.slot_count();
        let mut before = 0;
        let mut out: Vec<usize> = Vec::new();
        for layer in &self.layers {
            if layer.is_downsample() && before > 0 && before < n && out.last() != Some(&before) {
                out.push(before);
            }
            before += layer.slot_count();
        }
        out
    }

    /// Uniform schedule with every slot at `width`.
    pub fn uniform_schedule(&self, width: usize) -> ChannelSchedule {
        self.expand_slots(&vec![width; self.slot_count()])
            .expect("slot count matches by construction")
    }

    pub fn with_input(mut self, input: [usize; 3], classes: usize) -> Self {
        self.input = input;
        self.classes = classes;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::fixtures;

    #[test]
    fn resnet18_segments() {
        let spec = fixtures::resnet18();
        assert_eq!(spec.slot_count(), 16);
        assert_eq!(spec.segment_boundaries(), vec![4, 8, 12]);
    }

    #[test]
    fn vgg16_segments_skip_the_trailing_pool() {
        let spec = fixtures::vgg16();
        assert_eq!(spec.slot_count(), 13);
        assert_eq!(spec.segment_boundaries(), vec![2, 4, 7, 10]);
    }

    #[test]
    fn no_downsampling_means_one_segment() {
        let spec = ArchitectureSpec {
            name: "flat".into(),
            input: [4, 4, 1],
            classes: 2,
            layers: vec![LayerSpec::conv(3), LayerSpec::conv(3), LayerSpec::GlobalPool, LayerSpec::Classifier],
        };
        assert!(spec.segment_boundaries().is_empty());
    }

    #[test]
    fn bottleneck_ratio_is_enforced() {
        let spec = fixtures::bottleneck_toy();
        let good = spec.expand_slots(&vec![4; spec.slot_count()]).unwrap();
        assert_eq!(spec.slot_widths(&good).unwrap(), vec![4; spec.slot_count()]);
        let mut bad = good.clone();
        let site = spec.conv_sites().iter().position(|s| s.ratio == 4).unwrap();
        bad.0[site] += 2;
        assert!(spec.slot_widths(&bad).is_err());
    }

    #[test]
    fn odd_width_rejected() {
        let spec = fixtures::toy_3conv();
        assert!(spec.check_schedule(&ChannelSchedule(vec![4, 5, 4])).is_err());
        assert!(spec.check_schedule(&ChannelSchedule(vec![4, 4])).is_err());
    }

    #[test]
    fn json_round_trip_keeps_defaults() {
        let text = r#"{"name":"t","input":[8,8,3],"classes":2,"layers":[
            {"kind":"conv","kernel":3},
            {"kind":"pool","pool":"max"},
            {"kind":"basic_block","stride":2,"shortcut":"projection"},
            {"kind":"global_pool"},{"kind":"classifier"}]}"#;
        let spec = ArchitectureSpec::from_json(text).unwrap();
        assert_eq!(spec.layers[0], LayerSpec::conv(3));
        assert_eq!(ArchitectureSpec::from_json(&spec.to_json()).unwrap(), spec);
    }

    #[test]
    fn classifier_must_follow_global_pool() {
        let spec = ArchitectureSpec {
            name: "bad".into(),
            input: [4, 4, 1],
            classes: 2,
            layers: vec![LayerSpec::conv(3), LayerSpec::Classifier],
        };
        assert!(spec.validate().is_err());
    }
}
