//! Concrete layout of a spec under a schedule: the shape of every
//! parameterized unit and the channel groups that tie units together.
//!
//! A channel group is a set of feature-map channels that must be widened
//! as one: the outputs of the convs that produce it (several, when residual
//! additions merge paths) and the input axis of every unit that consumes it.

use super::spec::{ArchitectureSpec, ChannelSchedule, LayerSpec, ShortcutKind};
use crate::error::{Error, Result};
use crate::tensor::conv_output_dim;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum UnitPart {
    Main,
    Body(usize),
    Shortcut,
}

/// Address of a parameterized unit: the spec layer and the part within it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UnitId {
    pub layer: usize,
    pub part: UnitPart,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnitKind {
    Conv {
        kernel: usize,
        stride: usize,
        padding: usize,
        batch_norm: bool,
        bias: bool,
        relu: bool,
    },
    Dense {
        relu: bool,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UnitShape {
    pub id: UnitId,
    pub kind: UnitKind,
    pub in_channels: usize,
    pub out_channels: usize,
    pub in_hw: (usize, usize),
    pub out_hw: (usize, usize),
}

impl UnitShape {
    pub fn param_count(&self) -> u64 {
        let (cin, cout) = (self.in_channels as u64, self.out_channels as u64);
        match self.kind {
            UnitKind::Conv { kernel, batch_norm, bias, .. } => {
                let k = kernel as u64;
                k * k * cin * cout + if bias { cout } else { 0 } + if batch_norm { 2 * cout } else { 0 }
            }
            UnitKind::Dense { .. } => cin * cout + cout,
        }
    }

    pub fn macs(&self) -> u64 {
        let (cin, cout) = (self.in_channels as u64, self.out_channels as u64);
        match self.kind {
            UnitKind::Conv { kernel, .. } => {
                let k = kernel as u64;
                (self.out_hw.0 * self.out_hw.1) as u64 * k * k * cin * cout
            }
            UnitKind::Dense { .. } => cin * cout,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChannelGroup {
    pub width: usize,
    /// Tied to the input image, a fixed-width layer, or a classifier output.
    pub fixed: bool,
    pub producers: Vec<UnitId>,
    pub consumers: Vec<UnitId>,
}

#[derive(Clone, Debug)]
pub struct Layout {
    pub units: Vec<UnitShape>,
    pub groups: Vec<ChannelGroup>,
    pub output_hw: (usize, usize),
    pub output_channels: usize,
}

impl Layout {
    pub fn unit(&self, id: UnitId) -> Option<&UnitShape> {
        self.units.iter().find(|u| u.id == id)
    }
}

struct Space {
    width: usize,
    fixed: bool,
    parent: usize,
    producers: Vec<UnitId>,
    consumers: Vec<UnitId>,
}

struct Builder {
    spaces: Vec<Space>,
    units: Vec<UnitShape>,
}

impl Builder {
    fn space(&mut self, width: usize, fixed: bool, producer: Option<UnitId>) -> usize {
        let id = self.spaces.len();
        self.spaces.push(Space {
            width,
            fixed,
            parent: id,
            producers: producer.into_iter().collect(),
            consumers: Vec::new(),
        });
        id
    }

    fn root(&mut self, mut s: usize) -> usize {
        while self.spaces[s].parent != s {
            let p = self.spaces[s].parent;
            self.spaces[s].parent = self.spaces[p].parent;
            s = p;
        }
        s
    }

    fn width(&mut self, s: usize) -> usize {
        let r = self.root(s);
        self.spaces[r].width
    }

    fn union(&mut self, a: usize, b: usize, layer: usize) -> Result<()> {
        let (ra, rb) = (self.root(a), self.root(b));
        if ra == rb {
            return Ok(());
        }
        if self.spaces[ra].width != self.spaces[rb].width {
            return Err(Error::input(format!(
                "residual addition at layer {layer} joins {} and {} channels",
                self.spaces[ra].width, self.spaces[rb].width
            )));
        }
        let (keep, gone) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.spaces[gone].parent = keep;
        self.spaces[keep].fixed |= self.spaces[gone].fixed;
        Ok(())
    }

    /// Adds a unit consuming `input`; returns the space it produces.
    fn unit(
        &mut self,
        id: UnitId,
        kind: UnitKind,
        input: usize,
        out_channels: usize,
        in_hw: (usize, usize),
        fixed: bool,
    ) -> Result<(usize, (usize, usize))> {
        let out_hw = match kind {
            UnitKind::Conv { kernel, stride, padding, .. } => {
                let h = conv_output_dim(in_hw.0, kernel, stride, padding);
                let w = conv_output_dim(in_hw.1, kernel, stride, padding);
                match (h, w) {
                    (Some(h), Some(w)) => (h, w),
                    _ => return Err(Error::shape(format!("layer {} kernel exceeds its input", id.layer))),
                }
            }
            UnitKind::Dense { .. } => (1, 1),
        };
        let in_channels = self.width(input);
        self.spaces[input].consumers.push(id);
        self.units.push(UnitShape {
            id,
            kind,
            in_channels,
            out_channels,
            in_hw,
            out_hw,
        });
        Ok((self.space(out_channels, fixed, Some(id)), out_hw))
    }
}

fn conv_kind(kernel: usize, stride: usize, relu: bool) -> UnitKind {
    UnitKind::Conv {
        kernel,
        stride,
        padding: kernel / 2,
        batch_norm: true,
        bias: false,
        relu,
    }
}

pub fn layout(spec: &ArchitectureSpec, schedule: &ChannelSchedule) -> Result<Layout> {
    if schedule.len() != spec.schedule_len() {
        return Err(Error::input(format!(
            "schedule has {} widths, {} has {} searchable convs",
            schedule.len(),
            spec.name,
            spec.schedule_len()
        )));
    }
    let [h0, w0, c0] = spec.input;
    let mut b = Builder {
        spaces: Vec::new(),
        units: Vec::new(),
    };
    let mut widths = schedule.widths().iter().copied();
    let mut cur = b.space(c0, true, None);
    let mut hw = (h0, w0);
    for (layer, l) in spec.layers.iter().enumerate() {
        let main = UnitId { layer, part: UnitPart::Main };
        let body = |i| UnitId { layer, part: UnitPart::Body(i) };
        match *l {
            LayerSpec::Conv { kernel, stride, width, batch_norm, bias, relu } => {
                let kind = UnitKind::Conv {
                    kernel,
                    stride,
                    padding: kernel / 2,
                    batch_norm,
                    bias,
                    relu,
                };
                let (out, fixed) = match width {
                    Some(w) => (w, true),
                    None => (widths.next().expect("length checked"), false),
                };
                (cur, hw) = b.unit(main, kind, cur, out, hw, fixed)?;
            }
            LayerSpec::Pool { .. } => hw = (hw.0 / 2, hw.1 / 2),
            LayerSpec::Dropout { .. } => {}
            LayerSpec::BasicBlock { stride, shortcut } => {
                let a = widths.next().expect("length checked");
                let c = widths.next().expect("length checked");
                let input = cur;
                let (s1, hw1) = b.unit(body(0), conv_kind(3, stride, true), input, a, hw, false)?;
                let (s2, hw2) = b.unit(body(1), conv_kind(3, 1, false), s1, c, hw1, false)?;
                residual_join(&mut b, layer, shortcut, stride, input, s2, c, hw)?;
                (cur, hw) = (s2, hw2);
            }
            LayerSpec::Bottleneck { stride, shortcut } => {
                let w1 = widths.next().expect("length checked");
                let w2 = widths.next().expect("length checked");
                let w3 = widths.next().expect("length checked");
                let input = cur;
                let (s1, hw1) = b.unit(body(0), conv_kind(1, 1, true), input, w1, hw, false)?;
                let (s2, hw2) = b.unit(body(1), conv_kind(3, stride, true), s1, w2, hw1, false)?;
                let (s3, hw3) = b.unit(body(2), conv_kind(1, 1, false), s2, w3, hw2, false)?;
                residual_join(&mut b, layer, shortcut, stride, input, s3, w3, hw)?;
                (cur, hw) = (s3, hw3);
            }
            LayerSpec::GlobalPool => hw = (1, 1),
            LayerSpec::Dense { width, relu } => {
                (cur, hw) = b.unit(main, UnitKind::Dense { relu }, cur, width, hw, true)?;
            }
            LayerSpec::Classifier => {
                (cur, hw) = b.unit(main, UnitKind::Dense { relu: false }, cur, spec.classes, hw, true)?;
            }
        }
    }
    let output_channels = b.width(cur);

    let mut groups: Vec<ChannelGroup> = Vec::new();
    let mut group_of_root = vec![usize::MAX; b.spaces.len()];
    for s in 0..b.spaces.len() {
        let r = b.root(s);
        if group_of_root[r] == usize::MAX {
            group_of_root[r] = groups.len();
            groups.push(ChannelGroup {
                width: b.spaces[r].width,
                fixed: b.spaces[r].fixed,
                producers: Vec::new(),
                consumers: Vec::new(),
            });
        }
        let g = &mut groups[group_of_root[r]];
        g.producers.extend(b.spaces[s].producers.iter().copied());
        g.consumers.extend(b.spaces[s].consumers.iter().copied());
    }
    Ok(Layout {
        units: b.units,
        groups,
        output_hw: hw,
        output_channels,
    })
}

#[allow(clippy::too_many_arguments)]
fn residual_join(
    b: &mut Builder,
    layer: usize,
    shortcut: ShortcutKind,
    stride: usize,
    input: usize,
    body_out: usize,
    width: usize,
    hw: (usize, usize),
) -> Result<()> {
    match shortcut {
        ShortcutKind::Projection => {
            let id = UnitId { layer, part: UnitPart::Shortcut };
            let (s, _) = b.unit(id, conv_kind(1, stride, false), input, width, hw, false)?;
            b.union(body_out, s, layer)
        }
        ShortcutKind::Identity => {
            if stride != 1 {
                return Err(Error::input(format!(
                    "identity shortcut at layer {layer} cannot downsample"
                )));
            }
            b.union(body_out, input, layer)
        }
    }
}

/// Trainable parameters: conv kernels, biases, batch-norm scale and shift,
/// dense weights and biases.
pub fn param_count(spec: &ArchitectureSpec, schedule: &ChannelSchedule) -> Result<u64> {
    Ok(layout(spec, schedule)?.units.iter().map(UnitShape::param_count).sum())
}

/// Multiply-accumulate operations of all conv and dense layers for one image.
pub fn flop_count(spec: &ArchitectureSpec, schedule: &ChannelSchedule) -> Result<u64> {
    Ok(layout(spec, schedule)?.units.iter().map(UnitShape::macs).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::fixtures;

    #[test]
    fn single_conv_counts() {
        let spec = ArchitectureSpec {
            name: "one".into(),
            input: [4, 4, 3],
            classes: 1,
            layers: vec![LayerSpec::Conv {
                kernel: 3,
                stride: 1,
                width: None,
                batch_norm: false,
                bias: false,
                relu: false,
            }],
        };
        assert_eq!(param_count(&spec, &ChannelSchedule(vec![16])).unwrap(), 432);
    }

    #[test]
    fn one_by_one_conv_macs() {
        let spec = ArchitectureSpec {
            name: "pointwise".into(),
            input: [4, 4, 1],
            classes: 1,
            layers: vec![LayerSpec::Conv {
                kernel: 1,
                stride: 1,
                width: None,
                batch_norm: false,
                bias: false,
                relu: false,
            }],
        };
        assert_eq!(flop_count(&spec, &ChannelSchedule(vec![1])).unwrap(), 16);
    }

    #[test]
    fn length_mismatch_is_input_error() {
        let spec = fixtures::toy_3conv();
        assert!(matches!(
            param_count(&spec, &ChannelSchedule(vec![4, 4])),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn projection_blocks_merge_body_and_shortcut() {
        let spec = fixtures::residual_toy();
        let lay = layout(&spec, &ChannelSchedule(vec![4, 6, 8, 10, 12])).unwrap();
        let merged = lay
            .groups
            .iter()
            .find(|g| g.producers.contains(&UnitId { layer: 1, part: UnitPart::Shortcut }))
            .unwrap();
        assert_eq!(merged.width, 8);
        assert_eq!(merged.producers.len(), 2);
        // second block's conv and shortcut both read it
        assert_eq!(merged.consumers.len(), 2);
    }

    #[test]
    fn identity_shortcut_ties_widths() {
        let spec = fixtures::resnet18_basic();
        let ok = fixtures::published::resnet18_original();
        assert!(layout(&spec, &ok).is_ok());
        let mut bad = ok.clone();
        bad.0[1] = 66;
        assert!(layout(&spec, &bad).is_err());
    }
}
