//! Bundled architectures and the published width schedules used as
//! parameter-count fixtures.
//!
//! Conventions: 3x3 convolutions use "same" padding and no bias, every
//! convolution is followed by batch norm, and every residual network has a
//! fixed 64-wide 3x3 stem that is not part of the searched schedule.

use super::spec::{ArchitectureSpec, ChannelSchedule, LayerSpec, ShortcutKind};
use crate::error::{Error, Result};
use crate::tensor::PoolKind;

pub const FIXTURE_NAMES: &[&str] = &[
    "resnet18",
    "resnet18-basic",
    "resnet34",
    "vgg16",
    "plain-cnn",
    "toy-3conv",
    "residual-toy",
    "bottleneck-toy",
];

pub fn by_name(name: &str) -> Result<ArchitectureSpec> {
    Ok(match name {
        "resnet18" => resnet18(),
        "resnet18-basic" => resnet18_basic(),
        "resnet34" => resnet34(),
        "vgg16" => vgg16(),
        "plain-cnn" => plain_cnn(),
        "toy-3conv" => toy_3conv(),
        "residual-toy" => residual_toy(),
        "bottleneck-toy" => bottleneck_toy(),
        other => {
            return Err(Error::input(format!(
                "unknown fixture {other:?}; known: {}",
                FIXTURE_NAMES.join(", ")
            )))
        }
    })
}

fn tail(mut layers: Vec<LayerSpec>) -> Vec<LayerSpec> {
    layers.push(LayerSpec::GlobalPool);
    layers.push(LayerSpec::Classifier);
    layers
}

fn resnet(name: &str, blocks_per_stage: &[usize], shortcut_for: impl Fn(usize, usize) -> ShortcutKind) -> ArchitectureSpec {
    let mut layers = vec![LayerSpec::fixed_conv(3, 64)];
    for (stage, &blocks) in blocks_per_stage.iter().enumerate() {
        for b in 0..blocks {
            let stride = if stage > 0 && b == 0 { 2 } else { 1 };
            layers.push(LayerSpec::basic(stride, shortcut_for(stage, b)));
        }
    }
    ArchitectureSpec {
        name: name.into(),
        input: [32, 32, 3],
        classes: 10,
        layers: tail(layers),
    }
}

/// Search-time ResNet-18: projection shortcut on every block so the two
/// convs of each block vary independently.
pub fn resnet18() -> ArchitectureSpec {
    resnet("resnet18", &[2, 2, 2, 2], |_, _| ShortcutKind::Projection)
}

/// The usual CIFAR ResNet-18: identity shortcuts wherever widths agree.
/// Only schedules whose tied widths match (such as the original one) are
/// valid for it.
pub fn resnet18_basic() -> ArchitectureSpec {
    resnet("resnet18-basic", &[2, 2, 2, 2], |stage, b| {
        if stage > 0 && b == 0 {
            ShortcutKind::Projection
        } else {
            ShortcutKind::Identity
        }
    })
}

pub fn resnet34() -> ArchitectureSpec {
    resnet("resnet34", &[3, 4, 6, 3], |_, _| ShortcutKind::Projection)
}

/// CIFAR VGG-16 with batch norm, dropout, one 512-unit hidden layer and a
/// softmax classifier.
pub fn vgg16() -> ArchitectureSpec {
    let groups = [2usize, 2, 3, 3, 3];
    let mut layers = Vec::new();
    let mut first = true;
    for &convs in &groups {
        for c in 0..convs {
            layers.push(LayerSpec::conv(3));
            if c + 1 < convs {
                layers.push(LayerSpec::Dropout { rate: if first { 0.3 } else { 0.4 } });
            }
            first = false;
        }
        layers.push(LayerSpec::Pool { pool: PoolKind::Max });
    }
    layers.push(LayerSpec::Dropout { rate: 0.5 });
    layers.push(LayerSpec::GlobalPool);
    layers.push(LayerSpec::Dense { width: 512, relu: true });
    layers.push(LayerSpec::Dropout { rate: 0.5 });
    layers.push(LayerSpec::Classifier);
    ArchitectureSpec {
        name: "vgg16".into(),
        input: [32, 32, 3],
        classes: 10,
        layers,
    }
}

/// Six 3x3 convs with max pooling after the second and fourth; sized for
/// 16x16 desk-scale inputs.
pub fn plain_cnn() -> ArchitectureSpec {
    let mut layers = Vec::new();
    for i in 0..6 {
        layers.push(LayerSpec::conv(3));
        if i == 1 || i == 3 {
            layers.push(LayerSpec::Pool { pool: PoolKind::Max });
        }
    }
    ArchitectureSpec {
        name: "plain-cnn".into(),
        input: [16, 16, 3],
        classes: 4,
        layers: tail(layers),
    }
}

pub fn toy_3conv() -> ArchitectureSpec {
    ArchitectureSpec {
        name: "toy-3conv".into(),
        input: [8, 8, 3],
        classes: 3,
        layers: tail(vec![
            LayerSpec::conv(3),
            LayerSpec::conv(3),
            LayerSpec::Pool { pool: PoolKind::Avg },
            LayerSpec::conv(3),
        ]),
    }
}

pub fn residual_toy() -> ArchitectureSpec {
    ArchitectureSpec {
        name: "residual-toy".into(),
        input: [8, 8, 3],
        classes: 3,
        layers: tail(vec![
            LayerSpec::conv(3),
            LayerSpec::basic(1, ShortcutKind::Projection),
            LayerSpec::basic(2, ShortcutKind::Projection),
        ]),
    }
}

pub fn bottleneck_toy() -> ArchitectureSpec {
    ArchitectureSpec {
        name: "bottleneck-toy".into(),
        input: [8, 8, 3],
        classes: 3,
        layers: tail(vec![
            LayerSpec::conv(3),
            LayerSpec::bottleneck(1, ShortcutKind::Projection),
            LayerSpec::bottleneck(2, ShortcutKind::Projection),
        ]),
    }
}

/// Published channel schedules for the original and modified networks.
pub mod published {
    use super::ChannelSchedule;

    fn repeat(groups: &[(usize, usize)]) -> ChannelSchedule {
        ChannelSchedule(
            groups
                .iter()
                .flat_map(|&(w, n)| std::iter::repeat_n(w, n))
                .collect(),
        )
    }

    pub fn resnet18_original() -> ChannelSchedule {
        repeat(&[(64, 4), (128, 4), (256, 4), (512, 4)])
    }

    /// The three searched ResNet-18 schedules, in table order.
    pub fn resnet18_modified() -> [ChannelSchedule; 3] {
        [
            ChannelSchedule(vec![198, 200, 210, 216, 192, 194, 202, 208, 202, 200, 216, 218, 244, 254, 272, 284]),
            ChannelSchedule(vec![200, 206, 226, 238, 212, 228, 242, 290, 258, 256, 280, 280, 286, 314, 320, 324]),
            ChannelSchedule(vec![248, 272, 304, 336, 256, 272, 292, 298, 252, 264, 264, 266, 244, 248, 236, 230]),
        ]
    }

    pub fn resnet18_constant() -> ChannelSchedule {
        repeat(&[(256, 16)])
    }

    pub fn resnet18_decreasing() -> ChannelSchedule {
        repeat(&[(512, 4), (256, 4), (128, 4), (64, 4)])
    }

    pub fn resnet34_original() -> ChannelSchedule {
        repeat(&[(64, 6), (128, 8), (256, 12), (512, 6)])
    }

    pub fn resnet34_modified() -> ChannelSchedule {
        ChannelSchedule(vec![
            474, 420, 364, 330, 304, 280, 222, 208, 202, 192, 186, 178, 170, 166, 172, 166, 166, 160,
            152, 144, 140, 140, 136, 136, 134, 132, 136, 126, 128, 128, 126, 116,
        ])
    }

    pub fn vgg16_original() -> ChannelSchedule {
        repeat(&[(64, 2), (128, 2), (256, 3), (512, 6)])
    }

    pub fn vgg16_modified() -> ChannelSchedule {
        ChannelSchedule(vec![178, 176, 214, 220, 228, 230, 234, 236, 302, 304, 308, 316, 320])
    }

    pub const NAMES: &[&str] = &[
        "resnet18-original",
        "resnet18-modified-1",
        "resnet18-modified-2",
        "resnet18-modified-3",
        "resnet18-constant",
        "resnet18-decreasing",
        "resnet34-original",
        "resnet34-modified",
        "vgg16-original",
        "vgg16-modified",
    ];

    /// A published schedule by name, e.g. `resnet18-modified-2`.
    pub fn by_name(name: &str) -> Option<ChannelSchedule> {
        let [m1, m2, m3] = resnet18_modified();
        Some(match name {
            "resnet18-original" => resnet18_original(),
            "resnet18-modified-1" => m1,
            "resnet18-modified-2" => m2,
            "resnet18-modified-3" => m3,
            "resnet18-constant" => resnet18_constant(),
            "resnet18-decreasing" => resnet18_decreasing(),
            "resnet34-original" => resnet34_original(),
            "resnet34-modified" => resnet34_modified(),
            "vgg16-original" => vgg16_original(),
            "vgg16-modified" => vgg16_modified(),
            _ => return None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_fixture_validates() {
        for name in FIXTURE_NAMES {
            let spec = by_name(name).unwrap();
            spec.validate().unwrap();
            assert!(spec.has_classifier(), "{name}");
        }
        assert!(by_name("alexnet").is_err());
    }

    #[test]
    fn published_schedules_match_their_specs() {
        assert_eq!(resnet18().schedule_len(), published::resnet18_original().len());
        for s in published::resnet18_modified() {
            resnet18().check_schedule(&s).unwrap();
        }
        resnet34().check_schedule(&published::resnet34_modified()).unwrap();
        vgg16().check_schedule(&published::vgg16_modified()).unwrap();
    }
}
