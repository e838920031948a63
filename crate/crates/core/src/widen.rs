//! Function-preserving widening.
//!
//! A layer going from `f` to `f'` filters keeps its first `f` filters and
//! fills the rest with copies of randomly chosen originals. Every consumer
//! of those channels splits the incoming weight of a replicated channel
//! evenly across its copies, so the widened network computes the same
//! function. Optional multiplicative noise on the consumer side breaks the
//! symmetry between copies.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::arch::{layout, ChannelSchedule, UnitId};
use crate::error::{Error, Result};
use crate::network::{NetworkInstance, UnitMut};
use crate::tensor::{Scalar, Tensor4};

/// Random mapping from new channel indices to original ones (0-based).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WidenMapping {
    pub source: Vec<usize>,
    pub counts: Vec<usize>,
}

impl WidenMapping {
    pub fn from_source(original: usize, source: Vec<usize>) -> Result<Self> {
        if source.len() < original || source.iter().any(|&s| s >= original) {
            return Err(Error::input("mapping must cover every original channel"));
        }
        if source[..original].iter().enumerate().any(|(j, &s)| s != j) {
            return Err(Error::input("mapping must keep the original channels in place"));
        }
        let mut counts = vec![0; original];
        for &s in &source {
            counts[s] += 1;
        }
        Ok(Self { source, counts })
    }

    pub fn original(&self) -> usize {
        self.counts.len()
    }

    pub fn widened(&self) -> usize {
        self.source.len()
    }

    pub fn is_identity(&self) -> bool {
        self.original() == self.widened()
    }
}

pub fn make_mapping<R: Rng + ?Sized>(original: usize, widened: usize, rng: &mut R) -> Result<WidenMapping> {
    if original == 0 {
        return Err(Error::input("cannot widen a zero-width layer"));
    }
    if widened < original {
        return Err(Error::input(format!("cannot narrow from {original} to {widened} channels")));
    }
    let source = (0..widened)
        .map(|j| if j < original { j } else { rng.random_range(0..original) })
        .collect();
    WidenMapping::from_source(original, source)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    /// Each consumer weight is scaled by `1 + delta`, `delta ~ U[0, delta_max]`.
    pub delta_max: f64,
    /// Draw one `delta` per consumer input channel instead of per entry.
    pub per_channel: bool,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            delta_max: 0.05,
            per_channel: false,
        }
    }
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self {
            delta_max: 0.0,
            per_channel: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.delta_max) {
            return Err(Error::input(format!("noise delta {} outside [0, 1]", self.delta_max)));
        }
        Ok(())
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.delta_max > 0.0 {
            1.0 + rng.random_range(0.0..=self.delta_max)
        } else {
            1.0
        }
    }
}

/// Copies slices along `axis` of a row-major buffer per `mapping.source`.
fn replicate_axis<T: Copy>(data: &[T], dims: &[usize], axis: usize, mapping: &WidenMapping) -> Vec<T> {
    let outer: usize = dims[..axis].iter().product();
    let inner: usize = dims[axis + 1..].iter().product();
    let mut out = Vec::with_capacity(outer * mapping.widened() * inner);
    for o in 0..outer {
        for &s in &mapping.source {
            let start = (o * dims[axis] + s) * inner;
            out.extend_from_slice(&data[start..start + inner]);
        }
    }
    out
}

/// Like [`replicate_axis`] but divides each copy by its replication count
/// and applies consumer noise.
fn split_axis<T: Scalar, R: Rng + ?Sized>(
    data: &[T],
    dims: &[usize],
    axis: usize,
    mapping: &WidenMapping,
    noise: &NoiseSpec,
    rng: &mut R,
) -> Vec<T> {
    let outer: usize = dims[..axis].iter().product();
    let inner: usize = dims[axis + 1..].iter().product();
    let channel_noise: Option<Vec<f64>> =
        noise.per_channel.then(|| (0..mapping.widened()).map(|_| noise.draw(rng)).collect());
    let mut out = Vec::with_capacity(outer * mapping.widened() * inner);
    for o in 0..outer {
        for (j, &s) in mapping.source.iter().enumerate() {
            let scale = 1.0 / mapping.counts[s] as f64;
            let start = (o * dims[axis] + s) * inner;
            for &v in &data[start..start + inner] {
                let d = match &channel_noise {
                    Some(c) => c[j],
                    None => noise.draw(rng),
                };
                out.push(T::of(v.as_f64() * scale * d));
            }
        }
    }
    out
}

fn replicate<T: Copy>(v: &[T], mapping: &WidenMapping) -> Vec<T> {
    mapping.source.iter().map(|&s| v[s]).collect()
}

/// Widens the output axis of a conv kernel `w_i` (HWIO) and the input axis of
/// its successor `w_next`. Returns `(u_i, u_next)`.
pub fn widen_layer<T: Scalar, R: Rng + ?Sized>(
    w_i: &Tensor4<T>,
    w_next: &Tensor4<T>,
    mapping: &WidenMapping,
    noise: &NoiseSpec,
    rng: &mut R,
) -> Result<(Tensor4<T>, Tensor4<T>)> {
    noise.validate()?;
    let di = w_i.dims();
    let dn = w_next.dims();
    if di[3] != mapping.original() || dn[2] != mapping.original() {
        return Err(Error::shape(format!(
            "mapping from {} channels does not fit kernels {di:?} -> {dn:?}",
            mapping.original()
        )));
    }
    let f = mapping.widened();
    let u_i = Tensor4::new([di[0], di[1], di[2], f], replicate_axis(w_i.data(), &di, 3, mapping))?;
    let u_next = Tensor4::new([dn[0], dn[1], f, dn[3]], split_axis(w_next.data(), &dn, 2, mapping, noise, rng))?;
    Ok((u_i, u_next))
}

fn widen_producer<T: Scalar>(net: &mut NetworkInstance<T>, id: UnitId, mapping: &WidenMapping) -> Result<()> {
    match net.unit_mut(id) {
        Some(UnitMut::Conv(u)) => {
            let d = u.weight.dims();
            if d[3] != mapping.original() {
                return Err(Error::shape(format!("unit {id:?} has {} filters, mapping expects {}", d[3], mapping.original())));
            }
            let data = replicate_axis(u.weight.data(), &d, 3, mapping);
            u.weight = Tensor4::new([d[0], d[1], d[2], mapping.widened()], data)?;
            if let Some(b) = &mut u.bias {
                *b = replicate(b, mapping);
            }
            if let Some(bn) = &mut u.bn {
                bn.gamma = replicate(&bn.gamma, mapping);
                bn.beta = replicate(&bn.beta, mapping);
                bn.running_mean = replicate(&bn.running_mean, mapping);
                bn.running_var = replicate(&bn.running_var, mapping);
            }
            Ok(())
        }
        Some(UnitMut::Dense(_)) => Err(Error::input(format!("dense unit {id:?} has a fixed width"))),
        None => Err(Error::shape(format!("no unit {id:?} in the network"))),
    }
}

fn widen_consumer<T: Scalar, R: Rng + ?Sized>(
    net: &mut NetworkInstance<T>,
    id: UnitId,
    mapping: &WidenMapping,
    noise: &NoiseSpec,
    rng: &mut R,
) -> Result<()> {
    match net.unit_mut(id) {
        Some(UnitMut::Conv(u)) => {
            let d = u.weight.dims();
            if d[2] != mapping.original() {
                return Err(Error::shape(format!("unit {id:?} reads {} channels, mapping expects {}", d[2], mapping.original())));
            }
            let data = split_axis(u.weight.data(), &d, 2, mapping, noise, rng);
            u.weight = Tensor4::new([d[0], d[1], mapping.widened(), d[3]], data)?;
            Ok(())
        }
        Some(UnitMut::Dense(u)) => {
            if u.in_features != mapping.original() {
                return Err(Error::shape(format!("unit {id:?} reads {} features, mapping expects {}", u.in_features, mapping.original())));
            }
            let dims = [u.in_features, u.out_features];
            u.weight = split_axis(&u.weight, &dims, 0, mapping, noise, rng);
            u.in_features = mapping.widened();
            Ok(())
        }
        None => Err(Error::shape(format!("no unit {id:?} in the network"))),
    }
}

/// Widens `net` in place to `target`. Every channel group that grows gets one
/// shared mapping applied to all its producers and consumers.
pub fn widen_network<T: Scalar, R: Rng + ?Sized>(
    net: &mut NetworkInstance<T>,
    target: &ChannelSchedule,
    noise: &NoiseSpec,
    rng: &mut R,
) -> Result<Vec<WidenMapping>> {
    noise.validate()?;
    let spec = net.spec().clone();
    spec.check_schedule(target)?;
    let current = layout(&spec, net.schedule())?;
    let wanted = layout(&spec, target)?;
    if current.groups.len() != wanted.groups.len() {
        return Err(Error::shape("layouts disagree on channel groups"));
    }
    let mut changes = Vec::new();
    for (cur, tgt) in current.groups.iter().zip(&wanted.groups) {
        if tgt.width < cur.width {
            return Err(Error::input(format!("cannot narrow a channel group from {} to {}", cur.width, tgt.width)));
        }
        if tgt.width == cur.width {
            continue;
        }
        if cur.fixed {
            return Err(Error::input("fixed-width channels cannot change"));
        }
        changes.push((cur.clone(), make_mapping(cur.width, tgt.width, rng)?));
    }
    let mut mappings = Vec::with_capacity(changes.len());
    for (group, mapping) in changes {
        for &p in &group.producers {
            widen_producer(net, p, &mapping)?;
        }
        for &c in &group.consumers {
            widen_consumer(net, c, &mapping, noise, rng)?;
        }
        mappings.push(mapping);
    }
    net.set_schedule(target.clone());
    Ok(mappings)
}

/// Largest absolute difference between two output vectors.
pub fn max_deviation<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x.as_f64() - y.as_f64()).abs())
        .fold(0.0, f64::max)
}
