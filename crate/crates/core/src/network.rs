//! Materialized networks: weight tensors for a spec under a concrete width
//! schedule, with inference, training-mode loss and exact gradients.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::arch::{
    layout, ArchitectureSpec, ChannelSchedule, LayerSpec, UnitId, UnitKind, UnitPart, UnitShape,
};
use crate::error::{Error, Result};
use crate::tensor::{
    batch_norm_backward, batch_norm_eval, batch_norm_forward, conv2d_backward, conv2d_forward,
    dense_backward, dense_forward, global_avg_pool, global_avg_pool_backward, pool2x2,
    pool2x2_backward, relu_backward, relu_inplace, softmax_cross_entropy, softmax_rows,
    BatchNormCache, CheckpointLayer, CheckpointTensor, PoolKind, Scalar, Tensor4,
};

#[derive(Clone, Debug, PartialEq)]
pub struct BatchNorm<T> {
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
}

impl<T: Scalar> BatchNorm<T> {
    fn identity(c: usize) -> Self {
        Self {
            gamma: vec![T::one(); c],
            beta: vec![T::zero(); c],
            running_mean: vec![T::zero(); c],
            running_var: vec![T::one(); c],
        }
    }
}

/// Convolution with optional bias, batch norm and ReLU, applied in that order.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvUnit<T> {
    /// `(k1, k2, c, f)`.
    pub weight: Tensor4<T>,
    pub bias: Option<Vec<T>>,
    pub bn: Option<BatchNorm<T>>,
    pub stride: usize,
    pub padding: usize,
    pub relu: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseUnit<T> {
    /// Row-major `(in, out)`.
    pub weight: Vec<T>,
    pub bias: Vec<T>,
    pub in_features: usize,
    pub out_features: usize,
    pub relu: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node<T> {
    Conv(ConvUnit<T>),
    Pool(PoolKind),
    Dropout(f64),
    /// `relu(body(x) + shortcut(x))`; an absent shortcut is the identity.
    Residual {
        body: Vec<ConvUnit<T>>,
        shortcut: Option<ConvUnit<T>>,
    },
    GlobalPool,
    Dense(DenseUnit<T>),
}

pub enum UnitRef<'a, T> {
    Conv(&'a ConvUnit<T>),
    Dense(&'a DenseUnit<T>),
}

pub enum UnitMut<'a, T> {
    Conv(&'a mut ConvUnit<T>),
    Dense(&'a mut DenseUnit<T>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamRole {
    Weight,
    Bias,
    Gamma,
    Beta,
}

impl ParamRole {
    /// Only kernels take L2 weight decay.
    pub fn decays(self) -> bool {
        self == ParamRole::Weight
    }
}

/// Gradients of every trainable tensor, in [`NetworkInstance::params`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T>(pub Vec<Vec<T>>);

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkInstance<T> {
    spec: ArchitectureSpec,
    schedule: ChannelSchedule,
    nodes: Vec<Node<T>>,
}

fn he_normal<T: Scalar, R: Rng + ?Sized>(len: usize, fan_in: usize, rng: &mut R) -> Vec<T> {
    let std = (2.0 / fan_in as f64).sqrt();
    let dist = Normal::new(0.0, std).expect("positive std");
    (0..len).map(|_| T::of(dist.sample(rng))).collect()
}

fn init_conv<T: Scalar, R: Rng + ?Sized>(shape: &UnitShape, rng: &mut R) -> ConvUnit<T> {
    let UnitKind::Conv { kernel, stride, padding, batch_norm, bias, relu } = shape.kind else {
        unreachable!("conv shape expected")
    };
    let dims = [kernel, kernel, shape.in_channels, shape.out_channels];
    let fan_in = kernel * kernel * shape.in_channels;
    let data = he_normal(dims.iter().product(), fan_in, rng);
    ConvUnit {
        weight: Tensor4::new(dims, data).expect("dims match"),
        bias: bias.then(|| vec![T::zero(); shape.out_channels]),
        bn: batch_norm.then(|| BatchNorm::identity(shape.out_channels)),
        stride,
        padding,
        relu,
    }
}

fn init_dense<T: Scalar, R: Rng + ?Sized>(shape: &UnitShape, rng: &mut R) -> DenseUnit<T> {
    let UnitKind::Dense { relu } = shape.kind else {
        unreachable!("dense shape expected")
    };
    DenseUnit {
        weight: he_normal(shape.in_channels * shape.out_channels, shape.in_channels, rng),
        bias: vec![T::zero(); shape.out_channels],
        in_features: shape.in_channels,
        out_features: shape.out_channels,
        relu,
    }
}

struct ConvCache<T> {
    input: Tensor4<T>,
    bn: Option<BatchNormCache<T>>,
    output: Tensor4<T>,
}

enum NodeCache<T> {
    Conv(ConvCache<T>),
    Pool { input_dims: [usize; 4], argmax: Vec<usize> },
    Dropout { mask: Vec<T> },
    Residual { body: Vec<ConvCache<T>>, shortcut: Option<ConvCache<T>>, output: Tensor4<T> },
    GlobalPool { input_dims: [usize; 4] },
    Dense { input: Tensor4<T>, output: Tensor4<T> },
}

impl<T: Scalar> ConvUnit<T> {
    pub fn in_channels(&self) -> usize {
        self.weight.dims()[2]
    }

    pub fn out_channels(&self) -> usize {
        self.weight.dims()[3]
    }

    fn add_bias(&self, y: &mut Tensor4<T>) {
        if let Some(b) = &self.bias {
            for row in y.data_mut().chunks_exact_mut(b.len()) {
                for (v, &bv) in row.iter_mut().zip(b) {
                    *v += bv;
                }
            }
        }
    }

    fn forward_eval(&self, x: &Tensor4<T>) -> Result<Tensor4<T>> {
        let mut y = conv2d_forward(x, &self.weight, self.stride, self.padding)?;
        self.add_bias(&mut y);
        if let Some(bn) = &self.bn {
            y = batch_norm_eval(&y, &bn.gamma, &bn.beta, &bn.running_mean, &bn.running_var)?;
        }
        if self.relu {
            relu_inplace(&mut y);
        }
        Ok(y)
    }

    fn forward_train(&mut self, x: Tensor4<T>) -> Result<(Tensor4<T>, ConvCache<T>)> {
        let mut y = conv2d_forward(&x, &self.weight, self.stride, self.padding)?;
        self.add_bias(&mut y);
        let mut bn_cache = None;
        if let Some(bn) = &mut self.bn {
            let (z, cache) = batch_norm_forward(&y, &bn.gamma, &bn.beta, &mut bn.running_mean, &mut bn.running_var)?;
            y = z;
            bn_cache = Some(cache);
        }
        if self.relu {
            relu_inplace(&mut y);
        }
        let cache = ConvCache { input: x, bn: bn_cache, output: y.clone() };
        Ok((y, cache))
    }

    /// Pushes this unit's parameter gradients onto `out` in params order.
    fn backward(&self, cache: &ConvCache<T>, mut grad: Tensor4<T>, out: &mut Vec<Vec<T>>) -> Result<Tensor4<T>> {
        if self.relu {
            relu_backward(&cache.output, &mut grad);
        }
        let mut bn_grads = None;
        if let (Some(bn), Some(bc)) = (&self.bn, &cache.bn) {
            let (g, dgamma, dbeta) = batch_norm_backward(bc, &bn.gamma, &grad);
            grad = g;
            bn_grads = Some((dgamma, dbeta));
        }
        let bias_grad = self.bias.as_ref().map(|b| {
            let mut gb = vec![T::zero(); b.len()];
            for row in grad.data().chunks_exact(b.len()) {
                for (a, &g) in gb.iter_mut().zip(row) {
                    *a += g;
                }
            }
            gb
        });
        let (dx, dw) = conv2d_backward(&cache.input, &self.weight, &grad, self.stride, self.padding)?;
        out.push(dw.into_data());
        if let Some(gb) = bias_grad {
            out.push(gb);
        }
        if let Some((dg, db)) = bn_grads {
            out.push(dg);
            out.push(db);
        }
        Ok(dx)
    }

    fn params<'a>(&'a self, out: &mut Vec<(ParamRole, &'a [T])>) {
        out.push((ParamRole::Weight, self.weight.data()));
        if let Some(b) = &self.bias {
            out.push((ParamRole::Bias, b));
        }
        if let Some(bn) = &self.bn {
            out.push((ParamRole::Gamma, &bn.gamma));
            out.push((ParamRole::Beta, &bn.beta));
        }
    }

    fn params_mut<'a>(&'a mut self, out: &mut Vec<(ParamRole, &'a mut [T])>) {
        out.push((ParamRole::Weight, self.weight.data_mut()));
        if let Some(b) = &mut self.bias {
            out.push((ParamRole::Bias, b));
        }
        if let Some(bn) = &mut self.bn {
            out.push((ParamRole::Gamma, &mut bn.gamma));
            out.push((ParamRole::Beta, &mut bn.beta));
        }
    }
}

impl<T: Scalar> DenseUnit<T> {
    fn forward(&self, x: &Tensor4<T>) -> Result<Tensor4<T>> {
        let mut y = dense_forward(x, &self.weight, &self.bias, self.out_features)?;
        if self.relu {
            relu_inplace(&mut y);
        }
        Ok(y)
    }
}

fn residual_eval<T: Scalar>(body: &[ConvUnit<T>], shortcut: &Option<ConvUnit<T>>, x: &Tensor4<T>) -> Result<Tensor4<T>> {
    let mut h = x.clone();
    for u in body {
        h = u.forward_eval(&h)?;
    }
    let skip = match shortcut {
        Some(s) => s.forward_eval(x)?,
        None => x.clone(),
    };
    if skip.dims() != h.dims() {
        return Err(Error::shape(format!("residual paths disagree: {:?} vs {:?}", h.dims(), skip.dims())));
    }
    for (a, &b) in h.data_mut().iter_mut().zip(skip.data()) {
        *a += b;
    }
    relu_inplace(&mut h);
    Ok(h)
}

impl<T: Scalar> NetworkInstance<T> {
    /// Builds a network for `schedule` with He-normal kernels and identity
    /// batch norm.
    pub fn materialize<R: Rng + ?Sized>(spec: &ArchitectureSpec, schedule: &ChannelSchedule, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        if !spec.has_classifier() {
            return Err(Error::input(format!("{} has no classifier layer", spec.name)));
        }
        spec.slot_widths(schedule)?;
        let lay = layout(spec, schedule)?;
        let mut shapes = lay.units.iter().peekable();
        let mut nodes = Vec::with_capacity(spec.layers.len());
        for (layer, l) in spec.layers.iter().enumerate() {
            let mut take = |part: UnitPart| -> &UnitShape {
                let s = shapes.next().expect("layout covers every unit");
                debug_assert_eq!(s.id, UnitId { layer, part });
                s
            };
            nodes.push(match l {
                LayerSpec::Conv { .. } => Node::Conv(init_conv(take(UnitPart::Main), rng)),
                LayerSpec::Pool { pool } => Node::Pool(*pool),
                LayerSpec::Dropout { rate } => Node::Dropout(*rate),
                LayerSpec::BasicBlock { shortcut, .. } | LayerSpec::Bottleneck { shortcut, .. } => {
                    let depth = if matches!(l, LayerSpec::BasicBlock { .. }) { 2 } else { 3 };
                    let body = (0..depth).map(|i| init_conv(take(UnitPart::Body(i)), rng)).collect();
                    let shortcut = match shortcut {
                        crate::arch::ShortcutKind::Projection => Some(init_conv(take(UnitPart::Shortcut), rng)),
                        crate::arch::ShortcutKind::Identity => None,
                    };
                    Node::Residual { body, shortcut }
                }
                LayerSpec::GlobalPool => Node::GlobalPool,
                LayerSpec::Dense { .. } | LayerSpec::Classifier => Node::Dense(init_dense(take(UnitPart::Main), rng)),
            });
        }
        Ok(Self {
            spec: spec.clone(),
            schedule: schedule.clone(),
            nodes,
        })
    }

    pub fn spec(&self) -> &ArchitectureSpec {
        &self.spec
    }

    pub fn schedule(&self) -> &ChannelSchedule {
        &self.schedule
    }

    pub fn nodes(&self) -> &[Node<T>] {
        &self.nodes
    }

    pub fn classes(&self) -> usize {
        self.spec.classes
    }

    pub(crate) fn set_schedule(&mut self, schedule: ChannelSchedule) {
        self.schedule = schedule;
    }

    pub fn unit(&self, id: UnitId) -> Option<UnitRef<'_, T>> {
        match (self.nodes.get(id.layer)?, id.part) {
            (Node::Conv(c), UnitPart::Main) => Some(UnitRef::Conv(c)),
            (Node::Dense(d), UnitPart::Main) => Some(UnitRef::Dense(d)),
            (Node::Residual { body, .. }, UnitPart::Body(i)) => body.get(i).map(UnitRef::Conv),
            (Node::Residual { shortcut: Some(s), .. }, UnitPart::Shortcut) => Some(UnitRef::Conv(s)),
            _ => None,
        }
    }

    pub fn unit_mut(&mut self, id: UnitId) -> Option<UnitMut<'_, T>> {
        match (self.nodes.get_mut(id.layer)?, id.part) {
            (Node::Conv(c), UnitPart::Main) => Some(UnitMut::Conv(c)),
            (Node::Dense(d), UnitPart::Main) => Some(UnitMut::Dense(d)),
            (Node::Residual { body, .. }, UnitPart::Body(i)) => body.get_mut(i).map(UnitMut::Conv),
            (Node::Residual { shortcut: Some(s), .. }, UnitPart::Shortcut) => Some(UnitMut::Conv(s)),
            _ => None,
        }
    }

    /// Parameterized units in declaration order.
    /// Replaces batch-norm scale, shift and running statistics (and conv
    /// biases) with random values, so inference exercises every parameter.
    pub fn randomize_normalization<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for id in self.unit_ids() {
            let Some(UnitMut::Conv(u)) = self.unit_mut(id) else { continue };
            if let Some(b) = &mut u.bias {
                b.iter_mut().for_each(|v| *v = T::of(rng.random_range(-0.2..0.2)));
            }
            if let Some(bn) = &mut u.bn {
                for i in 0..bn.gamma.len() {
                    bn.gamma[i] = T::of(rng.random_range(0.5..1.5));
                    bn.beta[i] = T::of(rng.random_range(-0.3..0.3));
                    bn.running_mean[i] = T::of(rng.random_range(-0.5..0.5));
                    bn.running_var[i] = T::of(rng.random_range(0.5..2.0));
                }
            }
        }
    }

    pub fn unit_ids(&self) -> Vec<UnitId> {
        let mut ids = Vec::new();
        for (layer, node) in self.nodes.iter().enumerate() {
            match node {
                Node::Conv(_) | Node::Dense(_) => ids.push(UnitId { layer, part: UnitPart::Main }),
                Node::Residual { body, shortcut } => {
                    ids.extend((0..body.len()).map(|i| UnitId { layer, part: UnitPart::Body(i) }));
                    if shortcut.is_some() {
                        ids.push(UnitId { layer, part: UnitPart::Shortcut });
                    }
                }
                _ => {}
            }
        }
        ids
    }

    /// Trainable tensors in a fixed order shared with [`Gradients`].
    pub fn params(&self) -> Vec<(ParamRole, &[T])> {
        let mut out = Vec::new();
        for node in &self.nodes {
            match node {
                Node::Conv(c) => c.params(&mut out),
                Node::Residual { body, shortcut } => {
                    body.iter().for_each(|u| u.params(&mut out));
                    if let Some(s) = shortcut {
                        s.params(&mut out);
                    }
                }
                Node::Dense(d) => {
                    out.push((ParamRole::Weight, &d.weight[..]));
                    out.push((ParamRole::Bias, &d.bias[..]));
                }
                _ => {}
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<(ParamRole, &mut [T])> {
        let mut out = Vec::new();
        for node in &mut self.nodes {
            match node {
                Node::Conv(c) => c.params_mut(&mut out),
                Node::Residual { body, shortcut } => {
                    body.iter_mut().for_each(|u| u.params_mut(&mut out));
                    if let Some(s) = shortcut {
                        s.params_mut(&mut out);
                    }
                }
                Node::Dense(d) => {
                    out.push((ParamRole::Weight, &mut d.weight[..]));
                    out.push((ParamRole::Bias, &mut d.bias[..]));
                }
                _ => {}
            }
        }
        out
    }

    pub fn param_count(&self) -> u64 {
        self.params().iter().map(|(_, p)| p.len() as u64).sum()
    }

    fn check_batch(&self, batch: &Tensor4<T>) -> Result<()> {
        let [_, h, w, c] = batch.dims();
        if [h, w, c] != self.spec.input {
            return Err(Error::shape(format!(
                "batch images are {h}x{w}x{c}, {} expects {:?}",
                self.spec.name, self.spec.input
            )));
        }
        Ok(())
    }

    /// Inference-mode logits, `(n, classes)` row-major. Batch norm uses
    /// running statistics and dropout is the identity.
    pub fn logits(&self, batch: &Tensor4<T>) -> Result<Vec<T>> {
        self.check_batch(batch)?;
        let mut x = batch.clone();
        for node in &self.nodes {
            x = match node {
                Node::Conv(c) => c.forward_eval(&x)?,
                Node::Pool(kind) => pool2x2(&x, *kind)?.0,
                Node::Dropout(_) => x,
                Node::Residual { body, shortcut } => residual_eval(body, shortcut, &x)?,
                Node::GlobalPool => global_avg_pool(&x),
                Node::Dense(d) => d.forward(&x)?,
            };
        }
        Ok(x.into_data())
    }

    /// Class probabilities, one row per image.
    pub fn forward(&self, batch: &Tensor4<T>) -> Result<Vec<T>> {
        Ok(softmax_rows(&self.logits(batch)?, self.classes()))
    }

    pub fn predict(&self, batch: &Tensor4<T>) -> Result<Vec<usize>> {
        let logits = self.logits(batch)?;
        Ok(logits
            .chunks_exact(self.classes())
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold((0, T::neg_infinity()), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
                    .0
            })
            .collect())
    }

    /// Training-mode mean cross-entropy and the gradient of every trainable
    /// tensor. Batch statistics normalize activations (and update the running
    /// averages); dropout masks are drawn from `rng`.
    pub fn loss_and_gradients<R: Rng + ?Sized>(
        &mut self,
        batch: &Tensor4<T>,
        labels: &[usize],
        rng: &mut R,
    ) -> Result<(Gradients<T>, T)> {
        self.check_batch(batch)?;
        if labels.len() != batch.dims()[0] {
            return Err(Error::input(format!("{} labels for {} images", labels.len(), batch.dims()[0])));
        }
        let classes = self.classes();
        let mut caches = Vec::with_capacity(self.nodes.len());
        let mut x = batch.clone();
        for node in &mut self.nodes {
            let (y, cache) = match node {
                Node::Conv(c) => {
                    let (y, cache) = c.forward_train(x)?;
                    (y, NodeCache::Conv(cache))
                }
                Node::Pool(kind) => {
                    let input_dims = x.dims();
                    let (y, argmax) = pool2x2(&x, *kind)?;
                    (y, NodeCache::Pool { input_dims, argmax })
                }
                Node::Dropout(rate) => {
                    let keep = 1.0 - *rate;
                    let scale = T::of(1.0 / keep);
                    let mask: Vec<T> = (0..x.len())
                        .map(|_| if rng.random::<f64>() < keep { scale } else { T::zero() })
                        .collect();
                    for (v, &m) in x.data_mut().iter_mut().zip(&mask) {
                        *v *= m;
                    }
                    (x, NodeCache::Dropout { mask })
                }
                Node::Residual { body, shortcut } => {
                    let input = x;
                    let mut h = input.clone();
                    let mut body_caches = Vec::with_capacity(body.len());
                    for u in body.iter_mut() {
                        let (y, c) = u.forward_train(h)?;
                        h = y;
                        body_caches.push(c);
                    }
                    let (skip, sc_cache) = match shortcut {
                        Some(s) => {
                            let (y, c) = s.forward_train(input)?;
                            (y, Some(c))
                        }
                        None => (input, None),
                    };
                    if skip.dims() != h.dims() {
                        return Err(Error::shape("residual paths disagree in shape"));
                    }
                    for (a, &b) in h.data_mut().iter_mut().zip(skip.data()) {
                        *a += b;
                    }
                    relu_inplace(&mut h);
                    let output = h.clone();
                    (h, NodeCache::Residual { body: body_caches, shortcut: sc_cache, output })
                }
                Node::GlobalPool => {
                    let input_dims = x.dims();
                    (global_avg_pool(&x), NodeCache::GlobalPool { input_dims })
                }
                Node::Dense(d) => {
                    let y = d.forward(&x)?;
                    let output = y.clone();
                    (y, NodeCache::Dense { input: x, output })
                }
            };
            caches.push(cache);
            x = y;
        }
        let (loss, grad_logits) = softmax_cross_entropy(x.data(), labels, classes)?;
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("loss is {loss}")));
        }
        let mut grad = Tensor4::new(x.dims(), grad_logits)?;

        // Each node pushes its gradients in forward order onto its own list;
        // lists are concatenated in node order at the end.
        let mut per_node: Vec<Vec<Vec<T>>> = Vec::with_capacity(self.nodes.len());
        for (node, cache) in self.nodes.iter().zip(caches.iter()).rev() {
            let mut mine = Vec::new();
            grad = match (node, cache) {
                (Node::Conv(c), NodeCache::Conv(cc)) => c.backward(cc, grad, &mut mine)?,
                (Node::Pool(kind), NodeCache::Pool { input_dims, argmax }) => {
                    pool2x2_backward(*input_dims, *kind, argmax, &grad)
                }
                (Node::Dropout(_), NodeCache::Dropout { mask }) => {
                    for (g, &m) in grad.data_mut().iter_mut().zip(mask) {
                        *g *= m;
                    }
                    grad
                }
                (Node::Residual { body, shortcut }, NodeCache::Residual { body: bc, shortcut: sc, output }) => {
                    relu_backward(output, &mut grad);
                    let mut g = grad.clone();
                    let mut body_lists = Vec::with_capacity(body.len());
                    for (u, c) in body.iter().zip(bc).rev() {
                        let mut l = Vec::new();
                        g = u.backward(c, g, &mut l)?;
                        body_lists.push(l);
                    }
                    body_lists.reverse();
                    mine.extend(body_lists.into_iter().flatten());
                    let skip = match (shortcut, sc) {
                        (Some(s), Some(c)) => s.backward(c, grad, &mut mine)?,
                        _ => grad,
                    };
                    for (a, &b) in g.data_mut().iter_mut().zip(skip.data()) {
                        *a += b;
                    }
                    g
                }
                (Node::GlobalPool, NodeCache::GlobalPool { input_dims }) => global_avg_pool_backward(*input_dims, &grad),
                (Node::Dense(d), NodeCache::Dense { input, output }) => {
                    if d.relu {
                        relu_backward(output, &mut grad);
                    }
                    let (dx, gw, gb) = dense_backward(input, &d.weight, &grad);
                    mine.push(gw);
                    mine.push(gb);
                    dx
                }
                _ => unreachable!("cache matches node"),
            };
            per_node.push(mine);
        }
        per_node.reverse();
        Ok((Gradients(per_node.into_iter().flatten().collect()), loss))
    }

    pub fn cast<U: Scalar>(&self) -> NetworkInstance<U> {
        fn cv<T: Scalar, U: Scalar>(v: &[T]) -> Vec<U> {
            v.iter().map(|x| U::of(x.as_f64())).collect()
        }
        fn conv<T: Scalar, U: Scalar>(c: &ConvUnit<T>) -> ConvUnit<U> {
            ConvUnit {
                weight: c.weight.cast(),
                bias: c.bias.as_deref().map(cv),
                bn: c.bn.as_ref().map(|bn| BatchNorm {
                    gamma: cv(&bn.gamma),
                    beta: cv(&bn.beta),
                    running_mean: cv(&bn.running_mean),
                    running_var: cv(&bn.running_var),
                }),
                stride: c.stride,
                padding: c.padding,
                relu: c.relu,
            }
        }
        let nodes = self
            .nodes
            .iter()
            .map(|n| match n {
                Node::Conv(c) => Node::Conv(conv(c)),
                Node::Pool(k) => Node::Pool(*k),
                Node::Dropout(r) => Node::Dropout(*r),
                Node::Residual { body, shortcut } => Node::Residual {
                    body: body.iter().map(conv).collect(),
                    shortcut: shortcut.as_ref().map(conv),
                },
                Node::GlobalPool => Node::GlobalPool,
                Node::Dense(d) => Node::Dense(DenseUnit {
                    weight: cv(&d.weight),
                    bias: cv(&d.bias),
                    in_features: d.in_features,
                    out_features: d.out_features,
                    relu: d.relu,
                }),
            })
            .collect();
        NetworkInstance {
            spec: self.spec.clone(),
            schedule: self.schedule.clone(),
            nodes,
        }
    }

    /// All weights and batch-norm statistics, one checkpoint layer per unit.
    pub fn to_checkpoint(&self) -> Vec<CheckpointLayer> {
        fn t<T: Scalar>(dims: Vec<usize>, v: &[T]) -> CheckpointTensor {
            CheckpointTensor { dims, data: v.iter().map(|x| x.as_f64() as f32).collect() }
        }
        self.unit_ids()
            .into_iter()
            .map(|id| {
                let tensors = match self.unit(id).expect("listed unit") {
                    UnitRef::Conv(c) => {
                        let f = c.out_channels();
                        let mut ts = vec![t(c.weight.dims().to_vec(), c.weight.data())];
                        if let Some(b) = &c.bias {
                            ts.push(t(vec![f], b));
                        }
                        if let Some(bn) = &c.bn {
                            for v in [&bn.gamma, &bn.beta, &bn.running_mean, &bn.running_var] {
                                ts.push(t(vec![f], v));
                            }
                        }
                        ts
                    }
                    UnitRef::Dense(d) => vec![
                        t(vec![d.in_features, d.out_features], &d.weight),
                        t(vec![d.out_features], &d.bias),
                    ],
                };
                CheckpointLayer { name: unit_name(id), tensors }
            })
            .collect()
    }

    /// Overwrites weights from a checkpoint written for the same spec and
    /// schedule.
    pub fn load_checkpoint(&mut self, layers: &[CheckpointLayer]) -> Result<()> {
        let ids = self.unit_ids();
        if ids.len() != layers.len() {
            return Err(Error::input(format!(
                "checkpoint has {} layers, network has {} parameterized units",
                layers.len(),
                ids.len()
            )));
        }
        for (id, layer) in ids.into_iter().zip(layers) {
            if layer.name != unit_name(id) {
                return Err(Error::input(format!("checkpoint layer {} where {} expected", layer.name, unit_name(id))));
            }
            let mut targets: Vec<(Vec<usize>, &mut [T])> = Vec::new();
            match self.unit_mut(id).expect("listed unit") {
                UnitMut::Conv(c) => {
                    let f = c.out_channels();
                    targets.push((c.weight.dims().to_vec(), c.weight.data_mut()));
                    if let Some(b) = &mut c.bias {
                        targets.push((vec![f], b));
                    }
                    if let Some(bn) = &mut c.bn {
                        for v in [&mut bn.gamma, &mut bn.beta, &mut bn.running_mean, &mut bn.running_var] {
                            targets.push((vec![f], v));
                        }
                    }
                }
                UnitMut::Dense(d) => {
                    targets.push((vec![d.in_features, d.out_features], &mut d.weight));
                    targets.push((vec![d.out_features], &mut d.bias));
                }
            }
            if targets.len() != layer.tensors.len() {
                return Err(Error::input(format!("layer {} tensor count mismatch", layer.name)));
            }
            for ((dims, dst), src) in targets.into_iter().zip(&layer.tensors) {
                if dims != src.dims {
                    return Err(Error::input(format!(
                        "layer {}: checkpoint dims {:?}, network dims {dims:?}",
                        layer.name, src.dims
                    )));
                }
                for (d, &s) in dst.iter_mut().zip(&src.data) {
                    *d = T::of(s as f64);
                }
            }
        }
        Ok(())
    }
}

fn unit_name(id: UnitId) -> String {
    match id.part {
        UnitPart::Main => format!("layer{}", id.layer),
        UnitPart::Body(i) => format!("layer{}.body{i}", id.layer),
        UnitPart::Shortcut => format!("layer{}.shortcut", id.layer),
    }
}

/// Builds the starting network of a search: every slot at `base_width`.
pub fn build_initial_model<T: Scalar, R: Rng + ?Sized>(
    spec: &ArchitectureSpec,
    base_width: usize,
    rng: &mut R,
) -> Result<NetworkInstance<T>> {
    if base_width < 2 || base_width % 2 != 0 {
        return Err(Error::input(format!("base width {base_width} must be even and at least 2")));
    }
    NetworkInstance::materialize(spec, &spec.uniform_schedule(base_width), rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::{fixtures, param_count};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn batch(n: usize, dims: [usize; 3], seed: u64) -> Tensor4<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor4::from_fn([n, dims[0], dims[1], dims[2]], |_| rng.random::<f64>() * 2.0 - 1.0)
    }

    #[test]
    fn tensor_count_matches_symbolic_count() {
        for name in fixtures::FIXTURE_NAMES {
            let spec = fixtures::by_name(name).unwrap();
            let sched = match *name {
                "resnet18-basic" => fixtures::published::resnet18_original(),
                _ => spec.uniform_schedule(8),
            };
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let net = NetworkInstance::<f32>::materialize(&spec, &sched, &mut rng).unwrap();
            assert_eq!(net.param_count(), param_count(&spec, &sched).unwrap(), "{name}");
        }
    }

    #[test]
    fn probabilities_sum_to_one() {
        let spec = fixtures::residual_toy();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = build_initial_model::<f64, _>(&spec, 4, &mut rng).unwrap();
        let p = net.forward(&batch(5, spec.input, 9)).unwrap();
        for row in p.chunks_exact(spec.classes) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_classifier_gives_uniform_probabilities() {
        let spec = fixtures::toy_3conv();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = build_initial_model::<f32, _>(&spec, 4, &mut rng).unwrap();
        for (role, p) in net.params_mut().into_iter().rev().take(2) {
            assert!(matches!(role, ParamRole::Weight | ParamRole::Bias));
            p.iter_mut().for_each(|v| *v = 0.0);
        }
        let p = net.forward(&batch(3, spec.input, 1).cast()).unwrap();
        assert!(p.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-6));
    }

    #[test]
    fn same_seed_same_weights() {
        let spec = fixtures::plain_cnn();
        let a = build_initial_model::<f32, _>(&spec, 8, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = build_initial_model::<f32, _>(&spec, 8, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
        let x = batch(2, spec.input, 2).cast::<f32>();
        let la: Vec<u32> = a.logits(&x).unwrap().iter().map(|v| v.to_bits()).collect();
        let lb: Vec<u32> = b.logits(&x).unwrap().iter().map(|v| v.to_bits()).collect();
        assert_eq!(la, lb);
    }

    #[test]
    fn odd_base_width_rejected() {
        let spec = fixtures::toy_3conv();
        assert!(build_initial_model::<f32, _>(&spec, 5, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
        let minimal = build_initial_model::<f32, _>(&spec, 2, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(minimal.schedule().widths(), &[2, 2, 2]);
    }

    #[test]
    fn wrong_image_size_is_shape_error() {
        let spec = fixtures::toy_3conv();
        let net = build_initial_model::<f64, _>(&spec, 4, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(matches!(net.logits(&batch(1, [7, 8, 3], 0)), Err(Error::Shape(_))));
    }

    #[test]
    fn checkpoint_round_trip_through_bytes() {
        let spec = fixtures::residual_toy();
        let net = build_initial_model::<f32, _>(&spec, 4, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let mut buf = Vec::new();
        crate::tensor::write_checkpoint(&mut buf, &net.to_checkpoint()).unwrap();
        let mut other = build_initial_model::<f32, _>(&spec, 4, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        other.load_checkpoint(&crate::tensor::read_checkpoint(&buf[..]).unwrap()).unwrap();
        assert_eq!(other, net);
        let mut wider = build_initial_model::<f32, _>(&spec, 6, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert!(wider.load_checkpoint(&net.to_checkpoint()).is_err());
    }

    #[test]
    fn label_out_of_range_is_input_error() {
        let spec = fixtures::toy_3conv();
        let mut net = build_initial_model::<f64, _>(&spec, 4, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let r = net.loss_and_gradients(&batch(2, spec.input, 0), &[0, 7], &mut ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(r, Err(Error::Input(_))));
    }
}
