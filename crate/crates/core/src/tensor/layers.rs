use serde::{Deserialize, Serialize};

use super::{Scalar, Tensor4};
use crate::error::{Error, Result};

pub const BN_EPSILON: f64 = 1e-5;
const BN_MOMENTUM: f64 = 0.1;

pub fn relu_inplace<T: Scalar>(t: &mut Tensor4<T>) {
    for v in t.data_mut() {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

/// Masks `grad` in place using the activations the ReLU produced.
pub fn relu_backward<T: Scalar>(activated: &Tensor4<T>, grad: &mut Tensor4<T>) {
    for (g, &a) in grad.data_mut().iter_mut().zip(activated.data()) {
        if a <= T::zero() {
            *g = T::zero();
        }
    }
}

#[derive(Clone, Debug)]
pub struct BatchNormCache<T> {
    normalized: Tensor4<T>,
    inv_std: Vec<T>,
}

fn check_bn_len(c: usize, lens: &[usize]) -> Result<()> {
    if lens.iter().any(|&l| l != c) {
        return Err(Error::shape(format!(
            "batch norm over {c} channels given parameters of length {lens:?}"
        )));
    }
    Ok(())
}

/// Inference-mode batch normalization with running statistics.
pub fn batch_norm_eval<T: Scalar>(
    input: &Tensor4<T>,
    gamma: &[T],
    beta: &[T],
    running_mean: &[T],
    running_var: &[T],
) -> Result<Tensor4<T>> {
    let c = input.dims()[3];
    check_bn_len(c, &[gamma.len(), beta.len(), running_mean.len(), running_var.len()])?;
    let eps = T::of(BN_EPSILON);
    let scale: Vec<T> = (0..c)
        .map(|ch| gamma[ch] / (running_var[ch] + eps).sqrt())
        .collect();
    let mut out = Tensor4::zeros(input.dims());
    for (o, xv) in out.data_mut().chunks_exact_mut(c).zip(input.data().chunks_exact(c)) {
        for ch in 0..c {
            o[ch] = (xv[ch] - running_mean[ch]) * scale[ch] + beta[ch];
        }
    }
    Ok(out)
}

/// Training-mode batch normalization over the batch and spatial axes.
/// Normalizes with batch statistics and folds them into the running
/// averages.
pub fn batch_norm_forward<T: Scalar>(
    input: &Tensor4<T>,
    gamma: &[T],
    beta: &[T],
    running_mean: &mut [T],
    running_var: &mut [T],
) -> Result<(Tensor4<T>, BatchNormCache<T>)> {
    let c = input.dims()[3];
    check_bn_len(c, &[gamma.len(), beta.len(), running_mean.len(), running_var.len()])?;
    let eps = T::of(BN_EPSILON);
    let x = input.data();
    let n = T::of((x.len() / c) as f64);
    let mut mean = vec![T::zero(); c];
    for row in x.chunks_exact(c) {
        for ch in 0..c {
            mean[ch] += row[ch];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![T::zero(); c];
    for row in x.chunks_exact(c) {
        for ch in 0..c {
            let d = row[ch] - mean[ch];
            var[ch] += d * d;
        }
    }
    var.iter_mut().for_each(|v| *v /= n);
    let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
    let mut out = Tensor4::zeros(input.dims());
    let mut normalized = Tensor4::zeros(input.dims());
    for ((o, xh), xv) in out
        .data_mut()
        .chunks_exact_mut(c)
        .zip(normalized.data_mut().chunks_exact_mut(c))
        .zip(x.chunks_exact(c))
    {
        for ch in 0..c {
            let z = (xv[ch] - mean[ch]) * inv_std[ch];
            xh[ch] = z;
            o[ch] = z * gamma[ch] + beta[ch];
        }
    }
    let m = T::of(BN_MOMENTUM);
    for ch in 0..c {
        running_mean[ch] = (T::one() - m) * running_mean[ch] + m * mean[ch];
        running_var[ch] = (T::one() - m) * running_var[ch] + m * var[ch];
    }
    Ok((out, BatchNormCache { normalized, inv_std }))
}

/// Returns `(grad_input, grad_gamma, grad_beta)` for a training-mode pass.
pub fn batch_norm_backward<T: Scalar>(
    cache: &BatchNormCache<T>,
    gamma: &[T],
    grad_out: &Tensor4<T>,
) -> (Tensor4<T>, Vec<T>, Vec<T>) {
    let c = gamma.len();
    let xh = cache.normalized.data();
    let dy = grad_out.data();
    let n = T::of((dy.len() / c) as f64);
    let mut dgamma = vec![T::zero(); c];
    let mut dbeta = vec![T::zero(); c];
    for (g, z) in dy.chunks_exact(c).zip(xh.chunks_exact(c)) {
        for ch in 0..c {
            dbeta[ch] += g[ch];
            dgamma[ch] += g[ch] * z[ch];
        }
    }
    let mut grad_in = Tensor4::zeros(grad_out.dims());
    for ((dx, g), z) in grad_in
        .data_mut()
        .chunks_exact_mut(c)
        .zip(dy.chunks_exact(c))
        .zip(xh.chunks_exact(c))
    {
        for ch in 0..c {
            let k = gamma[ch] * cache.inv_std[ch] / n;
            dx[ch] = k * (n * g[ch] - dbeta[ch] - z[ch] * dgamma[ch]);
        }
    }
    (grad_in, dgamma, dbeta)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolKind {
    Max,
    Avg,
}

/// 2x2 window, stride 2. Odd trailing rows and columns are dropped. For max
/// pooling the flat input offset of each winner is returned as well.
pub fn pool2x2<T: Scalar>(input: &Tensor4<T>, kind: PoolKind) -> Result<(Tensor4<T>, Vec<usize>)> {
    let [n, h, w, c] = input.dims();
    if h < 2 || w < 2 {
        return Err(Error::shape(format!("cannot pool a {h}x{w} map")));
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor4::zeros([n, oh, ow, c]);
    let mut argmax = Vec::new();
    if kind == PoolKind::Max {
        argmax.resize(out.len(), 0);
    }
    let quarter = T::of(0.25);
    let x = input.data();
    let y = out.data_mut();
    for b in 0..n {
        for oy in 0..oh {
            for ox in 0..ow {
                let o_off = ((b * oh + oy) * ow + ox) * c;
                for ch in 0..c {
                    let taps = [
                        ((b * h + 2 * oy) * w + 2 * ox) * c + ch,
                        ((b * h + 2 * oy) * w + 2 * ox + 1) * c + ch,
                        ((b * h + 2 * oy + 1) * w + 2 * ox) * c + ch,
                        ((b * h + 2 * oy + 1) * w + 2 * ox + 1) * c + ch,
                    ];
                    match kind {
                        PoolKind::Avg => {
                            y[o_off + ch] = taps.iter().map(|&t| x[t]).sum::<T>() * quarter;
                        }
                        PoolKind::Max => {
                            let mut best = taps[0];
                            for &t in &taps[1..] {
                                if x[t] > x[best] {
                                    best = t;
                                }
                            }
                            y[o_off + ch] = x[best];
                            argmax[o_off + ch] = best;
                        }
                    }
                }
            }
        }
    }
    Ok((out, argmax))
}

pub fn pool2x2_backward<T: Scalar>(
    input_dims: [usize; 4],
    kind: PoolKind,
    argmax: &[usize],
    grad_out: &Tensor4<T>,
) -> Tensor4<T> {
    let [n, h, w, c] = input_dims;
    let [_, oh, ow, _] = grad_out.dims();
    let mut grad_in = Tensor4::zeros(input_dims);
    let dy = grad_out.data();
    let dx = grad_in.data_mut();
    match kind {
        PoolKind::Max => {
            for (i, &src) in argmax.iter().enumerate() {
                dx[src] += dy[i];
            }
        }
        PoolKind::Avg => {
            let quarter = T::of(0.25);
            for b in 0..n {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let o_off = ((b * oh + oy) * ow + ox) * c;
                        for (dy_, dx_) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                            let i_off = ((b * h + 2 * oy + dy_) * w + 2 * ox + dx_) * c;
                            for ch in 0..c {
                                dx[i_off + ch] += dy[o_off + ch] * quarter;
                            }
                        }
                    }
                }
            }
        }
    }
    grad_in
}

pub fn global_avg_pool<T: Scalar>(input: &Tensor4<T>) -> Tensor4<T> {
    let [n, h, w, c] = input.dims();
    let mut out = Tensor4::zeros([n, 1, 1, c]);
    let inv = T::of(1.0 / (h * w) as f64);
    for (b, chunk) in input.data().chunks_exact(h * w * c).enumerate() {
        let o = &mut out.data_mut()[b * c..(b + 1) * c];
        for px in chunk.chunks_exact(c) {
            for ch in 0..c {
                o[ch] += px[ch];
            }
        }
        o.iter_mut().for_each(|v| *v *= inv);
    }
    out
}

pub fn global_avg_pool_backward<T: Scalar>(input_dims: [usize; 4], grad_out: &Tensor4<T>) -> Tensor4<T> {
    let [_, h, w, c] = input_dims;
    let inv = T::of(1.0 / (h * w) as f64);
    let mut grad_in = Tensor4::zeros(input_dims);
    let dy = grad_out.data();
    for (b, chunk) in grad_in.data_mut().chunks_exact_mut(h * w * c).enumerate() {
        for px in chunk.chunks_exact_mut(c) {
            for ch in 0..c {
                px[ch] = dy[b * c + ch] * inv;
            }
        }
    }
    grad_in
}

/// Fully connected layer on an `(n, 1, 1, in)` tensor with weights `(in, out)`.
pub fn dense_forward<T: Scalar>(
    input: &Tensor4<T>,
    weights: &[T],
    bias: &[T],
    out_features: usize,
) -> Result<Tensor4<T>> {
    let [n, h, w, fin] = input.dims();
    if h != 1 || w != 1 {
        return Err(Error::shape(format!("dense layer expects flat input, got {h}x{w} maps")));
    }
    if weights.len() != fin * out_features || bias.len() != out_features {
        return Err(Error::shape(format!(
            "dense weights sized for {} inputs, input has {fin}",
            weights.len() / out_features.max(1)
        )));
    }
    let mut out = Tensor4::zeros([n, 1, 1, out_features]);
    for (row_out, row_in) in out
        .data_mut()
        .chunks_exact_mut(out_features)
        .zip(input.data().chunks_exact(fin))
    {
        row_out.copy_from_slice(bias);
        for (i, &xv) in row_in.iter().enumerate() {
            let w_row = &weights[i * out_features..(i + 1) * out_features];
            for (o, &wv) in row_out.iter_mut().zip(w_row) {
                *o += xv * wv;
            }
        }
    }
    Ok(out)
}

/// Returns `(grad_input, grad_weights, grad_bias)`.
pub fn dense_backward<T: Scalar>(
    input: &Tensor4<T>,
    weights: &[T],
    grad_out: &Tensor4<T>,
) -> (Tensor4<T>, Vec<T>, Vec<T>) {
    let fin = input.dims()[3];
    let fout = grad_out.dims()[3];
    let mut grad_in = Tensor4::zeros(input.dims());
    let mut gw = vec![T::zero(); weights.len()];
    let mut gb = vec![T::zero(); fout];
    for ((g_row, x_row), dx_row) in grad_out
        .data()
        .chunks_exact(fout)
        .zip(input.data().chunks_exact(fin))
        .zip(grad_in.data_mut().chunks_exact_mut(fin))
    {
        for (b, &g) in gb.iter_mut().zip(g_row) {
            *b += g;
        }
        for i in 0..fin {
            let w_row = &weights[i * fout..(i + 1) * fout];
            let gw_row = &mut gw[i * fout..(i + 1) * fout];
            let mut acc = T::zero();
            for ((gwv, &wv), &g) in gw_row.iter_mut().zip(w_row).zip(g_row) {
                *gwv += x_row[i] * g;
                acc += wv * g;
            }
            dx_row[i] = acc;
        }
    }
    (grad_in, gw, gb)
}

/// Row-wise softmax of an `(n, classes)` logit matrix.
pub fn softmax_rows<T: Scalar>(logits: &[T], classes: usize) -> Vec<T> {
    let mut out = logits.to_vec();
    for row in out.chunks_exact_mut(classes) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    out
}

/// Mean cross-entropy of softmax(logits) against `labels`, and its gradient
/// with respect to the logits.
pub fn softmax_cross_entropy<T: Scalar>(
    logits: &[T],
    labels: &[usize],
    classes: usize,
) -> Result<(T, Vec<T>)> {
    if logits.len() != labels.len() * classes || labels.is_empty() {
        return Err(Error::shape(format!(
            "{} logits for {} labels of {classes} classes",
            logits.len(),
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::input(format!("label {bad} out of range for {classes} classes")));
    }
    let n = T::of(labels.len() as f64);
    let mut grad = softmax_rows(logits, classes);
    let mut loss = T::zero();
    for ((row, logit_row), &label) in grad
        .chunks_exact_mut(classes)
        .zip(logits.chunks_exact(classes))
        .zip(labels)
    {
        let max = logit_row.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = max + logit_row.iter().map(|&v| (v - max).exp()).sum::<T>().ln();
        loss += lse - logit_row[label];
        row[label] -= T::one();
        row.iter_mut().for_each(|v| *v /= n);
    }
    Ok((loss / n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_log_class_count() {
        let logits = vec![0.0f64; 8];
        let (loss, _) = softmax_cross_entropy(&logits, &[0, 3], 4).unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn confident_correct_prediction_has_near_zero_loss() {
        let logits = vec![60.0f64, 0.0, 0.0];
        let (loss, _) = softmax_cross_entropy(&logits, &[0], 3).unwrap();
        assert!(loss < 1e-20);
    }

    #[test]
    fn out_of_range_label_is_input_error() {
        let logits = vec![0.0f32; 3];
        assert!(matches!(
            softmax_cross_entropy(&logits, &[3], 3),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn softmax_handles_large_logits() {
        let p = softmax_rows(&[1000.0f32, 999.0, -1000.0], 3);
        let s: f32 = p.iter().sum();
        assert!((s - 1.0).abs() < 1e-6);
        assert!(p.iter().all(|v| v.is_finite() && *v >= 0.0));
    }

    #[test]
    fn eval_mode_batch_norm_uses_running_statistics() {
        let x = Tensor4::new([1, 1, 2, 1], vec![1.0f64, 3.0]).unwrap();
        let y = batch_norm_eval(&x, &[2.0], &[0.5], &[1.0], &[4.0 - BN_EPSILON]).unwrap();
        assert!((y.data()[0] - 0.5).abs() < 1e-12);
        assert!((y.data()[1] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn max_pool_picks_window_maximum() {
        let x = Tensor4::new([1, 2, 2, 1], vec![1.0f32, 5.0, -2.0, 3.0]).unwrap();
        let (y, arg) = pool2x2(&x, PoolKind::Max).unwrap();
        assert_eq!(y.data(), &[5.0]);
        assert_eq!(arg, vec![1]);
        let (y, _) = pool2x2(&x, PoolKind::Avg).unwrap();
        assert_eq!(y.data(), &[1.75]);
    }
}
