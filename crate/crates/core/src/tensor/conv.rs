use super::{Scalar, Tensor4};
use crate::error::{Error, Result};

/// Output extent of a strided, zero-padded window along one axis.
pub fn conv_output_dim(input: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = input + 2 * padding;
    if stride == 0 || padded < kernel {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

fn output_dims<T: Scalar>(
    input: &Tensor4<T>,
    weights: &Tensor4<T>,
    stride: usize,
    padding: usize,
) -> Result<[usize; 4]> {
    let [n, h, w, c] = input.dims();
    let [kh, kw, wc, f] = weights.dims();
    if wc != c {
        return Err(Error::shape(format!(
            "kernel expects {wc} input channels, input has {c}"
        )));
    }
    if stride == 0 {
        return Err(Error::input("stride must be at least 1"));
    }
    let oh = conv_output_dim(h, kh, stride, padding)
        .ok_or_else(|| Error::shape(format!("kernel height {kh} exceeds padded input {h}")))?;
    let ow = conv_output_dim(w, kw, stride, padding)
        .ok_or_else(|| Error::shape(format!("kernel width {kw} exceeds padded input {w}")))?;
    Ok([n, oh, ow, f])
}

/// 2-D cross-correlation of an NHWC batch with a `(k1, k2, c, f)` kernel.
pub fn conv2d_forward<T: Scalar>(
    input: &Tensor4<T>,
    weights: &Tensor4<T>,
    stride: usize,
    padding: usize,
) -> Result<Tensor4<T>> {
    let out_dims = output_dims(input, weights, stride, padding)?;
    input.check_finite("conv input")?;
    weights.check_finite("conv weights")?;
    let [n, h, w, c] = input.dims();
    let [kh, kw, _, f] = weights.dims();
    let [_, oh, ow, _] = out_dims;
    let mut out = Tensor4::zeros(out_dims);
    let x = input.data();
    let wt = weights.data();
    let y = out.data_mut();
    for b in 0..n {
        for oy in 0..oh {
            for ox in 0..ow {
                let o_off = ((b * oh + oy) * ow + ox) * f;
                let o_row = &mut y[o_off..o_off + f];
                for ky in 0..kh {
                    let iy = (oy * stride + ky) as isize - padding as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..kw {
                        let ix = (ox * stride + kx) as isize - padding as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let i_off = ((b * h + iy as usize) * w + ix as usize) * c;
                        let w_base = (ky * kw + kx) * c * f;
                        for ci in 0..c {
                            let xv = x[i_off + ci];
                            if xv == T::zero() {
                                continue;
                            }
                            let w_row = &wt[w_base + ci * f..w_base + (ci + 1) * f];
                            for (o, &wv) in o_row.iter_mut().zip(w_row) {
                                *o += xv * wv;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Gradients of [`conv2d_forward`] with respect to its input and kernel.
pub fn conv2d_backward<T: Scalar>(
    input: &Tensor4<T>,
    weights: &Tensor4<T>,
    grad_out: &Tensor4<T>,
    stride: usize,
    padding: usize,
) -> Result<(Tensor4<T>, Tensor4<T>)> {
    let out_dims = output_dims(input, weights, stride, padding)?;
    if grad_out.dims() != out_dims {
        return Err(Error::shape(format!(
            "upstream gradient {:?} does not match conv output {out_dims:?}",
            grad_out.dims()
        )));
    }
    let [n, h, w, c] = input.dims();
    let [kh, kw, _, f] = weights.dims();
    let [_, oh, ow, _] = out_dims;
    let mut grad_in = Tensor4::zeros(input.dims());
    let mut grad_w = Tensor4::zeros(weights.dims());
    let x = input.data();
    let wt = weights.data();
    let dy = grad_out.data();
    let dx = grad_in.data_mut();
    let dw = grad_w.data_mut();
    for b in 0..n {
        for oy in 0..oh {
            for ox in 0..ow {
                let o_off = ((b * oh + oy) * ow + ox) * f;
                let g_row = &dy[o_off..o_off + f];
                for ky in 0..kh {
                    let iy = (oy * stride + ky) as isize - padding as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..kw {
                        let ix = (ox * stride + kx) as isize - padding as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let i_off = ((b * h + iy as usize) * w + ix as usize) * c;
                        let w_base = (ky * kw + kx) * c * f;
                        for ci in 0..c {
                            let xv = x[i_off + ci];
                            let w_row = &wt[w_base + ci * f..w_base + (ci + 1) * f];
                            let dw_row = &mut dw[w_base + ci * f..w_base + (ci + 1) * f];
                            let mut acc = T::zero();
                            for ((dwv, &wv), &gv) in dw_row.iter_mut().zip(w_row).zip(g_row) {
                                *dwv += xv * gv;
                                acc += wv * gv;
                            }
                            dx[i_off + ci] += acc;
                        }
                    }
                }
            }
        }
    }
    Ok((grad_in, grad_w))
}
