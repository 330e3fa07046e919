//! Dense and convolutional primitives with hand-written backward passes.
//!
//! Every forward function is paired with a `*_backward` that takes the
//! upstream gradient and returns gradients for each differentiable input.

use rand::Rng;

use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

pub struct AffineGrads<T: Scalar> {
    pub dx: Tensor<T>,
    pub dw: Tensor<T>,
    pub db: Tensor<T>,
}

/// `out[l,k] = sum_h x[l,h] * w[h,k] + b[k]`.
pub fn matmul_affine<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (rows, inner) = x.dims2("matmul_affine")?;
    let (w_in, out_dim) = w.dims2("matmul_affine")?;
    if inner != w_in {
        return Err(Error::ShapeMismatch {
            op: "matmul_affine",
            left: x.shape().to_vec(),
            right: w.shape().to_vec(),
        });
    }
    if b.shape() != [out_dim] {
        return Err(Error::ShapeMismatch {
            op: "matmul_affine bias",
            left: w.shape().to_vec(),
            right: b.shape().to_vec(),
        });
    }
    let mut out = Tensor::zeros(&[rows, out_dim]);
    let wd = w.data();
    for l in 0..rows {
        let xr = x.row(l);
        let orow = out.row_mut(l);
        orow.copy_from_slice(b.data());
        for (h, &xv) in xr.iter().enumerate() {
            if xv == T::ZERO {
                continue;
            }
            let wr = &wd[h * out_dim..(h + 1) * out_dim];
            for (o, &wv) in orow.iter_mut().zip(wr) {
                *o += xv * wv;
            }
        }
    }
    Ok(out)
}

pub fn matmul_affine_backward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    dout: &Tensor<T>,
) -> Result<AffineGrads<T>> {
    let (rows, inner) = x.dims2("matmul_affine_backward")?;
    let (_, out_dim) = w.dims2("matmul_affine_backward")?;
    if dout.shape() != [rows, out_dim] {
        return Err(Error::ShapeMismatch {
            op: "matmul_affine_backward",
            left: vec![rows, out_dim],
            right: dout.shape().to_vec(),
        });
    }
    let mut dx = Tensor::zeros(&[rows, inner]);
    let mut dw = Tensor::zeros(&[inner, out_dim]);
    let mut db = Tensor::zeros(&[out_dim]);
    let wd = w.data();
    for l in 0..rows {
        let g = dout.row(l);
        for (d, &gv) in db.data_mut().iter_mut().zip(g) {
            *d += gv;
        }
        let xr = x.row(l);
        let dxr = dx.row_mut(l);
        for h in 0..inner {
            let wr = &wd[h * out_dim..(h + 1) * out_dim];
            let mut acc = T::ZERO;
            for (&wv, &gv) in wr.iter().zip(g) {
                acc += wv * gv;
            }
            dxr[h] = acc;
        }
        let dwd = dw.data_mut();
        for (h, &xv) in xr.iter().enumerate() {
            if xv == T::ZERO {
                continue;
            }
            let dwr = &mut dwd[h * out_dim..(h + 1) * out_dim];
            for (d, &gv) in dwr.iter_mut().zip(g) {
                *d += xv * gv;
            }
        }
    }
    Ok(AffineGrads { dx, dw, db })
}

/// Left zero padding for a "same" convolution of the given width.
pub fn same_padding_left(width: usize) -> usize {
    (width - 1) / 2
}

fn conv_dims<T: Scalar>(x: &Tensor<T>, kernel: &Tensor<T>) -> Result<(usize, usize, usize, usize)> {
    let (len, hidden) = x.dims2("conv1d")?;
    let [width, k_hidden, filters] = kernel.shape()[..] else {
        return Err(Error::ShapeMismatch {
            op: "conv1d kernel",
            left: x.shape().to_vec(),
            right: kernel.shape().to_vec(),
        });
    };
    if width < 1 {
        return Err(Error::InvalidConfig {
            field: "kernel width",
            reason: "must be >= 1".into(),
        });
    }
    if k_hidden != hidden {
        return Err(Error::ShapeMismatch {
            op: "conv1d",
            left: x.shape().to_vec(),
            right: kernel.shape().to_vec(),
        });
    }
    Ok((len, hidden, width, filters))
}

/// Same-padded 1-D cross-correlation over the sequence axis.
///
/// `x` is `L x H`, `kernel` is `w x H x F`, `bias` is `F`; the output is
/// `L x F` with `floor((w-1)/2)` zeros on the left and `ceil((w-1)/2)` on
/// the right.
pub fn conv1d<T: Scalar>(x: &Tensor<T>, kernel: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let (len, hidden, width, filters) = conv_dims(x, kernel)?;
    if bias.shape() != [filters] {
        return Err(Error::ShapeMismatch {
            op: "conv1d bias",
            left: kernel.shape().to_vec(),
            right: bias.shape().to_vec(),
        });
    }
    let pad = same_padding_left(width);
    let kd = kernel.data();
    let mut out = Tensor::zeros(&[len, filters]);
    for l in 0..len {
        let orow = out.row_mut(l);
        orow.copy_from_slice(bias.data());
        for i in 0..width {
            let Some(src) = (l + i).checked_sub(pad).filter(|&s| s < len) else {
                continue;
            };
            let xr = x.row(src);
            let kslab = &kd[i * hidden * filters..(i + 1) * hidden * filters];
            for (h, &xv) in xr.iter().enumerate() {
                if xv == T::ZERO {
                    continue;
                }
                let kr = &kslab[h * filters..(h + 1) * filters];
                for (o, &kv) in orow.iter_mut().zip(kr) {
                    *o += xv * kv;
                }
            }
        }
    }
    Ok(out)
}

pub struct Conv1dGrads<T: Scalar> {
    pub dx: Tensor<T>,
    pub dkernel: Tensor<T>,
    pub dbias: Tensor<T>,
}

pub fn conv1d_backward<T: Scalar>(
    x: &Tensor<T>,
    kernel: &Tensor<T>,
    dout: &Tensor<T>,
) -> Result<Conv1dGrads<T>> {
    let (len, hidden, width, filters) = conv_dims(x, kernel)?;
    if dout.shape() != [len, filters] {
        return Err(Error::ShapeMismatch {
            op: "conv1d_backward",
            left: vec![len, filters],
            right: dout.shape().to_vec(),
        });
    }
    let pad = same_padding_left(width);
    let kd = kernel.data();
    let mut dx = Tensor::zeros(&[len, hidden]);
    let mut dkernel = Tensor::zeros(kernel.shape());
    let mut dbias = Tensor::zeros(&[filters]);
    for l in 0..len {
        let g = dout.row(l);
        for (d, &gv) in dbias.data_mut().iter_mut().zip(g) {
            *d += gv;
        }
        for i in 0..width {
            let Some(src) = (l + i).checked_sub(pad).filter(|&s| s < len) else {
                continue;
            };
            let base = i * hidden * filters;
            let xr = x.row(src);
            for h in 0..hidden {
                let off = base + h * filters;
                let kr = &kd[off..off + filters];
                let mut acc = T::ZERO;
                for (&kv, &gv) in kr.iter().zip(g) {
                    acc += kv * gv;
                }
                dx.row_mut(src)[h] += acc;
                let xv = xr[h];
                if xv != T::ZERO {
                    let dkr = &mut dkernel.data_mut()[off..off + filters];
                    for (d, &gv) in dkr.iter_mut().zip(g) {
                        *d += xv * gv;
                    }
                }
            }
        }
    }
    Ok(Conv1dGrads { dx, dkernel, dbias })
}

pub fn relu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let mut out = x.clone();
    out.data_mut().iter_mut().for_each(|v| {
        if *v < T::ZERO {
            *v = T::ZERO
        }
    });
    out
}

/// Gradient of ReLU given its output (positive output ⇔ active unit).
pub fn relu_backward<T: Scalar>(out: &Tensor<T>, dout: &Tensor<T>) -> Tensor<T> {
    let mut dx = dout.clone();
    for (d, &o) in dx.data_mut().iter_mut().zip(out.data()) {
        if o <= T::ZERO {
            *d = T::ZERO;
        }
    }
    dx
}

/// Column-wise max over the first `rows` rows of an `L x K` tensor.
/// Returns the pooled `K` vector and the winning row per column (first on ties).
pub fn max_over_rows<T: Scalar>(x: &Tensor<T>, rows: usize) -> Result<(Tensor<T>, Vec<usize>)> {
    let (len, cols) = x.dims2("max_over_rows")?;
    if rows == 0 || rows > len {
        return Err(Error::IndexOutOfRange {
            what: "pooling rows",
            index: rows,
            len,
        });
    }
    let mut pooled = Tensor::from_vec(&[cols], x.row(0).to_vec())?;
    let mut arg = vec![0usize; cols];
    for l in 1..rows {
        for ((p, a), &v) in pooled.data_mut().iter_mut().zip(arg.iter_mut()).zip(x.row(l)) {
            if v > *p {
                *p = v;
                *a = l;
            }
        }
    }
    Ok((pooled, arg))
}

pub fn max_over_rows_backward<T: Scalar>(
    len: usize,
    argmax: &[usize],
    dpooled: &Tensor<T>,
) -> Tensor<T> {
    let cols = argmax.len();
    let mut dx = Tensor::zeros(&[len, cols]);
    let d = dx.data_mut();
    for (c, (&row, &g)) in argmax.iter().zip(dpooled.data()).enumerate() {
        d[row * cols + c] += g;
    }
    dx
}

/// Inverted-dropout mask: each entry is `1/keep_prob` with probability
/// `keep_prob`, else 0. Multiplying activations by it preserves their
/// expectation.
pub fn dropout_mask<T: Scalar, R: Rng + ?Sized>(shape: &[usize], keep_prob: f64, rng: &mut R) -> Tensor<T> {
    let n: usize = shape.iter().product();
    let scale = T::from_f64(1.0 / keep_prob);
    let data = (0..n)
        .map(|_| {
            if rng.random::<f64>() < keep_prob {
                scale
            } else {
                T::ZERO
            }
        })
        .collect();
    Tensor::from_vec(shape, data).expect("mask shape")
}

pub fn mul_elementwise<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    a.check_same_shape("mul_elementwise", b)?;
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| x * y).collect();
    Tensor::from_vec(a.shape(), data)
}
