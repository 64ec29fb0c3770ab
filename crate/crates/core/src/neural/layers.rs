//! Dense and convolutional primitives on `f64` arrays.
//!
//! Feature maps are `(channels, height, width)`. Convolution weights are
//! stored flattened as `(out, in·k·k)`, transposed-convolution weights as
//! `(out·k·k, in)`, so both reduce to one matrix product plus a gather or
//! scatter.

use ndarray::{Array1, Array2, Array3, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

pub const LEAKY_SLOPE: f64 = 0.2;

pub fn leaky_relu(v: f64) -> f64 {
    if v >= 0.0 {
        v
    } else {
        LEAKY_SLOPE * v
    }
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub fn softmax(logits: &Array1<f64>) -> Array1<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp = logits.mapv(|v| (v - max).exp());
    let sum = exp.sum();
    exp / sum
}

pub fn dense(w: ArrayView2<f64>, b: ArrayView1<f64>, x: ArrayView1<f64>) -> Result<Array1<f64>> {
    if w.ncols() != x.len() || w.nrows() != b.len() {
        return Err(Error::Shape(format!(
            "dense layer {:?} with bias {} applied to {}",
            w.dim(),
            b.len(),
            x.len()
        )));
    }
    Ok(w.dot(&x) + b)
}

fn out_size(n: usize, k: usize, stride: usize, pad: usize) -> Result<usize> {
    if n + 2 * pad < k {
        return Err(Error::Shape(format!("input of size {n} is smaller than the {k}-wide kernel")));
    }
    Ok((n + 2 * pad - k) / stride + 1)
}

pub fn conv2d(
    x: &Array3<f64>,
    w: ArrayView2<f64>,
    b: ArrayView1<f64>,
    k: usize,
    stride: usize,
    pad: usize,
) -> Result<Array3<f64>> {
    let (c, h, wd) = x.dim();
    if w.ncols() != c * k * k || w.nrows() != b.len() {
        return Err(Error::Shape(format!(
            "conv weight {:?} does not fit {c} input channels with a {k}x{k} kernel",
            w.dim()
        )));
    }
    let (oh, ow) = (out_size(h, k, stride, pad)?, out_size(wd, k, stride, pad)?);
    let mut cols = Array2::zeros((c * k * k, oh * ow));
    for ci in 0..c {
        for ki in 0..k {
            for kj in 0..k {
                let row = (ci * k + ki) * k + kj;
                for oi in 0..oh {
                    let ii = (oi * stride + ki) as isize - pad as isize;
                    if ii < 0 || ii >= h as isize {
                        continue;
                    }
                    for oj in 0..ow {
                        let jj = (oj * stride + kj) as isize - pad as isize;
                        if jj >= 0 && jj < wd as isize {
                            cols[[row, oi * ow + oj]] = x[[ci, ii as usize, jj as usize]];
                        }
                    }
                }
            }
        }
    }
    let mut out = w.dot(&cols);
    out += &b.insert_axis(Axis(1));
    Ok(out
        .into_shape_with_order((w.nrows(), oh, ow))
        .expect("conv output size"))
}

pub fn conv_transpose2d(
    x: &Array3<f64>,
    w: ArrayView2<f64>,
    b: ArrayView1<f64>,
    k: usize,
    stride: usize,
    pad: usize,
) -> Result<Array3<f64>> {
    let (c, h, wd) = x.dim();
    let out_c = b.len();
    if w.ncols() != c || w.nrows() != out_c * k * k {
        return Err(Error::Shape(format!(
            "transposed conv weight {:?} does not fit {c} -> {out_c} channels",
            w.dim()
        )));
    }
    let (oh, ow) = ((h - 1) * stride + k - 2 * pad, (wd - 1) * stride + k - 2 * pad);
    let flat = x
        .to_owned()
        .into_shape_with_order((c, h * wd))
        .expect("contiguous input");
    let cols = w.dot(&flat);
    let mut out = Array3::zeros((out_c, oh, ow));
    for o in 0..out_c {
        for ki in 0..k {
            for kj in 0..k {
                let row = cols.row((o * k + ki) * k + kj);
                for i in 0..h {
                    let oi = (i * stride + ki) as isize - pad as isize;
                    if oi < 0 || oi >= oh as isize {
                        continue;
                    }
                    for j in 0..wd {
                        let oj = (j * stride + kj) as isize - pad as isize;
                        if oj >= 0 && oj < ow as isize {
                            out[[o, oi as usize, oj as usize]] += row[i * wd + j];
                        }
                    }
                }
            }
        }
        out.index_axis_mut(Axis(0), o).mapv_inplace(|v| v + b[o]);
    }
    Ok(out)
}

/// Mean over the spatial axes, one value per channel.
pub fn global_average(x: &Array3<f64>) -> Array1<f64> {
    let (c, h, w) = x.dim();
    x.to_owned()
        .into_shape_with_order((c, h * w))
        .expect("contiguous")
        .mean_axis(Axis(1))
        .expect("non-empty map")
}
