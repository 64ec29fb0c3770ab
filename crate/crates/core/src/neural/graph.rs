use ndarray::{concatenate, s, Array1, Array2, ArrayView1, Axis};

use super::layers::{dense, leaky_relu, sigmoid};
use super::{NetParams, EMBED_DIM, HEADS, HEAD_DIM, POOLED_DIM};
use crate::error::{Error, Result};
use crate::scenegraph::{SceneGraph, FEATURE_DIM};

fn check_graph(features: &Array2<f64>, adjacency: &Array2<f64>) -> Result<()> {
    let n = features.nrows();
    if n == 0 {
        return Err(Error::Empty("graph has no nodes"));
    }
    if features.ncols() != FEATURE_DIM {
        return Err(Error::Shape(format!(
            "node features are {}-dimensional, expected {FEATURE_DIM}",
            features.ncols()
        )));
    }
    if adjacency.dim() != (n, n) {
        return Err(Error::Shape(format!(
            "adjacency {:?} for {n} nodes",
            adjacency.dim()
        )));
    }
    Ok(())
}

/// Multi-head graph attention. Node `i` attends over itself and every `j`
/// with positive edge weight; the attention logit is
/// `LeakyReLU(a_srcᵀz_i + a_dstᵀz_j) + ln w_ij`, with the self term using
/// weight 1. Heads are concatenated without an output activation.
pub fn gat_forward(
    features: &Array2<f64>,
    adjacency: &Array2<f64>,
    params: &NetParams,
) -> Result<Array2<f64>> {
    check_graph(features, adjacency)?;
    let n = features.nrows();
    let mut out = Array2::zeros((n, HEADS * HEAD_DIM));
    for h in 0..HEADS {
        let w = params.matrix(&format!("gat.h{h}.w"))?;
        let a_src = params.vector(&format!("gat.h{h}.a_src"))?;
        let a_dst = params.vector(&format!("gat.h{h}.a_dst"))?;
        let z = features.dot(&w.t());
        let src = z.dot(&a_src);
        let dst = z.dot(&a_dst);
        for i in 0..n {
            let neighbours: Vec<(usize, f64)> = (0..n)
                .filter_map(|j| {
                    let weight = if i == j { 1.0 } else { adjacency[[i, j]] };
                    (weight > 0.0).then(|| (j, leaky_relu(src[i] + dst[j]) + weight.ln()))
                })
                .collect();
            let max = neighbours.iter().map(|&(_, e)| e).fold(f64::NEG_INFINITY, f64::max);
            let exp: Vec<f64> = neighbours.iter().map(|&(_, e)| (e - max).exp()).collect();
            let total: f64 = exp.iter().sum();
            let mut acc = out.slice_mut(s![i, h * HEAD_DIM..(h + 1) * HEAD_DIM]);
            for (&(j, _), e) in neighbours.iter().zip(&exp) {
                acc.scaled_add(e / total, &z.row(j));
            }
        }
    }
    Ok(out)
}

/// Edge convolution: every edge `(i, j)` with positive weight, `j ≠ i`,
/// produces `LeakyReLU(W [x_i, x_j − x_i] + b)` and node `i` keeps the
/// element-wise maximum. A node without edges uses the self edge.
pub fn edgeconv_forward(
    features: &Array2<f64>,
    adjacency: &Array2<f64>,
    params: &NetParams,
) -> Result<Array2<f64>> {
    check_graph(features, adjacency)?;
    let n = features.nrows();
    let w = params.matrix("edge.w")?;
    let b = params.vector("edge.b")?;
    if w.dim() != (FEATURE_DIM, 2 * FEATURE_DIM) {
        return Err(Error::Shape(format!("edge weight has shape {:?}", w.dim())));
    }
    // W [x_i, x_j - x_i] = (W_a - W_b) x_i + W_b x_j
    let (wa, wb) = (w.slice(s![.., ..FEATURE_DIM]), w.slice(s![.., FEATURE_DIM..]));
    let own = features.dot(&(&wa - &wb).t());
    let other = features.dot(&wb.t());
    let mut out = Array2::from_elem((n, FEATURE_DIM), f64::NEG_INFINITY);
    for i in 0..n {
        let mut edges: Vec<usize> = (0..n).filter(|&j| j != i && adjacency[[i, j]] > 0.0).collect();
        if edges.is_empty() {
            edges.push(i);
        }
        let mut row = out.row_mut(i);
        for j in edges {
            for c in 0..FEATURE_DIM {
                let v = leaky_relu(own[[i, c]] + other[[j, c]] + b[c]);
                if v > row[c] {
                    row[c] = v;
                }
            }
        }
    }
    Ok(out)
}

/// Concatenated global max and mean over nodes.
pub fn pool(features: &Array2<f64>) -> Result<Array1<f64>> {
    if features.nrows() == 0 {
        return Err(Error::Empty("graph has no nodes"));
    }
    let max = features.fold_axis(Axis(0), f64::NEG_INFINITY, |a, &b| a.max(b));
    let mean = features.mean_axis(Axis(0)).expect("non-empty");
    Ok(concatenate![Axis(0), max, mean])
}

/// Graph embedding `ζ`: attention, then edge convolution, then pooling.
pub fn embed_graph(graph: &SceneGraph, params: &NetParams) -> Result<Array1<f64>> {
    let features = graph.features();
    let adjacency = &graph.adjacency.0;
    let attended = gat_forward(&features, adjacency, params)?;
    pool(&edgeconv_forward(&attended, adjacency, params)?)
}

fn gate(
    params: &NetParams,
    name: &str,
    x: ArrayView1<f64>,
    h: ArrayView1<f64>,
) -> Result<(Array1<f64>, Array1<f64>)> {
    let i = dense(params.matrix(&format!("gru.i{name}.w"))?, params.vector(&format!("gru.i{name}.b"))?, x)?;
    let r = dense(params.matrix(&format!("gru.h{name}.w"))?, params.vector(&format!("gru.h{name}.b"))?, h)?;
    Ok((i, r))
}

/// Runs the GRU for `n + 1` steps on the projected `ζ` (the same input every
/// step, zero initial state) and returns the unit-normalized hidden states
/// as rows. A zero state normalizes to the first basis vector.
pub fn gru_rollout(zeta: &Array1<f64>, n: usize, params: &NetParams) -> Result<Array2<f64>> {
    if n == 0 {
        return Err(Error::invalid("rollout needs at least one source"));
    }
    if zeta.len() != POOLED_DIM {
        return Err(Error::Shape(format!("graph embedding has {} entries", zeta.len())));
    }
    let x = dense(params.matrix("gru.proj.w")?, params.vector("gru.proj.b")?, zeta.view())?;
    let mut h = Array1::<f64>::zeros(EMBED_DIM);
    let mut out = Array2::zeros((n + 1, EMBED_DIM));
    for step in 0..=n {
        let (ir, hr) = gate(params, "r", x.view(), h.view())?;
        let (iz, hz) = gate(params, "z", x.view(), h.view())?;
        let (inn, hn) = gate(params, "n", x.view(), h.view())?;
        let r = (ir + hr).mapv(sigmoid);
        let z = (iz + hz).mapv(sigmoid);
        let cand = (inn + &r * &hn).mapv(f64::tanh);
        h = (1.0 - &z) * &cand + &z * &h;
        let norm = h.dot(&h).sqrt();
        let mut row = out.row_mut(step);
        if norm > 0.0 {
            row.assign(&(&h / norm));
        } else {
            row[0] = 1.0;
        }
    }
    Ok(out)
}
