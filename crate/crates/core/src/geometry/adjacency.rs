use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::chamfer::DistanceMatrix;
use crate::error::{Error, Result};

pub const DEFAULT_PERCENTILE: f64 = 25.0;
pub const DEFAULT_SPARSITY_EPS: f64 = 1e-5;

/// Symmetric edge weights in `[0, 1]` with a unit diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjacencyMatrix(pub Array2<f64>);

impl AdjacencyMatrix {
    pub fn len(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.nrows() == 0
    }

    /// Undirected edges `(i, j)` with `i < j` and non-zero weight.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.len();
        (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.0[[i, j]] > 0.0)
            .collect()
    }
}

/// Nearest-rank percentile of `values`; `None` when empty.
pub fn nearest_rank(values: &[f64], percentile: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((percentile / 100.0) * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    Some(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    })
}

/// Kernel bandwidth: the given percentile of the off-diagonal distances.
pub fn rbf_bandwidth(d: &DistanceMatrix, percentile: f64) -> Result<f64> {
    if !(percentile > 0.0 && percentile <= 100.0) {
        return Err(Error::invalid(format!("percentile {percentile} not in (0, 100]")));
    }
    Ok(nearest_rank(&d.off_diagonal(), percentile).unwrap_or(0.0))
}

/// `w_ij = exp(-D_ij / σ²)` with σ the `percentile`-th off-diagonal
/// distance. With σ = 0 only zero distances keep an edge (weight 1).
pub fn rbf_adjacency(d: &DistanceMatrix, percentile: f64) -> Result<AdjacencyMatrix> {
    let sigma = rbf_bandwidth(d, percentile)?;
    let s2 = sigma * sigma;
    let weights = d.0.mapv(|v| {
        if v == 0.0 {
            1.0
        } else if s2 > 0.0 {
            (-v / s2).exp()
        } else {
            0.0
        }
    });
    Ok(AdjacencyMatrix(weights))
}

/// The two unweighted graphs of the multiscale variant: edges with
/// distance at most the off-diagonal median, and at most the maximum.
pub fn multiscale_adjacency(d: &DistanceMatrix) -> (AdjacencyMatrix, AdjacencyMatrix) {
    let off = d.off_diagonal();
    let threshold = |t: Option<f64>| {
        let t = t.unwrap_or(0.0);
        AdjacencyMatrix(d.0.mapv(|v| if v <= t { 1.0 } else { 0.0 }))
    };
    let fine = threshold(median(&off));
    let coarse = threshold(off.iter().copied().reduce(f64::max));
    (fine, coarse)
}

/// Fraction of off-diagonal weights strictly below `eps`.
pub fn sparsity(a: &AdjacencyMatrix, eps: f64) -> f64 {
    let n = a.len();
    if n < 2 {
        return 0.0;
    }
    let below = a
        .0
        .indexed_iter()
        .filter(|((i, j), &w)| i != j && w < eps)
        .count();
    below as f64 / (n * (n - 1)) as f64
}
