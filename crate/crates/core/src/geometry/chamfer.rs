use kiddo::immutable::float::kdtree::ImmutableKdTree;
use kiddo::SquaredEuclidean;
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cloud::PointCloud;
use crate::error::{Error, Result};

type Tree = ImmutableKdTree<f64, u64, 3, 32>;

fn build_tree(cloud: &PointCloud) -> Tree {
    let coords: Vec<[f64; 3]> = cloud.points.iter().map(|p| [p.x, p.y, p.z]).collect();
    Tree::new_from_slice(&coords)
}

/// Mean distance from each point of `from` to its nearest neighbor in `tree`.
fn directed_mean(from: &PointCloud, tree: &Tree) -> f64 {
    let total: f64 = from
        .points
        .iter()
        .map(|p| tree.nearest_one::<SquaredEuclidean>(&[p.x, p.y, p.z]).distance.sqrt())
        .sum();
    total / from.len() as f64
}

/// Symmetrized Chamfer distance: the average of the two directed mean
/// nearest-neighbor distances.
pub fn chamfer(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("chamfer needs non-empty clouds"));
    }
    let (ta, tb) = (build_tree(a), build_tree(b));
    Ok(chamfer_with_trees(a, &ta, b, &tb))
}

fn chamfer_with_trees(a: &PointCloud, ta: &Tree, b: &PointCloud, tb: &Tree) -> f64 {
    0.5 * (directed_mean(a, tb) + directed_mean(b, ta))
}

/// Symmetric Chamfer distances scaled into `[0, 1]`; zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix(pub Array2<f64>);

impl DistanceMatrix {
    pub fn len(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.nrows() == 0
    }

    /// Builds from a raw symmetric matrix, dividing by the largest
    /// off-diagonal entry. An all-zero matrix is left as is.
    pub fn normalized(mut raw: Array2<f64>) -> Result<Self> {
        let n = raw.nrows();
        if raw.ncols() != n {
            return Err(Error::Shape(format!("distance matrix is {:?}", raw.dim())));
        }
        for i in 0..n {
            raw[[i, i]] = 0.0;
        }
        let max = raw.iter().copied().fold(0.0, f64::max);
        if max > 0.0 {
            raw.mapv_inplace(|v| v / max);
        }
        Ok(Self(raw))
    }

    /// Upper-triangle entries in row-major order.
    pub fn off_diagonal(&self) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| self.0[[i, j]])
            .collect()
    }
}

pub fn pairwise_chamfer(clouds: &[PointCloud]) -> Result<DistanceMatrix> {
    if clouds.len() < 2 {
        return Err(Error::invalid("pairwise chamfer needs at least two clouds"));
    }
    if clouds.iter().any(PointCloud::is_empty) {
        return Err(Error::Empty("pairwise chamfer got an empty cloud"));
    }
    let trees: Vec<Tree> = clouds.par_iter().map(build_tree).collect();
    let n = clouds.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| chamfer_with_trees(&clouds[i], &trees[i], &clouds[j], &trees[j]))
        .collect();
    let mut raw = Array2::zeros((n, n));
    for (&(i, j), &d) in pairs.iter().zip(&values) {
        raw[[i, j]] = d;
        raw[[j, i]] = d;
    }
    DistanceMatrix::normalized(raw)
}
