//! Similarity-transform ICP used to rectify frames within a window.
//!
//! Each iteration pairs every source point with its nearest reference point
//! (exhaustive search) and re-solves the closed-form least-squares
//! similarity (Umeyama). Because plain ICP only converges from a nearby
//! start, the search is seeded from several candidates (identity and the
//! proper principal-axis alignments of the two clouds) and the lowest
//! residual wins.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::cloud::{Point3, PointCloud};

/// `p' = scale * rotation * p + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityTransform {
    pub rotation: Matrix3<f64>,
    pub scale: f64,
    pub translation: Vector3<f64>,
}

impl Default for SimilarityTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            scale: 1.0,
            translation: Vector3::zeros(),
        }
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        Point3::from(self.scale * (self.rotation * p.coords) + self.translation)
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            scale: 1.0 / self.scale,
            translation: -(rt * self.translation) / self.scale,
        }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            scale: self.scale * other.scale,
            translation: self.scale * (self.rotation * other.translation) + self.translation,
        }
    }
}

pub fn apply_transform(t: &SimilarityTransform, cloud: &PointCloud) -> PointCloud {
    PointCloud {
        points: cloud.points.iter().map(|p| t.apply(p)).collect(),
        source_box: cloud.source_box,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IcpFlag {
    /// Fewer than three points in either cloud.
    Degenerate,
    /// A cloud is collinear (or a single repeated point).
    RankDeficient,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Registration {
    pub transform: SimilarityTransform,
    pub flag: Option<IcpFlag>,
    /// Mean distance between transformed source points and their matches.
    pub residual: f64,
    pub iterations: usize,
}

impl Registration {
    fn flagged(flag: IcpFlag) -> Self {
        Self {
            transform: SimilarityTransform::identity(),
            flag: Some(flag),
            residual: f64::NAN,
            iterations: 0,
        }
    }
}

const RANK_TOL: f64 = 1e-12;

fn centroid(points: &[Point3]) -> Vector3<f64> {
    points.iter().map(|p| p.coords).sum::<Vector3<f64>>() / points.len() as f64
}

fn covariance(points: &[Point3]) -> Matrix3<f64> {
    let mu = centroid(points);
    points
        .iter()
        .map(|p| {
            let d = p.coords - mu;
            d * d.transpose()
        })
        .sum::<Matrix3<f64>>()
        / points.len() as f64
}

fn is_collinear(points: &[Point3]) -> bool {
    let sv = covariance(points).singular_values();
    let mut s: Vec<f64> = sv.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s[0] <= 0.0 || s[1] <= RANK_TOL * s[0]
}

/// Closed-form least-squares similarity mapping `src[i]` onto `dst[i]`.
pub fn fit_similarity(src: &[Point3], dst: &[Point3]) -> SimilarityTransform {
    let n = src.len() as f64;
    let mu_s = centroid(src);
    let mu_d = centroid(dst);
    let mut cov = Matrix3::zeros();
    let mut var_s = 0.0;
    for (s, d) in src.iter().zip(dst) {
        let ds = s.coords - mu_s;
        cov += (d.coords - mu_d) * ds.transpose();
        var_s += ds.norm_squared();
    }
    cov /= n;
    var_s /= n;

    let svd = cov.svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let mut signs = Vector3::new(1.0, 1.0, 1.0);
    if (u * v_t).determinant() < 0.0 {
        // Singular values come out sorted descending; flip the smallest.
        let (min_idx, _) = svd
            .singular_values
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
        signs[min_idx] = -1.0;
    }
    let rotation = u * Matrix3::from_diagonal(&signs) * v_t;
    let scale = if var_s > 0.0 {
        svd.singular_values.component_mul(&signs).sum() / var_s
    } else {
        1.0
    };
    let translation = mu_d - scale * rotation * mu_s;
    SimilarityTransform {
        rotation,
        scale,
        translation,
    }
}

fn nearest(points: &[Point3], q: &Point3) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, p) in points.iter().enumerate() {
        let d = (p - q).norm_squared();
        if d < best.1 {
            best = (i, d);
        }
    }
    best.0
}

fn refine(
    src: &[Point3],
    reference: &[Point3],
    start: SimilarityTransform,
    max_iters: usize,
    tol: f64,
) -> Registration {
    let mut transform = start;
    let mut prev = f64::INFINITY;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        let matches: Vec<Point3> = src
            .iter()
            .map(|p| reference[nearest(reference, &transform.apply(p))])
            .collect();
        transform = fit_similarity(src, &matches);
        residual = src
            .iter()
            .zip(&matches)
            .map(|(p, m)| (transform.apply(p) - m).norm())
            .sum::<f64>()
            / src.len() as f64;
        if (prev - residual).abs() < tol {
            break;
        }
        prev = residual;
    }
    Registration {
        transform,
        flag: None,
        residual,
        iterations,
    }
}

/// Principal axes as columns, sorted by descending variance.
fn principal_axes(points: &[Point3]) -> (Matrix3<f64>, Vector3<f64>) {
    let eig = covariance(points).symmetric_eigen();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let axes = Matrix3::from_columns(&[
        eig.eigenvectors.column(order[0]).into_owned(),
        eig.eigenvectors.column(order[1]).into_owned(),
        eig.eigenvectors.column(order[2]).into_owned(),
    ]);
    let values = Vector3::new(
        eig.eigenvalues[order[0]],
        eig.eigenvalues[order[1]],
        eig.eigenvalues[order[2]],
    );
    (axes, values)
}

fn initial_guesses(src: &[Point3], reference: &[Point3]) -> Vec<SimilarityTransform> {
    let mut out = vec![SimilarityTransform::identity()];
    let (axes_s, var_s) = principal_axes(src);
    let (axes_r, var_r) = principal_axes(reference);
    let (tot_s, tot_r) = (var_s.sum(), var_r.sum());
    let scale = if tot_s > 0.0 && tot_r > 0.0 {
        (tot_r / tot_s).sqrt()
    } else {
        1.0
    };
    let mu_s = centroid(src);
    let mu_r = centroid(reference);
    for signs in [
        [1.0, 1.0, 1.0],
        [1.0, -1.0, -1.0],
        [-1.0, 1.0, -1.0],
        [-1.0, -1.0, 1.0],
        [1.0, 1.0, -1.0],
        [1.0, -1.0, 1.0],
        [-1.0, 1.0, 1.0],
        [-1.0, -1.0, -1.0],
    ] {
        let flip = Matrix3::from_diagonal(&Vector3::from(signs));
        let rotation = axes_r * flip * axes_s.transpose();
        if rotation.determinant() < 0.0 {
            continue;
        }
        out.push(SimilarityTransform {
            rotation,
            scale,
            translation: mu_r - scale * rotation * mu_s,
        });
    }
    out
}

/// Estimates the similarity transform taking `src` onto `reference`.
///
/// Inputs with fewer than three points return the identity flagged
/// [`IcpFlag::Degenerate`]; collinear clouds return the identity flagged
/// [`IcpFlag::RankDeficient`].
pub fn icp_align(src: &PointCloud, reference: &PointCloud, max_iters: usize, tol: f64) -> Registration {
    if src.len() < 3 || reference.len() < 3 {
        return Registration::flagged(IcpFlag::Degenerate);
    }
    if is_collinear(&src.points) || is_collinear(&reference.points) {
        return Registration::flagged(IcpFlag::RankDeficient);
    }
    let max_iters = max_iters.max(1);
    initial_guesses(&src.points, &reference.points)
        .into_iter()
        .map(|start| refine(&src.points, &reference.points, start, max_iters, tol))
        .fold(None::<Registration>, |best, r| match best {
            Some(b) if b.residual <= r.residual => Some(b),
            _ => Some(r),
        })
        .expect("at least the identity candidate")
}

/// Angle in radians of the relative rotation `a * bᵀ`.
pub fn rotation_angle_between(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    // ‖R - I‖_F = 2√2 sin(θ/2); stable near zero unlike acos of the trace.
    let rel = a * b.transpose();
    let f = (rel - Matrix3::identity()).norm();
    2.0 * (f / (2.0 * std::f64::consts::SQRT_2)).min(1.0).asin()
}
