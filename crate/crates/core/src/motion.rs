//! Ground-truth displacement vectors from flow and depth, and their
//! quantization into 10- or 28-way direction classes.
//!
//! Class layout for the 10-way scheme: octant codes `0..8` where
//! `code = [x >= 0] + 2·[y >= 0] + 4·[z >= 0]`, then 8 = no motion and
//! 9 = background. For the 28-way scheme: the 26 cube directions of
//! [`direction_templates`], then 26 = no motion and 27 = background.

use nalgebra::Vector3;
use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    axis_coord, frame_max, icp_align, normalized_depth, BoxRect, Point3, PointCloud, Registration,
    SimilarityTransform,
};
use crate::scenegraph::{NodeKind, SceneGraph};
use crate::tensorio::SceneBundle;

pub type Displacement = Vector3<f64>;

pub const DEFAULT_TAU: f64 = 0.02;
pub const NO_MOTION_10: usize = 8;
pub const BACKGROUND_10: usize = 9;
pub const NO_MOTION_28: usize = 26;
pub const BACKGROUND_28: usize = 27;

/// Which direction quantizer a classifier targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DirectionScheme {
    Octants,
    CubeDirections,
}

impl DirectionScheme {
    pub fn from_classes(classes: usize) -> Result<Self> {
        match classes {
            10 => Ok(Self::Octants),
            28 => Ok(Self::CubeDirections),
            k => Err(Error::invalid(format!("direction classes must be 10 or 28, got {k}"))),
        }
    }

    pub fn classes(self) -> usize {
        match self {
            Self::Octants => 10,
            Self::CubeDirections => 28,
        }
    }

    pub fn quantize(self, d: &Displacement, tau: f64, is_background: bool) -> usize {
        match self {
            Self::Octants => quantize10(d, tau, is_background),
            Self::CubeDirections => quantize28(d, tau, is_background),
        }
    }
}

/// Per-pixel pseudo-3D displacement of the pixels in `bbox`.
///
/// Each pixel `p` moves to `p' = p + flow(p)`, clamped to the image. The
/// result is `(Δx, Δy, z_tgt(p') - z_ref(p))` in normalized units, with
/// depths divided by their frame maximum.
pub fn lift_displacements(
    flow: &Array3<f64>,
    bbox: &BoxRect,
    depth_ref: &Array2<f64>,
    depth_tgt: &Array2<f64>,
) -> Result<Vec<Displacement>> {
    lift_displacements_rectified(flow, bbox, depth_ref, depth_tgt, None)
}

/// As [`lift_displacements`], but the target-frame endpoint is first mapped
/// into the reference frame by `rectify`.
pub fn lift_displacements_rectified(
    flow: &Array3<f64>,
    bbox: &BoxRect,
    depth_ref: &Array2<f64>,
    depth_tgt: &Array2<f64>,
    rectify: Option<&SimilarityTransform>,
) -> Result<Vec<Displacement>> {
    let (height, width) = depth_ref.dim();
    if depth_tgt.dim() != (height, width) || flow.dim() != (height, width, 2) {
        return Err(Error::Shape(format!(
            "depth {:?}/{:?} and flow {:?} disagree",
            depth_ref.dim(),
            depth_tgt.dim(),
            flow.dim()
        )));
    }
    let (rows, cols) = bbox.pixel_ranges(width, height);
    if rows.is_empty() || cols.is_empty() {
        return Err(Error::Empty("box covers no pixels"));
    }
    let (max_ref, max_tgt) = (frame_max(depth_ref), frame_max(depth_tgt));
    let (w_last, h_last) = ((width - 1) as f64, (height - 1) as f64);
    let mut out = Vec::with_capacity(rows.len() * cols.len());
    for r in rows {
        for c in cols.clone() {
            let (cf, rf) = (c as f64, r as f64);
            let c2 = (cf + flow[[r, c, 0]]).clamp(0.0, w_last);
            let r2 = (rf + flow[[r, c, 1]]).clamp(0.0, h_last);
            let z_ref = normalized_depth(depth_ref[[r, c]], max_ref);
            let z_tgt = normalized_depth(
                depth_tgt[[r2.round() as usize, c2.round() as usize]],
                max_tgt,
            );
            let d = match rectify {
                None => Vector3::new(
                    axis_coord(c2 - cf, width),
                    axis_coord(r2 - rf, height),
                    z_tgt - z_ref,
                ),
                Some(t) => {
                    let start = Point3::new(axis_coord(cf, width), axis_coord(rf, height), z_ref);
                    let end = t.apply(&Point3::new(
                        axis_coord(c2, width),
                        axis_coord(r2, height),
                        z_tgt,
                    ));
                    end - start
                }
            };
            out.push(d);
        }
    }
    Ok(out)
}

fn median_of(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Component-wise median; the zero vector for an empty list.
pub fn median_displacement(vectors: &[Displacement]) -> Displacement {
    if vectors.is_empty() {
        return Displacement::zeros();
    }
    let mut out = Displacement::zeros();
    let mut column = Vec::with_capacity(vectors.len());
    for k in 0..3 {
        column.clear();
        column.extend(vectors.iter().map(|v| v[k]));
        out[k] = median_of(&mut column);
    }
    out
}

/// The 26 unit directions toward the faces (0–5), edges (6–17) and
/// corners (18–25) of a cube, each group in lexicographic `(x, y, z)` order.
pub fn direction_templates() -> [Displacement; 26] {
    let mut grid: Vec<[i32; 3]> = Vec::with_capacity(26);
    for x in -1..=1 {
        for y in -1..=1 {
            for z in -1..=1 {
                if (x, y, z) != (0, 0, 0) {
                    grid.push([x, y, z]);
                }
            }
        }
    }
    // Stable sort keeps the lexicographic order inside each group.
    grid.sort_by_key(|v| v.iter().filter(|&&c| c != 0).count());
    let mut out = [Displacement::zeros(); 26];
    for (slot, v) in out.iter_mut().zip(&grid) {
        *slot = Vector3::new(f64::from(v[0]), f64::from(v[1]), f64::from(v[2])).normalize();
    }
    out
}

pub fn quantize10(d: &Displacement, tau: f64, is_background: bool) -> usize {
    if is_background {
        return BACKGROUND_10;
    }
    if d.norm() < tau {
        return NO_MOTION_10;
    }
    usize::from(d.x >= 0.0) + 2 * usize::from(d.y >= 0.0) + 4 * usize::from(d.z >= 0.0)
}

pub fn quantize28(d: &Displacement, tau: f64, is_background: bool) -> usize {
    if is_background {
        return BACKGROUND_28;
    }
    let norm = d.norm();
    if norm < tau || norm == 0.0 {
        return NO_MOTION_28;
    }
    let mut best = (0, f64::NEG_INFINITY);
    for (i, t) in direction_templates().iter().enumerate() {
        let cos = d.dot(t) / norm;
        if cos > best.1 {
            best = (i, cos);
        }
    }
    best.0
}

/// One node's quantized displacement in one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplacementLabel {
    pub node: usize,
    pub window: usize,
    pub vector: [f64; 3],
    pub class10: usize,
    pub class28: usize,
    #[serde(default)]
    pub track: Option<usize>,
    #[serde(default)]
    pub background: bool,
}

impl DisplacementLabel {
    pub fn class(&self, scheme: DirectionScheme) -> usize {
        match scheme {
            DirectionScheme::Octants => self.class10,
            DirectionScheme::CubeDirections => self.class28,
        }
    }
}

pub const RECTIFY_ITERS: usize = 50;
pub const RECTIFY_TOL: f64 = 1e-10;

/// Registers window `w`'s tracked target-frame points onto their
/// reference-frame positions. `None` when the bundle has no tracks.
pub fn window_rectification(bundle: &SceneBundle, w: usize) -> Option<Registration> {
    let tracks = bundle.tracks.get(w)?;
    let cloud = |row: usize| {
        PointCloud::new(
            tracks
                .index_axis(ndarray::Axis(0), row)
                .rows()
                .into_iter()
                .map(|p| Point3::new(p[0], p[1], p[2]))
                .collect(),
        )
    };
    Some(icp_align(&cloud(1), &cloud(0), RECTIFY_ITERS, RECTIFY_TOL))
}

/// Labels every auditory node and the background node of each window's
/// graph: lift the box's flow, take the median, quantize.
///
/// `graphs[w]` must be the graph built on window `w`'s reference frame.
/// The result is ordered by window, then node index.
pub fn window_labels(
    bundle: &SceneBundle,
    graphs: &[SceneGraph],
    tau: f64,
) -> Result<Vec<DisplacementLabel>> {
    let mut labels = Vec::new();
    for (w, graph) in graphs.iter().enumerate() {
        let flow = bundle
            .flow
            .get(w)
            .ok_or_else(|| Error::invalid(format!("missing flow for window {w}")))?;
        let (f_ref, f_tgt) = bundle.window_frames(w);
        let (depth_ref, depth_tgt) = match (bundle.depth.get(f_ref), bundle.depth.get(f_tgt)) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::invalid(format!("missing depth for window {w}"))),
        };
        // A flagged registration is the identity, which would only add
        // rounding noise; skip it.
        let rectify = window_rectification(bundle, w)
            .filter(|r| r.flag.is_none())
            .map(|r| r.transform);
        let mut nodes: Vec<usize> = graph.auditory_index.clone();
        nodes.push(graph.background_index());
        for idx in nodes {
            let node = &graph.nodes[idx];
            let is_background = node.kind == NodeKind::Background;
            let vectors =
                lift_displacements_rectified(flow, &node.bbox, depth_ref, depth_tgt, rectify.as_ref())
                    .map_err(|e| e.in_window(w))?;
            let d = median_displacement(&vectors);
            labels.push(DisplacementLabel {
                node: idx,
                window: w,
                vector: [d.x, d.y, d.z],
                class10: quantize10(&d, tau, is_background),
                class28: quantize28(&d, tau, is_background),
                track: node.track,
                background: is_background,
            });
        }
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_flow_equal_depth() {
        let flow = Array3::zeros((6, 8, 2));
        let depth = Array2::from_elem((6, 8), 3.0);
        let v = lift_displacements(&flow, &BoxRect::new(1.0, 1.0, 4.0, 4.0), &depth, &depth).unwrap();
        assert_eq!(v.len(), 9);
        assert!(v.iter().all(|d| *d == Displacement::zeros()));
    }

    #[test]
    fn uniform_flow_matches_pixel_loop() {
        let (h, w) = (10usize, 20usize);
        let mut flow = Array3::zeros((h, w, 2));
        flow.slice_mut(ndarray::s![.., .., 0]).fill(w as f64 / 10.0);
        let depth = Array2::from_elem((h, w), 1.0);
        let bbox = BoxRect::new(0.0, 0.0, 10.0, 10.0);
        let v = lift_displacements(&flow, &bbox, &depth, &depth).unwrap();
        let expected = 0.1 / (1.0 - 1.0 / w as f64);
        let mut k = 0;
        for _r in 0..10 {
            for c in 0..10 {
                let end = (c as f64 + 2.0).min((w - 1) as f64);
                let dx = (end - c as f64) / (w - 1) as f64;
                assert!((v[k].x - dx).abs() < 1e-15);
                assert!((v[k].x - expected).abs() < 1e-12);
                assert_eq!(v[k].y, 0.0);
                assert_eq!(v[k].z, 0.0);
                k += 1;
            }
        }
    }

    #[test]
    fn endpoints_outside_are_clamped() {
        let mut flow = Array3::zeros((4, 4, 2));
        flow.fill(100.0);
        let depth = Array2::from_elem((4, 4), 2.0);
        let v = lift_displacements(&flow, &BoxRect::new(0.0, 0.0, 4.0, 4.0), &depth, &depth).unwrap();
        assert!(v.iter().all(|d| d.iter().all(|c| c.is_finite())));
        assert_eq!(v[0], Vector3::new(1.0, 1.0, 0.0));
        assert!(lift_displacements(&flow, &BoxRect::new(1.0, 1.0, 1.0, 3.0), &depth, &depth).is_err());
    }

    #[test]
    fn identity_rectification_matches_plain_lift() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let flow = Array3::from_shape_fn((6, 6, 2), |_| rng.random_range(-2.0..2.0));
        let d0 = Array2::from_shape_fn((6, 6), |_| rng.random_range(1.0..2.0));
        let d1 = Array2::from_shape_fn((6, 6), |_| rng.random_range(1.0..2.0));
        let bbox = BoxRect::new(0.0, 0.0, 6.0, 6.0);
        let plain = lift_displacements(&flow, &bbox, &d0, &d1).unwrap();
        let rect = lift_displacements_rectified(&flow, &bbox, &d0, &d1, Some(&SimilarityTransform::identity())).unwrap();
        for (a, b) in plain.iter().zip(&rect) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn median_examples() {
        let v = [
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(2.0, 0.0, 0.0),
            Vector3::new(3.0, 0.0, 0.0),
        ];
        assert_eq!(median_displacement(&v), Vector3::new(2.0, 0.0, 0.0));
        assert_eq!(median_displacement(&[]), Displacement::zeros());
        let even = [Vector3::new(1.0, 4.0, 0.0), Vector3::new(2.0, 2.0, 0.0)];
        assert_eq!(median_displacement(&even), Vector3::new(1.5, 3.0, 0.0));
    }

    #[test]
    fn median_matches_sort_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let v: Vec<Displacement> = (0..101)
            .map(|_| Vector3::new(rng.random(), rng.random(), rng.random()))
            .collect();
        let m = median_displacement(&v);
        for k in 0..3 {
            let mut col: Vec<f64> = v.iter().map(|d| d[k]).collect();
            col.sort_by(|a, b| a.partial_cmp(b).unwrap());
            assert_eq!(m[k], col[50]);
        }
    }

    #[test]
    fn templates_layout() {
        let t = direction_templates();
        assert_eq!(t.len(), 26);
        assert_eq!(t[0], Vector3::new(-1.0, 0.0, 0.0));
        assert_eq!(t[5], Vector3::new(1.0, 0.0, 0.0));
        assert!((t[6] - Vector3::new(-1.0, -1.0, 0.0).normalize()).norm() < 1e-15);
        assert!((t[25] - Vector3::new(1.0, 1.0, 1.0).normalize()).norm() < 1e-15);
        for (i, a) in t.iter().enumerate() {
            assert!((a.norm() - 1.0).abs() < 1e-12);
            for b in &t[i + 1..] {
                assert!((a - b).norm() > 1e-3);
            }
        }
    }

    #[test]
    fn quantize10_examples() {
        assert_eq!(quantize10(&Vector3::new(0.6, 0.6, 0.6), 0.05, false), 7);
        assert_eq!(quantize10(&Vector3::new(0.01, 0.0, 0.0), 0.05, false), NO_MOTION_10);
        assert_eq!(quantize10(&Vector3::new(0.6, 0.6, 0.6), 0.05, true), BACKGROUND_10);
        assert_eq!(quantize10(&Vector3::new(-1.0, -1.0, -1.0), 0.0, false), 0);
        // Zero components count as non-negative.
        assert_eq!(quantize10(&Vector3::new(1.0, 0.0, -1.0), 0.0, false), 3);
    }

    #[test]
    fn quantize28_examples() {
        let t = direction_templates();
        let plus_x = t.iter().position(|v| *v == Vector3::new(1.0, 0.0, 0.0)).unwrap();
        assert_eq!(quantize28(&Vector3::new(1.0, 0.0, 0.0), 0.02, false), plus_x);
        let d = Vector3::new(1.0, 1.0, 0.0) / 2f64.sqrt();
        let edge = t.iter().position(|v| (v - d).norm() < 1e-12).unwrap();
        assert!((6..18).contains(&edge));
        assert_eq!(quantize28(&d, 0.02, false), edge);
        assert_eq!(quantize28(&Vector3::zeros(), 0.0, false), NO_MOTION_28);
        assert_eq!(quantize28(&d, 0.02, true), BACKGROUND_28);
        for (i, v) in t.iter().enumerate() {
            assert_eq!(quantize28(v, 0.02, false), i);
        }
    }

    #[test]
    fn scheme_dispatch() {
        assert!(DirectionScheme::from_classes(12).is_err());
        assert_eq!(DirectionScheme::from_classes(28).unwrap().classes(), 28);
    }

    proptest! {
        #[test]
        fn quantizers_ignore_positive_scale(
            x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0, c in 0.01f64..100.0
        ) {
            let tau = 0.02;
            let d = Vector3::new(x, y, z);
            let scaled = d * c;
            prop_assume!(d.norm() >= tau && scaled.norm() >= tau);
            prop_assert_eq!(quantize10(&d, tau, false), quantize10(&scaled, tau, false));
            // Scaling may perturb the last bit of the cosines; skip near-ties.
            let t = direction_templates();
            let mut cos: Vec<f64> = t.iter().map(|v| d.dot(v) / d.norm()).collect();
            cos.sort_by(|a, b| b.total_cmp(a));
            prop_assume!(cos[0] - cos[1] > 1e-12);
            prop_assert_eq!(quantize28(&d, tau, false), quantize28(&scaled, tau, false));
        }

        #[test]
        fn median_is_permutation_invariant(
            v in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0), 1..40),
            seed in any::<u64>()
        ) {
            let vecs: Vec<Displacement> = v.iter().map(|&(a, b, c)| Vector3::new(a, b, c)).collect();
            let mut shuffled = vecs.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for i in (1..shuffled.len()).rev() {
                shuffled.swap(i, rng.random_range(0..=i));
            }
            prop_assert_eq!(median_displacement(&vecs), median_displacement(&shuffled));
        }
    }
}
