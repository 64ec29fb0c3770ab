//! Scene graph assembly: auditory nodes, IoU-selected context nodes, one
//! background node, and Chamfer/RBF edge weights.

use std::collections::{BTreeSet, HashSet};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensorio::SceneBundle;
use crate::geometry::{
    backproject, pairwise_chamfer, rbf_adjacency, rbf_bandwidth, AdjacencyMatrix, BoxRect,
    DistanceMatrix, PointCloud, DEFAULT_PERCENTILE,
};

pub const FEATURE_DIM: usize = 512;
pub const MAX_AUDITORY: usize = 2;
pub const MAX_CONTEXT: usize = 20;
pub const DEFAULT_GAMMA: f64 = 0.1;
const BACKGROUND_TRIES: usize = 64;

/// One detector output: class, box, appearance feature and confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub id: usize,
    pub label: u32,
    pub bbox: BoxRect,
    pub feature: Vec<f64>,
    pub score: f64,
    /// Identity of the synthetic object the box belongs to, when known.
    pub track: Option<usize>,
}

/// Class ids that can emit sound.
pub type AuditoryCatalog = BTreeSet<u32>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Auditory,
    Context,
    Background,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub kind: NodeKind,
    pub bbox: BoxRect,
    pub feature: Vec<f64>,
    pub cloud: PointCloud,
    pub label: Option<u32>,
    pub detection_id: Option<usize>,
    pub score: f64,
    pub track: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneGraph {
    pub nodes: Vec<Node>,
    pub distances: DistanceMatrix,
    pub adjacency: AdjacencyMatrix,
    /// Kernel bandwidth used for `adjacency`.
    pub sigma: f64,
    pub auditory_index: Vec<usize>,
}

impl SceneGraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn background_index(&self) -> usize {
        self.nodes
            .iter()
            .position(|n| n.kind == NodeKind::Background)
            .expect("graph always has a background node")
    }

    pub fn features(&self) -> Array2<f64> {
        let dim = self.nodes.first().map_or(0, |n| n.feature.len());
        Array2::from_shape_fn((self.len(), dim), |(i, k)| self.nodes[i].feature[k])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphConfig {
    pub gamma: f64,
    pub percentile: f64,
    pub stride: usize,
    pub seed: u64,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            gamma: DEFAULT_GAMMA,
            percentile: DEFAULT_PERCENTILE,
            stride: 1,
            seed: 0,
        }
    }
}

pub fn iou(a: &BoxRect, b: &BoxRect) -> Result<f64> {
    if a.area() <= 0.0 || b.area() <= 0.0 {
        return Err(Error::invalid("iou of a zero-area rectangle"));
    }
    let inter = a.intersection_area(b);
    Ok(inter / (a.area() + b.area() - inter))
}

fn by_score_desc(a: &Detection, b: &Detection) -> std::cmp::Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.label.cmp(&b.label))
        .then(a.bbox.x0.total_cmp(&b.bbox.x0))
        .then(a.id.cmp(&b.id))
}

/// Non-auditory candidates whose IoU with `auditory` exceeds `gamma`,
/// highest scores first, at most [`MAX_CONTEXT`].
pub fn select_context(
    auditory: &Detection,
    candidates: &[Detection],
    catalog: &AuditoryCatalog,
    gamma: f64,
) -> Result<Vec<Detection>> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::invalid(format!("gamma {gamma} not in [0, 1]")));
    }
    let mut picked = Vec::new();
    for c in candidates.iter().filter(|c| !catalog.contains(&c.label)) {
        if iou(&auditory.bbox, &c.bbox)? > gamma {
            picked.push(c.clone());
        }
    }
    picked.sort_by(by_score_desc);
    picked.truncate(MAX_CONTEXT);
    Ok(picked)
}

/// Picks a quarter-area crop that overlaps none of `boxes`. Falls back to
/// the image corner with the smallest worst-case IoU.
pub fn background_crop(width: usize, height: usize, boxes: &[BoxRect], seed: u64) -> BoxRect {
    let cw = (width / 2).max(1);
    let ch = (height / 2).max(1);
    let at = |x: usize, y: usize| BoxRect::new(x as f64, y as f64, (x + cw) as f64, (y + ch) as f64);
    let worst_iou = |crop: &BoxRect| {
        boxes
            .iter()
            .filter_map(|b| iou(crop, b).ok())
            .fold(0.0, f64::max)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..BACKGROUND_TRIES {
        let crop = at(rng.random_range(0..=width - cw), rng.random_range(0..=height - ch));
        if worst_iou(&crop) == 0.0 {
            return crop;
        }
    }
    [
        at(0, 0),
        at(width - cw, 0),
        at(0, height - ch),
        at(width - cw, height - ch),
    ]
    .into_iter()
    .map(|c| (worst_iou(&c), c))
    .fold(None::<(f64, BoxRect)>, |best, cand| match best {
        Some(b) if b.0 <= cand.0 => Some(b),
        _ => Some(cand),
    })
    .expect("four corners")
    .1
}

fn detection_node(d: &Detection, kind: NodeKind, depth: &Array2<f64>, stride: usize) -> Result<Node> {
    let mut cloud = backproject(depth, &d.bbox, stride)?;
    cloud.source_box = Some(d.id);
    Ok(Node {
        kind,
        bbox: d.bbox,
        feature: d.feature.clone(),
        cloud,
        label: Some(d.label),
        detection_id: Some(d.id),
        score: d.score,
        track: d.track,
    })
}

/// Assembles the scene graph for one reference frame.
///
/// Node order: auditory nodes by descending score, then context nodes in
/// order of first selection, then the background node.
pub fn build_graph(
    detections: &[Detection],
    catalog: &AuditoryCatalog,
    depth: &Array2<f64>,
    config: &GraphConfig,
    background_feature: &[f64],
) -> Result<SceneGraph> {
    let mut auditory: Vec<&Detection> = detections
        .iter()
        .filter(|d| catalog.contains(&d.label))
        .collect();
    if auditory.is_empty() {
        return Err(Error::NoAuditoryObject);
    }
    auditory.sort_by(|a, b| by_score_desc(a, b));
    auditory.truncate(MAX_AUDITORY);

    let mut nodes = Vec::new();
    for d in &auditory {
        nodes.push(detection_node(d, NodeKind::Auditory, depth, config.stride)?);
    }
    let mut seen: HashSet<usize> = HashSet::new();
    for d in &auditory {
        for c in select_context(d, detections, catalog, config.gamma)? {
            if seen.insert(c.id) {
                nodes.push(detection_node(&c, NodeKind::Context, depth, config.stride)?);
            }
        }
    }

    let (height, width) = depth.dim();
    let boxes: Vec<BoxRect> = detections.iter().map(|d| d.bbox).collect();
    let crop = background_crop(width, height, &boxes, config.seed);
    nodes.push(Node {
        kind: NodeKind::Background,
        bbox: crop,
        feature: background_feature.to_vec(),
        cloud: backproject(depth, &crop, config.stride)?,
        label: None,
        detection_id: None,
        score: 1.0,
        track: None,
    });

    let clouds: Vec<PointCloud> = nodes.iter().map(|n| n.cloud.clone()).collect();
    let distances = pairwise_chamfer(&clouds)?;
    let sigma = rbf_bandwidth(&distances, config.percentile)?;
    let adjacency = rbf_adjacency(&distances, config.percentile)?;
    Ok(SceneGraph {
        auditory_index: (0..auditory.len()).collect(),
        nodes,
        distances,
        adjacency,
        sigma,
    })
}

/// One graph per window, built on the window's reference frame. The
/// background crop of window `w` is drawn with seed `config.seed + w`.
pub fn bundle_graphs(bundle: &SceneBundle, config: &GraphConfig) -> Result<Vec<SceneGraph>> {
    let catalog = bundle.catalog();
    (0..bundle.window_count())
        .map(|w| {
            let (frame, _) = bundle.window_frames(w);
            let depth = bundle
                .depth
                .get(frame)
                .ok_or_else(|| Error::invalid(format!("missing depth for frame {frame}")))?;
            let config = GraphConfig {
                seed: config.seed.wrapping_add(w as u64),
                ..*config
            };
            build_graph(
                bundle.detections_at(frame),
                &catalog,
                depth,
                &config,
                &bundle.background_feature,
            )
            .map_err(|e| e.in_window(w))
        })
        .collect()
}

/// JSON view of a node; the point cloud is summarized by its size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub index: usize,
    pub kind: NodeKind,
    #[serde(rename = "box")]
    pub bbox: BoxRect,
    pub label: Option<u32>,
    pub detection: Option<usize>,
    pub score: f64,
    pub track: Option<usize>,
    pub points: usize,
}

impl SceneGraph {
    pub fn node_records(&self) -> Vec<NodeRecord> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(index, n)| NodeRecord {
                index,
                kind: n.kind,
                bbox: n.bbox,
                label: n.label,
                detection: n.detection_id,
                score: n.score,
                track: n.track,
                points: n.cloud.len(),
            })
            .collect()
    }
}
