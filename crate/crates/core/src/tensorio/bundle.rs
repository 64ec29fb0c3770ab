//! On-disk scene bundle: a directory with `manifest.json` referencing
//! per-frame depth arrays, per-window flow arrays, detections, audio and
//! (for synthetic scenes) ground-truth displacements.
//!
//! All paths in the manifest are relative to the bundle directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2, Array3};
use serde::{Deserialize, Serialize};

use super::{read_array, read_json, read_wav, AudioClip};
use crate::error::{Error, Result};
use crate::geometry::BoxRect;
use crate::scenegraph::{AuditoryCatalog, Detection};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const DEFAULT_WINDOW_FRAMES: usize = 8;

fn default_window_frames() -> usize {
    DEFAULT_WINDOW_FRAMES
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioRefs {
    /// Individual source tracks of this video, when known.
    #[serde(default)]
    pub sources: Vec<PathBuf>,
    /// The video's own soundtrack.
    pub mixture: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub video_id: String,
    pub frame_count: usize,
    pub fps: f64,
    #[serde(default = "default_window_frames")]
    pub window_frames: usize,
    pub width: usize,
    pub height: usize,
    /// One depth array (H×W) per frame.
    pub depth: Vec<PathBuf>,
    /// One flow array (H×W×2) per window, reference frame to target frame.
    pub flow: Vec<PathBuf>,
    pub detections: PathBuf,
    pub audio: AudioRefs,
    pub auditory_classes: Vec<u32>,
    #[serde(default)]
    pub background_feature: Option<PathBuf>,
    #[serde(default)]
    pub ground_truth: Option<PathBuf>,
    /// Optional per-window tracked points, each a `2×P×3` array holding the
    /// pseudo-3D positions in the reference frame (row 0) and the target
    /// frame (row 1). When present, target frames are rectified onto the
    /// reference frame before displacements are measured.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tracks: Vec<PathBuf>,
}

/// A `detections.json` entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub id: usize,
    pub frame: usize,
    pub label: u32,
    #[serde(rename = "box")]
    pub bbox: BoxRect,
    pub score: f64,
    /// Path of a rank-1 feature array.
    pub feature: PathBuf,
    #[serde(default)]
    pub track: Option<usize>,
}

/// A `ground_truth.json` entry; `track` is `None` for the background.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthLabel {
    pub track: Option<usize>,
    pub window: usize,
    pub vector: [f64; 3],
    pub class10: usize,
    pub class28: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneBundle {
    pub root: PathBuf,
    pub manifest: Manifest,
    pub depth: Vec<Array2<f64>>,
    pub flow: Vec<Array3<f64>>,
    /// Detections keyed by the frame they were detected in.
    pub detections: BTreeMap<usize, Vec<Detection>>,
    pub sources: Vec<AudioClip>,
    pub mixture: AudioClip,
    pub background_feature: Vec<f64>,
    pub ground_truth: Option<Vec<GroundTruthLabel>>,
    /// Empty, or one `2×P×3` array per window.
    pub tracks: Vec<Array3<f64>>,
}

impl SceneBundle {
    pub fn window_count(&self) -> usize {
        self.manifest.frame_count / self.manifest.window_frames
    }

    /// `(reference, target)` frames of window `w`: its first and last frame.
    pub fn window_frames(&self, w: usize) -> (usize, usize) {
        window_frame_pair(w, self.manifest.window_frames)
    }

    pub fn detections_at(&self, frame: usize) -> &[Detection] {
        self.detections.get(&frame).map_or(&[], Vec::as_slice)
    }

    pub fn catalog(&self) -> AuditoryCatalog {
        self.manifest.auditory_classes.iter().copied().collect()
    }
}

pub fn window_frame_pair(w: usize, window_frames: usize) -> (usize, usize) {
    let first = w * window_frames;
    (first, first + window_frames - 1)
}

/// Loads a bundle and validates every reference eagerly.
pub fn load_bundle(dir: impl AsRef<Path>) -> Result<SceneBundle> {
    let root = dir.as_ref().to_path_buf();
    let manifest: Manifest = read_json(root.join(MANIFEST_FILE))?;
    let m = &manifest;
    if m.window_frames == 0 {
        return Err(Error::invalid("window_frames must be positive"));
    }
    if m.depth.len() != m.frame_count {
        return Err(Error::invalid(format!(
            "manifest lists {} depth frames for frame_count {}",
            m.depth.len(),
            m.frame_count
        )));
    }
    let windows = m.frame_count / m.window_frames;
    if m.flow.len() != windows {
        return Err(Error::invalid(format!(
            "window-count mismatch: {} flow files, expected floor({}/{}) = {windows}",
            m.flow.len(),
            m.frame_count,
            m.window_frames
        )));
    }

    let resolve = |p: &Path| root.join(p);
    let mut depth = Vec::with_capacity(m.depth.len());
    for p in &m.depth {
        let path = resolve(p);
        let arr: Array2<f64> = read_array(&path)?.to_ndarray().map_err(|e| in_file(&path, e))?;
        if arr.dim() != (m.height, m.width) {
            return Err(in_file(&path, Error::Shape(format!("depth is {:?}", arr.dim()))));
        }
        if arr.iter().any(|v| !v.is_finite()) {
            return Err(in_file(&path, Error::invalid("non-finite depth")));
        }
        depth.push(arr);
    }
    let mut flow = Vec::with_capacity(windows);
    for p in &m.flow {
        let path = resolve(p);
        let arr: Array3<f64> = read_array(&path)?.to_ndarray().map_err(|e| in_file(&path, e))?;
        if arr.dim() != (m.height, m.width, 2) {
            return Err(in_file(&path, Error::Shape(format!("flow is {:?}", arr.dim()))));
        }
        if arr.iter().any(|v| !v.is_finite()) {
            return Err(in_file(&path, Error::invalid("non-finite flow")));
        }
        flow.push(arr);
    }

    if !m.tracks.is_empty() && m.tracks.len() != windows {
        return Err(Error::invalid(format!(
            "window-count mismatch: {} track files, expected {windows}",
            m.tracks.len()
        )));
    }
    let mut tracks = Vec::with_capacity(m.tracks.len());
    for p in &m.tracks {
        let path = resolve(p);
        let arr: Array3<f64> = read_array(&path)?.to_ndarray().map_err(|e| in_file(&path, e))?;
        let (two, points, three) = arr.dim();
        if two != 2 || three != 3 || points == 0 {
            return Err(in_file(&path, Error::Shape(format!("tracks are {:?}", arr.dim()))));
        }
        if arr.iter().any(|v| !v.is_finite()) {
            return Err(in_file(&path, Error::invalid("non-finite track point")));
        }
        tracks.push(arr);
    }

    let records: Vec<DetectionRecord> = read_json(resolve(&m.detections))?;
    let mut detections: BTreeMap<usize, Vec<Detection>> = BTreeMap::new();
    let mut feature_cache: BTreeMap<PathBuf, Vec<f64>> = BTreeMap::new();
    for r in records {
        if r.frame >= m.frame_count {
            return Err(Error::invalid(format!(
                "detection {} refers to frame {} of {}",
                r.id, r.frame, m.frame_count
            )));
        }
        if r.bbox.area() <= 0.0 || !r.bbox.within(m.width, m.height) {
            return Err(Error::invalid(format!("detection {} has an invalid box", r.id)));
        }
        let path = resolve(&r.feature);
        let feature = match feature_cache.get(&path) {
            Some(f) => f.clone(),
            None => {
                let f = read_feature(&path)?;
                feature_cache.insert(path.clone(), f.clone());
                f
            }
        };
        detections.entry(r.frame).or_default().push(Detection {
            id: r.id,
            label: r.label,
            bbox: r.bbox,
            feature,
            score: r.score,
            track: r.track,
        });
    }

    let sources = m
        .audio
        .sources
        .iter()
        .map(|p| read_wav(resolve(p)))
        .collect::<Result<Vec<_>>>()?;
    let mixture = read_wav(resolve(&m.audio.mixture))?;
    if let Some(s) = sources.iter().find(|s| s.rate != mixture.rate) {
        return Err(Error::invalid(format!(
            "source rate {} differs from mixture rate {}",
            s.rate, mixture.rate
        )));
    }

    let background_feature = match &m.background_feature {
        Some(p) => read_feature(&resolve(p))?,
        None => vec![0.0; crate::scenegraph::FEATURE_DIM],
    };
    let ground_truth = m
        .ground_truth
        .as_ref()
        .map(|p| read_json::<Vec<GroundTruthLabel>>(resolve(p)))
        .transpose()?;

    Ok(SceneBundle {
        root,
        manifest,
        depth,
        flow,
        detections,
        sources,
        mixture,
        background_feature,
        ground_truth,
        tracks,
    })
}

fn read_feature(path: &Path) -> Result<Vec<f64>> {
    let arr: Array1<f64> = read_array(path)?.to_ndarray().map_err(|e| in_file(path, e))?;
    if arr.iter().any(|v| !v.is_finite()) {
        return Err(in_file(path, Error::invalid("non-finite feature")));
    }
    Ok(arr.to_vec())
}

fn in_file(path: &Path, e: Error) -> Error {
    Error::invalid(format!("{}: {e}", path.display()))
}
