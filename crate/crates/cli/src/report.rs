//! Layout of a separation directory, shared by `separate`, `losses` and
//! `eval`. Paths are relative to the directory except bundle paths.

use std::path::{Path, PathBuf};

use asmp_core::motion::DisplacementLabel;
use asmp_core::tensorio::{read_array, read_json, read_wav};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult, Mode};

pub const REPORT_FILE: &str = "separation.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeparationReport {
    pub mode: Mode,
    pub seed: u64,
    pub rate: u32,
    pub clip_len: usize,
    pub direction_classes: usize,
    pub mixture: PathBuf,
    pub videos: Vec<VideoReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VideoReport {
    pub bundle: PathBuf,
    pub windows: usize,
    /// The video's binary mask against the other video, pooled grid.
    pub ibm: PathBuf,
    /// Reference source clips after length fitting.
    pub references: Vec<PathBuf>,
    /// Every predicted mask of the video; their sum is compared to `ibm`.
    pub masks: Vec<PathBuf>,
    /// Masked pooled mixture magnitudes, parallel to `masks`.
    pub separated: Vec<PathBuf>,
    pub estimates: Vec<EstimateReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network: Option<NetworkReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateReport {
    pub wav: PathBuf,
    /// Index into `masks`.
    pub mask: usize,
    pub track: Option<usize>,
    pub background: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkReport {
    pub auditory: usize,
    pub embeddings: PathBuf,
    pub class_probs: PathBuf,
    pub class_labels: Vec<usize>,
    pub direction_probs: Vec<PathBuf>,
    pub directions: Vec<DirectionPrediction>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DirectionPrediction {
    pub window: usize,
    pub node: usize,
    pub track: Option<usize>,
    pub class: usize,
}

pub fn load(dir: &Path) -> CliResult<SeparationReport> {
    let report: SeparationReport = read_json(dir.join(REPORT_FILE))?;
    if report.videos.is_empty() {
        return Err(CliError::Usage("separation lists no videos".into()));
    }
    Ok(report)
}

pub fn matrix(dir: &Path, rel: &Path) -> CliResult<Array2<f64>> {
    Ok(read_array(dir.join(rel))?.to_ndarray()?)
}

pub fn samples(dir: &Path, rel: &Path) -> CliResult<Vec<f64>> {
    Ok(read_wav(dir.join(rel))?.samples)
}

/// Reads one `labels.json` per video, or none at all.
pub fn load_labels(paths: &[PathBuf], videos: usize) -> CliResult<Option<Vec<Vec<DisplacementLabel>>>> {
    if paths.is_empty() {
        return Ok(None);
    }
    if paths.len() != videos {
        return Err(CliError::Usage(format!(
            "{} label files for {videos} videos",
            paths.len()
        )));
    }
    paths
        .iter()
        .map(|p| Ok(read_json(p)?))
        .collect::<CliResult<Vec<_>>>()
        .map(Some)
}
