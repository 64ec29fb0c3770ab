use std::path::{Path, PathBuf};

use asmp_core::losses::{
    consistency_loss, cyclic_loss, dirpred_loss, ortho_loss, LossWeights, PermutationScope,
};
use asmp_core::motion::{DirectionScheme, DisplacementLabel};
use asmp_core::tensorio::write_json;
use serde::Serialize;

use crate::report::{self, SeparationReport};
use crate::{CliError, CliResult, Mode, RunConfig};

/// Loss terms; a term whose inputs the separation does not provide is
/// `null` and contributes nothing to `total`.
#[derive(Debug, Serialize)]
pub struct LossReport {
    pub mode: Mode,
    pub ortho: Option<f64>,
    pub cons: Option<f64>,
    pub cyc: f64,
    pub dirpred: Option<f64>,
    pub total: f64,
    pub weights: LossWeights,
}

/// Per-window direction labels for the network's source rows: auditory
/// node `i` of the window, then the background node.
fn window_label_rows(
    labels: &[DisplacementLabel],
    windows: usize,
    auditory: usize,
    scheme: DirectionScheme,
) -> CliResult<Vec<Vec<usize>>> {
    (0..windows)
        .map(|w| {
            let mut row = Vec::with_capacity(auditory + 1);
            for i in 0..auditory {
                let l = labels
                    .iter()
                    .find(|l| l.window == w && l.node == i && !l.background)
                    .ok_or_else(|| CliError::Usage(format!("no label for node {i} in window {w}")))?;
                row.push(l.class(scheme));
            }
            let bg = labels
                .iter()
                .find(|l| l.window == w && l.background)
                .ok_or_else(|| CliError::Usage(format!("no background label in window {w}")))?;
            row.push(bg.class(scheme));
            Ok(row)
        })
        .collect()
}

pub fn compute(
    dir: &Path,
    report: &SeparationReport,
    labels: Option<&[Vec<DisplacementLabel>]>,
    weights: LossWeights,
) -> CliResult<LossReport> {
    let mut mask_sets = Vec::with_capacity(report.videos.len());
    let mut ibms = Vec::with_capacity(report.videos.len());
    for v in &report.videos {
        mask_sets.push(
            v.masks
                .iter()
                .map(|p| report::matrix(dir, p))
                .collect::<CliResult<Vec<_>>>()?,
        );
        ibms.push(report::matrix(dir, &v.ibm)?);
    }
    let cyc = cyclic_loss(&mask_sets, &ibms)?;

    let nets: Option<Vec<_>> = report.videos.iter().map(|v| v.network.as_ref()).collect();
    let (mut ortho, mut cons, mut dirpred) = (None, None, None);
    if let Some(nets) = nets {
        let mut total_ortho = 0.0;
        let mut tables = Vec::with_capacity(nets.len());
        let mut class_labels = Vec::with_capacity(nets.len());
        for n in &nets {
            total_ortho += ortho_loss(&report::matrix(dir, &n.embeddings)?)?;
            tables.push(report::matrix(dir, &n.class_probs)?);
            class_labels.push(n.class_labels.clone());
        }
        ortho = Some(total_ortho);
        cons = Some(consistency_loss(&tables, &class_labels)?);
        if let Some(labels) = labels {
            let scheme = DirectionScheme::from_classes(report.direction_classes)?;
            let mut dir_tables = Vec::with_capacity(nets.len());
            let mut dir_labels = Vec::with_capacity(nets.len());
            for ((n, v), l) in nets.iter().zip(&report.videos).zip(labels) {
                dir_tables.push(
                    n.direction_probs
                        .iter()
                        .map(|p| report::matrix(dir, p))
                        .collect::<CliResult<Vec<_>>>()?,
                );
                dir_labels.push(window_label_rows(l, v.windows, n.auditory, scheme)?);
            }
            dirpred = Some(dirpred_loss(&dir_tables, &dir_labels, PermutationScope::PerWindow)?);
        }
    }
    let part = |w: f64, v: Option<f64>| v.map_or(0.0, |v| w * v);
    let total = part(weights.cons, cons) + weights.cyc * cyc + part(weights.ortho, ortho) + part(weights.dirpred, dirpred);
    Ok(LossReport {
        mode: report.mode,
        ortho,
        cons,
        cyc,
        dirpred,
        total,
        weights,
    })
}

pub fn run(run: &RunConfig, dir: &Path, label_paths: &[PathBuf], out: &Path) -> CliResult<()> {
    let weights = run.weights()?;
    let report = report::load(dir)?;
    let labels = report::load_labels(label_paths, report.videos.len())?;
    let losses = compute(dir, &report, labels.as_deref(), weights)?;
    write_json(&losses, out)?;
    println!("total loss {:.6} written to {}", losses.total, out.display());
    Ok(())
}
