//! Training objectives: orthogonality, consistency, cyclic mask and
//! direction-prediction losses, their weighted total, and a
//! finite-difference gradient checker.
//!
//! Source order out of the recurrent embedder is arbitrary, so the
//! classification losses take the minimum over every assignment of ground
//! truth labels to separated sources.

use itertools::Itertools;
use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::audio::Mask;
use crate::error::{Error, Result};

pub const LOG_FLOOR: f64 = 1e-12;
pub const NORM_TOL: f64 = 1e-6;
/// Row sums of probability tables may drift this far from 1 (tables are
/// often stored as `f32`).
pub const PROB_TOL: f64 = 1e-6;
const MAX_PERMUTED: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub cons: f64,
    pub cyc: f64,
    pub ortho: f64,
    pub dirpred: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            cons: 0.05,
            cyc: 1.0,
            ortho: 1.0,
            dirpred: 0.05,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.cons, self.cyc, self.ortho, self.dirpred];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid(format!("loss weights must be finite and >= 0, got {all:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossComponents {
    pub cons: f64,
    pub cyc: f64,
    pub ortho: f64,
    pub dirpred: f64,
}

pub fn total_loss(c: &LossComponents, w: &LossWeights) -> f64 {
    w.cons * c.cons + w.cyc * c.cyc + w.ortho * c.ortho + w.dirpred * c.dirpred
}

/// Whether the direction loss picks its label permutation per window or
/// once for all windows of a video.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PermutationScope {
    #[default]
    PerWindow,
    Shared,
}

/// Sum of squared inner products over ordered pairs of distinct rows, with
/// no normalization check.
pub fn ortho_penalty(y: &Array2<f64>) -> f64 {
    let gram = y.dot(&y.t());
    let n = gram.nrows();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                total += gram[[i, j]] * gram[[i, j]];
            }
        }
    }
    total
}

fn check_embeddings(y: &Array2<f64>) -> Result<()> {
    if y.nrows() < 2 {
        return Err(Error::invalid("orthogonality needs at least two embeddings"));
    }
    for (i, row) in y.rows().into_iter().enumerate() {
        let norm = row.dot(&row).sqrt();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::invalid(format!("embedding {i} has norm {norm}, expected 1")));
        }
    }
    Ok(())
}

/// Orthogonality loss over unit-norm embeddings (one per row).
pub fn ortho_loss(y: &Array2<f64>) -> Result<f64> {
    check_embeddings(y)?;
    Ok(ortho_penalty(y))
}

/// Gradient of [`ortho_penalty`]: row `i` is `Σ_{j≠i} 4 (y_i·y_j) y_j`.
pub fn ortho_loss_grad(y: &Array2<f64>) -> Array2<f64> {
    let mut gram = y.dot(&y.t());
    gram.diag_mut().fill(0.0);
    gram.dot(y) * 4.0
}

fn neg_log(p: f64) -> f64 {
    -p.max(LOG_FLOOR).ln()
}

fn check_table(table: &Array2<f64>, labels: &[usize], what: &str) -> Result<()> {
    if table.nrows() != labels.len() {
        return Err(Error::Shape(format!(
            "{what}: {} probability rows for {} labels",
            table.nrows(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::Empty("no sources to score"));
    }
    if labels.len() > MAX_PERMUTED {
        return Err(Error::invalid(format!(
            "{what}: {} sources is too many to enumerate",
            labels.len()
        )));
    }
    for (i, row) in table.rows().into_iter().enumerate() {
        let sum: f64 = row.sum();
        if row.iter().any(|p| !p.is_finite() || *p < 0.0) || (sum - 1.0).abs() > PROB_TOL {
            return Err(Error::invalid(format!("{what}: row {i} is not a distribution (sum {sum})")));
        }
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= table.ncols()) {
        return Err(Error::invalid(format!(
            "{what}: class {bad} out of range for {} classes",
            table.ncols()
        )));
    }
    Ok(())
}

/// Cross-entropy of `table` against `labels` reordered by `perm`.
fn permuted_ce(table: &Array2<f64>, labels: &[usize], perm: &[usize]) -> f64 {
    perm.iter()
        .enumerate()
        .map(|(i, &j)| neg_log(table[[i, labels[j]]]))
        .sum()
}

/// Minimum cross-entropy over all assignments of `labels` to the rows of
/// `table`, together with the minimizing permutation.
pub fn min_permuted_ce(table: &Array2<f64>, labels: &[usize]) -> (f64, Vec<usize>) {
    (0..labels.len())
        .permutations(labels.len())
        .map(|p| (permuted_ce(table, labels, &p), p))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .expect("at least one permutation")
}

/// Identity-classification loss summed over videos.
pub fn consistency_loss(probs: &[Array2<f64>], labels: &[Vec<usize>]) -> Result<f64> {
    if probs.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} probability tables for {} label lists",
            probs.len(),
            labels.len()
        )));
    }
    let mut total = 0.0;
    for (u, (table, l)) in probs.iter().zip(labels).enumerate() {
        check_table(table, l, &format!("video {u}"))?;
        total += min_permuted_ce(table, l).0;
    }
    Ok(total)
}

/// L1 distance between each video's summed masks and its binary mask,
/// summed over videos.
pub fn cyclic_loss(masks: &[Vec<Mask>], ibm: &[Mask]) -> Result<f64> {
    if masks.len() != ibm.len() {
        return Err(Error::Shape(format!("{} mask sets for {} binary masks", masks.len(), ibm.len())));
    }
    let mut total = 0.0;
    for (set, target) in masks.iter().zip(ibm) {
        let mut sum = Array2::<f64>::zeros(target.dim());
        for m in set {
            if m.dim() != target.dim() {
                return Err(Error::Shape(format!(
                    "mask {:?} does not match binary mask {:?}",
                    m.dim(),
                    target.dim()
                )));
            }
            sum += m;
        }
        Zip::from(&sum).and(target).for_each(|a, b| total += (a - b).abs());
    }
    Ok(total)
}

/// Direction-classification loss. `tables[u][w]` holds the class
/// probabilities for video `u`, window `w`; `labels[u][w]` the matching
/// ground-truth classes.
pub fn dirpred_loss(
    tables: &[Vec<Array2<f64>>],
    labels: &[Vec<Vec<usize>>],
    scope: PermutationScope,
) -> Result<f64> {
    if tables.len() != labels.len() {
        return Err(Error::Shape(format!("{} videos of predictions for {} of labels", tables.len(), labels.len())));
    }
    let mut total = 0.0;
    for (u, (per_window, lab)) in tables.iter().zip(labels).enumerate() {
        if per_window.len() != lab.len() {
            return Err(Error::Shape(format!(
                "video {u}: {} windows of predictions for {} of labels",
                per_window.len(),
                lab.len()
            )));
        }
        for (w, (table, l)) in per_window.iter().zip(lab).enumerate() {
            if !matches!(table.ncols(), 10 | 28) {
                return Err(Error::invalid(format!(
                    "video {u} window {w}: direction tables need 10 or 28 classes, got {}",
                    table.ncols()
                )));
            }
            check_table(table, l, &format!("video {u} window {w}"))?;
        }
        let Some(first) = lab.first() else { continue };
        match scope {
            PermutationScope::PerWindow => {
                for (table, l) in per_window.iter().zip(lab) {
                    total += min_permuted_ce(table, l).0;
                }
            }
            PermutationScope::Shared => {
                if lab.iter().any(|l| l.len() != first.len()) {
                    return Err(Error::Shape(format!("video {u}: source count varies across windows")));
                }
                total += (0..first.len())
                    .permutations(first.len())
                    .map(|p| {
                        per_window
                            .iter()
                            .zip(lab)
                            .map(|(t, l)| permuted_ce(t, l, &p))
                            .sum::<f64>()
                    })
                    .fold(f64::INFINITY, f64::min);
            }
        }
    }
    Ok(total)
}

/// Central-difference gradient of `f` at `x`.
pub fn numeric_grad(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Result<Vec<f64>> {
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let up = f(&probe);
        probe[i] = x[i] - h;
        let down = f(&probe);
        probe[i] = x[i];
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::invalid(format!("function is not finite near coordinate {i}")));
        }
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}
