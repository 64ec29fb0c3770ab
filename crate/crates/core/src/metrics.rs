//! Whole-signal BSS evaluation (SDR, SIR, SAR) and direction accuracy.

use std::collections::BTreeMap;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ratios are clamped to `±DB_CAP` so reports stay numeric.
pub const DB_CAP: f64 = 300.0;
/// Smallest eigenvalue of the normalized reference Gram matrix, relative to
/// the largest, below which the reference set counts as rank deficient.
pub const MIN_CONDITION: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub s_target: Vec<f64>,
    pub e_interf: Vec<f64>,
    pub e_artif: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BssResult {
    pub sdr: f64,
    pub sir: f64,
    pub sar: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn energy(a: &[f64]) -> f64 {
    dot(a, a)
}

/// Splits `estimate` into the part explained by `references[target]`, the
/// part explained by the other references, and the unexplained rest.
pub fn bss_decompose(
    estimate: &[f64],
    references: &[Vec<f64>],
    target: usize,
) -> Result<Decomposition> {
    let n = references.len();
    if target >= n {
        return Err(Error::invalid(format!("target {target} out of range for {n} references")));
    }
    let len = estimate.len();
    if let Some(r) = references.iter().find(|r| r.len() != len) {
        return Err(Error::Shape(format!(
            "reference of {} samples vs estimate of {len}",
            r.len()
        )));
    }
    let gram = DMatrix::from_fn(n, n, |i, j| dot(&references[i], &references[j]));
    if (0..n).any(|i| gram[(i, i)] == 0.0) {
        return Err(Error::invalid("zero-energy reference"));
    }
    let scale = DVector::from_fn(n, |i, _| 1.0 / gram[(i, i)].sqrt());
    let normalized = DMatrix::from_fn(n, n, |i, j| gram[(i, j)] * scale[i] * scale[j]);
    let eig = normalized.clone().symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    if lo <= MIN_CONDITION * hi {
        return Err(Error::RankDeficient);
    }
    let rhs = DVector::from_fn(n, |i, _| dot(&references[i], estimate) * scale[i]);
    let coef = normalized
        .cholesky()
        .ok_or(Error::RankDeficient)?
        .solve(&rhs);

    let tref = &references[target];
    let alpha = dot(estimate, tref) / gram[(target, target)];
    let s_target: Vec<f64> = tref.iter().map(|v| alpha * v).collect();
    let mut proj = vec![0.0; len];
    for (i, r) in references.iter().enumerate() {
        let c = coef[i] * scale[i];
        for (p, v) in proj.iter_mut().zip(r) {
            *p += c * v;
        }
    }
    let e_interf = proj.iter().zip(&s_target).map(|(p, s)| p - s).collect();
    let e_artif = estimate.iter().zip(&proj).map(|(e, p)| e - p).collect();
    Ok(Decomposition {
        s_target,
        e_interf,
        e_artif,
    })
}

fn ratio_db(num: f64, den: f64) -> f64 {
    if num <= 0.0 {
        -DB_CAP
    } else if den <= 0.0 {
        DB_CAP
    } else {
        (10.0 * (num / den).log10()).clamp(-DB_CAP, DB_CAP)
    }
}

impl BssResult {
    /// The distortion energy is taken as `‖e_interf‖² + ‖e_artif‖²`, equal to
    /// `‖e_interf + e_artif‖²` because the two parts are orthogonal; this
    /// keeps `sir >= sdr` exact in floating point.
    pub fn from_decomposition(d: &Decomposition) -> Self {
        let target = energy(&d.s_target);
        let interf = energy(&d.e_interf);
        let artif = energy(&d.e_artif);
        let explained: Vec<f64> = d.s_target.iter().zip(&d.e_interf).map(|(a, b)| a + b).collect();
        Self {
            sdr: ratio_db(target, interf + artif),
            sir: ratio_db(target, interf),
            sar: if target <= 0.0 {
                -DB_CAP
            } else {
                ratio_db(energy(&explained), artif)
            },
        }
    }
}

pub fn bss_eval(estimate: &[f64], references: &[Vec<f64>], target: usize) -> Result<BssResult> {
    Ok(BssResult::from_decomposition(&bss_decompose(estimate, references, target)?))
}

/// Best pairing of estimates to references.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BssAssignment {
    /// `estimate_for[j]` is the estimate matched to reference `j`.
    pub estimate_for: Vec<usize>,
    /// Scores indexed by reference.
    pub results: Vec<BssResult>,
}

impl BssAssignment {
    pub fn mean_sdr(&self) -> f64 {
        self.results.iter().map(|r| r.sdr).sum::<f64>() / self.results.len() as f64
    }
}

/// Scores every assignment of estimates to references and keeps the one
/// with the highest mean SDR.
pub fn best_permutation_bss(
    estimates: &[Vec<f64>],
    references: &[Vec<f64>],
) -> Result<BssAssignment> {
    let n = references.len();
    if estimates.len() != n {
        return Err(Error::Shape(format!(
            "{} estimates for {n} references",
            estimates.len()
        )));
    }
    if n == 0 {
        return Err(Error::Empty("no references to evaluate"));
    }
    let table: Vec<Vec<BssResult>> = estimates
        .par_iter()
        .map(|e| (0..n).map(|j| bss_eval(e, references, j)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let mut best: Option<(f64, Vec<usize>)> = None;
    for perm in (0..n).permutations(n) {
        let score: f64 = perm.iter().enumerate().map(|(j, &i)| table[i][j].sdr).sum();
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, perm));
        }
    }
    let (_, estimate_for) = best.expect("n >= 1");
    let results = estimate_for.iter().enumerate().map(|(j, &i)| table[i][j]).collect();
    Ok(BssAssignment {
        estimate_for,
        results,
    })
}

/// Percentage of positions where `preds` equals `labels`.
pub fn direction_accuracy(preds: &[usize], labels: &[usize]) -> Result<f64> {
    if preds.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            preds.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::Empty("no direction labels"));
    }
    let hits = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(100.0 * hits as f64 / labels.len() as f64)
}

/// Most frequent label (lowest class on ties).
pub fn modal_label(labels: &[usize]) -> Result<usize> {
    let mut counts = BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_insert(0usize) += 1;
    }
    counts
        .into_iter()
        .rev()
        .max_by_key(|&(_, c)| c)
        .map(|(l, _)| l)
        .ok_or(Error::Empty("no direction labels"))
}

/// Accuracy of always predicting the modal label.
pub fn majority_vote_accuracy(labels: &[usize]) -> Result<(usize, f64)> {
    let mode = modal_label(labels)?;
    let preds = vec![mode; labels.len()];
    Ok((mode, direction_accuracy(&preds, labels)?))
}
