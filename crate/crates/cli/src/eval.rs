use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use asmp_core::metrics::{best_permutation_bss, bss_eval, direction_accuracy, majority_vote_accuracy, BssResult};
use asmp_core::motion::DisplacementLabel;
use asmp_core::tensorio::{read_json, write_atomic, write_json, GroundTruthLabel, Manifest, MANIFEST_FILE};
use serde::Serialize;

use crate::report::{self, SeparationReport};
use crate::{CliError, CliResult};

#[derive(Debug, Default, Serialize)]
struct Row {
    kind: &'static str,
    name: String,
    estimate: Option<String>,
    sdr: Option<f64>,
    sir: Option<f64>,
    sar: Option<f64>,
    baseline_sdr: Option<f64>,
    accuracy10: Option<f64>,
    accuracy28: Option<f64>,
}

#[derive(Debug, Serialize)]
struct PairScore {
    reference: String,
    estimate: String,
    #[serde(flatten)]
    result: BssResult,
    baseline_sdr: f64,
}

#[derive(Debug, Default, Serialize)]
struct DirectionSummary {
    compared: usize,
    mismatches10: Option<usize>,
    mismatches28: Option<usize>,
    accuracy10: Option<f64>,
    accuracy28: Option<f64>,
    majority10: Option<(usize, f64)>,
    majority28: Option<(usize, f64)>,
}

#[derive(Debug, Serialize)]
struct MetricsReport {
    pairs: Vec<PairScore>,
    mean_sdr: f64,
    mean_baseline_sdr: f64,
    direction: Option<DirectionSummary>,
}

type Key = (usize, usize, usize);

#[derive(Default)]
struct Classes {
    c10: Option<usize>,
    c28: Option<usize>,
}

fn ground_truth(bundle: &Path) -> CliResult<Option<Vec<GroundTruthLabel>>> {
    let manifest: Manifest = read_json(bundle.join(MANIFEST_FILE))?;
    match manifest.ground_truth {
        Some(rel) => Ok(Some(read_json(bundle.join(rel))?)),
        None => Ok(None),
    }
}

fn from_labels(labels: &[Vec<DisplacementLabel>]) -> BTreeMap<Key, Classes> {
    let mut out = BTreeMap::new();
    for (u, list) in labels.iter().enumerate() {
        for l in list.iter().filter(|l| !l.background) {
            if let Some(t) = l.track {
                out.insert((u, l.window, t), Classes { c10: Some(l.class10), c28: Some(l.class28) });
            }
        }
    }
    out
}

fn directions(
    report: &SeparationReport,
    labels: Option<&[Vec<DisplacementLabel>]>,
) -> CliResult<Option<DirectionSummary>> {
    let mut truth: BTreeMap<Key, Classes> = BTreeMap::new();
    let mut have_truth = true;
    for (u, v) in report.videos.iter().enumerate() {
        match ground_truth(&v.bundle)? {
            Some(gt) => {
                for g in gt {
                    if let Some(t) = g.track {
                        truth.insert((u, g.window, t), Classes { c10: Some(g.class10), c28: Some(g.class28) });
                    }
                }
            }
            None => have_truth = false,
        }
    }
    if !have_truth {
        match labels {
            Some(l) => truth = from_labels(l),
            None => return Ok(None),
        }
    }
    if truth.is_empty() {
        return Ok(None);
    }

    let predictions: Option<BTreeMap<Key, Classes>> = if report.videos.iter().all(|v| v.network.is_some()) {
        let mut out = BTreeMap::new();
        for (u, v) in report.videos.iter().enumerate() {
            for d in &v.network.as_ref().expect("checked").directions {
                if let Some(t) = d.track {
                    let c = match report.direction_classes {
                        10 => Classes { c10: Some(d.class), c28: None },
                        _ => Classes { c10: None, c28: Some(d.class) },
                    };
                    out.insert((u, d.window, t), c);
                }
            }
        }
        Some(out)
    } else {
        labels.map(from_labels)
    };

    let mut summary = DirectionSummary {
        compared: truth.len(),
        ..DirectionSummary::default()
    };
    let t10: Vec<usize> = truth.values().filter_map(|c| c.c10).collect();
    let t28: Vec<usize> = truth.values().filter_map(|c| c.c28).collect();
    summary.majority10 = majority_vote_accuracy(&t10).ok();
    summary.majority28 = majority_vote_accuracy(&t28).ok();
    if let Some(pred) = predictions {
        let collect = |pick: fn(&Classes) -> Option<usize>| -> Option<(Vec<usize>, Vec<usize>)> {
            if !pred.values().any(|c| pick(c).is_some()) {
                return None;
            }
            let mut p = Vec::new();
            let mut t = Vec::new();
            for (k, c) in &truth {
                let Some(tc) = pick(c) else { continue };
                // A missing prediction counts as wrong.
                p.push(pred.get(k).and_then(pick).unwrap_or(usize::MAX));
                t.push(tc);
            }
            Some((p, t))
        };
        if let Some((p, t)) = collect(|c| c.c10) {
            summary.accuracy10 = Some(direction_accuracy(&p, &t)?);
            summary.mismatches10 = Some(p.iter().zip(&t).filter(|(a, b)| a != b).count());
        }
        if let Some((p, t)) = collect(|c| c.c28) {
            summary.accuracy28 = Some(direction_accuracy(&p, &t)?);
            summary.mismatches28 = Some(p.iter().zip(&t).filter(|(a, b)| a != b).count());
        }
    }
    Ok(Some(summary))
}

pub fn run(dir: &Path, label_paths: &[PathBuf], out: &Path) -> CliResult<()> {
    let report = report::load(dir)?;
    let labels = report::load_labels(label_paths, report.videos.len())?;

    let mut references = Vec::new();
    let mut reference_names = Vec::new();
    let mut estimates = Vec::new();
    let mut estimate_names = Vec::new();
    for (u, v) in report.videos.iter().enumerate() {
        for (k, r) in v.references.iter().enumerate() {
            references.push(report::samples(dir, r)?);
            reference_names.push(format!("v{u}_s{k}"));
        }
        for e in &v.estimates {
            estimates.push(report::samples(dir, &e.wav)?);
            estimate_names.push(format!("v{u}_e{}", e.mask));
        }
    }
    if references.is_empty() {
        return Err(CliError::Usage("separation has no reference sources".into()));
    }
    let mixture = report::samples(dir, &report.mixture)?;
    let assignment = best_permutation_bss(&estimates, &references)?;
    let mut pairs = Vec::with_capacity(references.len());
    for (j, result) in assignment.results.iter().enumerate() {
        let baseline = bss_eval(&mixture, &references, j)?;
        pairs.push(PairScore {
            reference: reference_names[j].clone(),
            estimate: estimate_names[assignment.estimate_for[j]].clone(),
            result: *result,
            baseline_sdr: baseline.sdr,
        });
    }
    let n = pairs.len() as f64;
    let mean_sdr = assignment.mean_sdr();
    let mean_baseline_sdr = pairs.iter().map(|p| p.baseline_sdr).sum::<f64>() / n;
    let direction = directions(&report, labels.as_deref())?;

    let mut rows: Vec<Row> = pairs
        .iter()
        .map(|p| Row {
            kind: "separation",
            name: p.reference.clone(),
            estimate: Some(p.estimate.clone()),
            sdr: Some(p.result.sdr),
            sir: Some(p.result.sir),
            sar: Some(p.result.sar),
            baseline_sdr: Some(p.baseline_sdr),
            ..Row::default()
        })
        .collect();
    rows.push(Row {
        kind: "separation",
        name: "mean".into(),
        sdr: Some(mean_sdr),
        sir: Some(pairs.iter().map(|p| p.result.sir).sum::<f64>() / n),
        sar: Some(pairs.iter().map(|p| p.result.sar).sum::<f64>() / n),
        baseline_sdr: Some(mean_baseline_sdr),
        ..Row::default()
    });
    if let Some(d) = &direction {
        if d.accuracy10.is_some() || d.accuracy28.is_some() {
            rows.push(Row {
                kind: "direction",
                name: "predicted".into(),
                accuracy10: d.accuracy10,
                accuracy28: d.accuracy28,
                ..Row::default()
            });
        }
        rows.push(Row {
            kind: "direction",
            name: "majority_vote".into(),
            accuracy10: d.majority10.map(|m| m.1),
            accuracy28: d.majority28.map(|m| m.1),
            ..Row::default()
        });
    }

    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in &rows {
        writer
            .serialize(row)
            .map_err(|e| CliError::Usage(format!("csv: {e}")))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| CliError::Usage(format!("csv: {e}")))?;
    write_atomic(out, &bytes)?;
    write_json(
        &MetricsReport {
            pairs,
            mean_sdr,
            mean_baseline_sdr,
            direction,
        },
        out.with_extension("json"),
    )?;
    println!("mean SDR {mean_sdr:.2} dB written to {}", out.display());
    Ok(())
}
