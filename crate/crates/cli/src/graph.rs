use std::path::Path;

use asmp_core::geometry::{multiscale_adjacency, rbf_adjacency, sparsity, DEFAULT_SPARSITY_EPS};
use asmp_core::motion::window_labels;
use asmp_core::scenegraph::{bundle_graphs, GraphConfig, NodeRecord, SceneGraph};
use asmp_core::tensorio::{load_bundle, write_array, write_json, ArrayFile};
use ndarray::Array2;
use serde::Serialize;

use crate::{CliResult, RunConfig};

pub const SWEEP: [f64; 3] = [25.0, 50.0, 75.0];

#[derive(Serialize)]
struct Multiscale {
    median: Vec<Vec<f64>>,
    max: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct WindowGraph {
    window: usize,
    frame: usize,
    sigma: f64,
    nodes: Vec<NodeRecord>,
    distances: Vec<Vec<f64>>,
    adjacency: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    multiscale: Option<Multiscale>,
}

#[derive(Serialize)]
struct GraphReport {
    config: GraphConfig,
    tau: f64,
    windows: Vec<WindowGraph>,
}

#[derive(Serialize)]
struct SweepPoint {
    percentile: f64,
    mean: f64,
    per_window: Vec<f64>,
}

#[derive(Serialize)]
struct SparsityReport {
    eps: f64,
    percentile: f64,
    sparsity: f64,
    sweep: Vec<SweepPoint>,
}

fn rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn sparsity_at(graphs: &[SceneGraph], percentile: f64) -> CliResult<SweepPoint> {
    let per_window = graphs
        .iter()
        .map(|g| Ok(sparsity(&rbf_adjacency(&g.distances, percentile)?, DEFAULT_SPARSITY_EPS)))
        .collect::<CliResult<Vec<f64>>>()?;
    let mean = per_window.iter().sum::<f64>() / per_window.len().max(1) as f64;
    Ok(SweepPoint {
        percentile,
        mean,
        per_window,
    })
}

pub fn run(run: &RunConfig, bundle_dir: &Path, out: &Path) -> CliResult<()> {
    let config = run.graph_config()?;
    let bundle = load_bundle(bundle_dir)?;
    run.check_window_frames(bundle.manifest.window_frames)?;
    let graphs = bundle_graphs(&bundle, &config)?;
    let labels = window_labels(&bundle, &graphs, run.tau)?;

    let mut windows = Vec::with_capacity(graphs.len());
    for (w, g) in graphs.iter().enumerate() {
        write_array(
            &ArrayFile::from_ndarray(&g.adjacency.0)?,
            out.join(format!("adjacency/window_{w:03}.a3mp")),
        )?;
        let multiscale = run.multiscale.then(|| {
            let (median, max) = multiscale_adjacency(&g.distances);
            Multiscale {
                median: rows(&median.0),
                max: rows(&max.0),
            }
        });
        windows.push(WindowGraph {
            window: w,
            frame: bundle.window_frames(w).0,
            sigma: g.sigma,
            nodes: g.node_records(),
            distances: rows(&g.distances.0),
            adjacency: rows(&g.adjacency.0),
            multiscale,
        });
    }
    write_json(
        &GraphReport {
            config,
            tau: run.tau,
            windows,
        },
        out.join("graph.json"),
    )?;
    write_json(&labels, out.join("labels.json"))?;

    let sweep = SWEEP
        .iter()
        .map(|&p| sparsity_at(&graphs, p))
        .collect::<CliResult<Vec<_>>>()?;
    let selected = sparsity_at(&graphs, config.percentile)?;
    write_json(
        &SparsityReport {
            eps: DEFAULT_SPARSITY_EPS,
            percentile: config.percentile,
            sparsity: selected.mean,
            sweep,
        },
        out.join("sparsity.json"),
    )?;
    println!(
        "wrote {} graphs and {} labels to {}",
        graphs.len(),
        labels.len(),
        out.display()
    );
    Ok(())
}
