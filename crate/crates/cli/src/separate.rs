use std::path::{Path, PathBuf};

use asmp_core::audio::{
    fit_length, ibm, mix, pool_frequency, pooled_magnitude, separate_with_mask, stft, Mask, StftConfig,
    DEFAULT_CLIP_LEN, DEFAULT_HOP, DEFAULT_WIN,
};
use asmp_core::neural::{forward_video, NetConfig, NetParams};
use asmp_core::scenegraph::bundle_graphs;
use asmp_core::tensorio::{load_bundle, write_array, write_json, write_wav, ArrayFile, AudioClip, SceneBundle};
use ndarray::{Array2, Zip};

use crate::report::{
    DirectionPrediction, EstimateReport, NetworkReport, SeparationReport, VideoReport, REPORT_FILE,
};
use crate::{CliError, CliResult, Mode, RunConfig};

fn save_matrix(out: &Path, rel: String, a: &Array2<f64>) -> CliResult<PathBuf> {
    let rel = PathBuf::from(rel);
    write_array(&ArrayFile::from_ndarray(a)?, out.join(&rel))?;
    Ok(rel)
}

fn save_wav(out: &Path, rel: String, clip: &AudioClip) -> CliResult<PathBuf> {
    let rel = PathBuf::from(rel);
    write_wav(clip, out.join(&rel))?;
    Ok(rel)
}

/// Source `k` belongs to object track `k` when a detection carries it.
fn source_track(bundle: &SceneBundle, k: usize) -> Option<usize> {
    bundle
        .detections
        .values()
        .flatten()
        .any(|d| d.track == Some(k))
        .then_some(k)
}

/// Splits a video's binary mask among its sources: each bin goes to the
/// loudest source (first on ties), so the masks sum to `video_ibm`.
fn oracle_masks(video_ibm: &Mask, sources: &[Array2<f64>]) -> Vec<Mask> {
    let mut masks = vec![Array2::zeros(video_ibm.dim()); sources.len()];
    for ((r, c), &on) in video_ibm.indexed_iter() {
        if on == 0.0 {
            continue;
        }
        let mut best = 0;
        for k in 1..sources.len() {
            if sources[k][[r, c]] > sources[best][[r, c]] {
                best = k;
            }
        }
        masks[best][[r, c]] = on;
    }
    masks
}

pub fn run(run: &RunConfig, a: &Path, b: &Path, out: &Path) -> CliResult<()> {
    let config = StftConfig::new(DEFAULT_WIN, DEFAULT_HOP)?;
    let bundles = [load_bundle(a)?, load_bundle(b)?];
    for bundle in &bundles {
        run.check_window_frames(bundle.manifest.window_frames)?;
    }
    let videos: Vec<AudioClip> = bundles.iter().map(|b| fit_length(&b.mixture, DEFAULT_CLIP_LEN)).collect();
    let mixture = mix(&videos)?;
    let mix_spec = stft(&mixture, config)?;
    let mix_pooled = pool_frequency(&mix_spec.magnitude())?;
    let video_mags = videos
        .iter()
        .map(|v| pooled_magnitude(v, config))
        .collect::<asmp_core::Result<Vec<_>>>()?;
    let mixture_rel = save_wav(out, "mixture.wav".into(), &mixture)?;

    let scheme = run.scheme()?;
    let net = match run.mode {
        Mode::Oracle => None,
        Mode::Network => {
            let mut classes: Vec<u32> = bundles.iter().flat_map(|b| b.manifest.auditory_classes.clone()).collect();
            classes.sort_unstable();
            classes.dedup();
            let params = NetParams::init(NetConfig::new(classes.len() + 1, scheme.classes())?, run.seed());
            Some((params, classes))
        }
    };
    let graph_config = run.graph_config()?;

    let mut reports = Vec::with_capacity(2);
    for (u, bundle) in bundles.iter().enumerate() {
        let references: Vec<AudioClip> = bundle.sources.iter().map(|s| fit_length(s, DEFAULT_CLIP_LEN)).collect();
        let mut reference_paths = Vec::with_capacity(references.len());
        for (k, r) in references.iter().enumerate() {
            reference_paths.push(save_wav(out, format!("references/v{u}_s{k}.wav"), r)?);
        }
        let video_ibm = ibm(&video_mags[u], &video_mags[1 - u])?;
        let ibm_rel = save_matrix(out, format!("masks/v{u}_ibm.a3mp"), &video_ibm)?;

        let (masks, estimates, network) = match &net {
            None => {
                let source_mags = references
                    .iter()
                    .map(|s| pooled_magnitude(s, config))
                    .collect::<asmp_core::Result<Vec<_>>>()?;
                let masks = oracle_masks(&video_ibm, &source_mags);
                let estimates = (0..masks.len())
                    .map(|k| (k, source_track(bundle, k), false))
                    .collect::<Vec<_>>();
                (masks, estimates, None)
            }
            Some((params, classes)) => {
                let graphs = bundle_graphs(bundle, &graph_config)?;
                let graph = &graphs[0];
                let windows = bundle.window_count();
                let fwd = forward_video(params, graph, &mix_pooled, windows)?;
                let auditory = graph.auditory_index.len();
                let wanted = references.len();
                if wanted != auditory && wanted != auditory + 1 {
                    return Err(CliError::Usage(format!(
                        "video {u} has {wanted} sources but {auditory} auditory objects"
                    )));
                }
                let mut estimates: Vec<(usize, Option<usize>, bool)> =
                    (0..auditory).map(|i| (i, graph.nodes[graph.auditory_index[i]].track, false)).collect();
                if wanted > auditory {
                    estimates.push((auditory, None, true));
                }
                let background = classes.len();
                let mut class_labels: Vec<usize> = graph
                    .auditory_index
                    .iter()
                    .map(|&i| {
                        let label = graph.nodes[i].label.expect("auditory nodes are labelled");
                        classes.binary_search(&label).expect("label from the catalog")
                    })
                    .collect();
                class_labels.push(background);
                let mut directions = Vec::new();
                let mut direction_paths = Vec::with_capacity(windows);
                for (w, probs) in fwd.direction_probs.iter().enumerate() {
                    direction_paths.push(save_matrix(out, format!("network/v{u}_dir_w{w:03}.a3mp"), probs)?);
                    for i in 0..auditory {
                        let row = probs.row(i);
                        let class = (0..row.len()).fold(0, |best, c| if row[c] > row[best] { c } else { best });
                        directions.push(DirectionPrediction {
                            window: w,
                            node: i,
                            track: graph.nodes[graph.auditory_index[i]].track,
                            class,
                        });
                    }
                }
                let network = NetworkReport {
                    auditory,
                    embeddings: save_matrix(out, format!("network/v{u}_embeddings.a3mp"), &fwd.embeddings)?,
                    class_probs: save_matrix(out, format!("network/v{u}_class_probs.a3mp"), &fwd.class_probs)?,
                    class_labels,
                    direction_probs: direction_paths,
                    directions,
                };
                (fwd.masks, estimates, Some(network))
            }
        };

        let mut mask_paths = Vec::with_capacity(masks.len());
        let mut separated_paths = Vec::with_capacity(masks.len());
        for (i, m) in masks.iter().enumerate() {
            mask_paths.push(save_matrix(out, format!("masks/v{u}_m{i}.a3mp"), m)?);
            let mut s = Array2::zeros(m.dim());
            Zip::from(&mut s).and(m).and(&mix_pooled).for_each(|s, &m, &x| *s = m * x);
            separated_paths.push(save_matrix(out, format!("separated/v{u}_m{i}.a3mp"), &s)?);
        }
        let mut estimate_reports = Vec::with_capacity(estimates.len());
        for (mask, track, background) in estimates {
            let clip = separate_with_mask(&masks[mask], &mix_spec)?;
            estimate_reports.push(EstimateReport {
                wav: save_wav(out, format!("estimates/v{u}_e{mask}.wav"), &clip)?,
                mask,
                track,
                background,
            });
        }
        reports.push(VideoReport {
            bundle: std::fs::canonicalize(&bundle.root).unwrap_or_else(|_| bundle.root.clone()),
            windows: bundle.window_count(),
            ibm: ibm_rel,
            references: reference_paths,
            masks: mask_paths,
            separated: separated_paths,
            estimates: estimate_reports,
            network,
        });
    }

    let report = SeparationReport {
        mode: run.mode,
        seed: run.seed(),
        rate: mixture.rate,
        clip_len: DEFAULT_CLIP_LEN,
        direction_classes: scheme.classes(),
        mixture: mixture_rel,
        videos: reports,
    };
    write_json(&report, out.join(REPORT_FILE))?;
    println!("wrote {} separation to {}", match run.mode {
        Mode::Oracle => "oracle",
        Mode::Network => "network",
    }, out.display());
    Ok(())
}
