//! Acceptance suite. Every criterion prints one PASS or FAIL line; the
//! process exits non-zero when any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use asmp_core::audio::{
    ibm, istft, mix, pooled_magnitude, separate_with_mask, stft, StftConfig, DEFAULT_CLIP_LEN, DEFAULT_HOP,
    DEFAULT_WIN,
};
use asmp_core::geometry::{
    chamfer, icp_align, rbf_adjacency, sparsity, DistanceMatrix, Point3, PointCloud, SimilarityTransform,
    DEFAULT_SPARSITY_EPS,
};
use asmp_core::losses::{
    consistency_loss, cyclic_loss, dirpred_loss, ortho_loss, ortho_loss_grad, ortho_penalty, PermutationScope,
};
use asmp_core::metrics::{bss_decompose, bss_eval, BssResult, DB_CAP};
use asmp_core::motion::{direction_templates, quantize10, quantize28, window_labels, Displacement};
use asmp_core::neural::{
    edgeconv_forward, forward_video, gat_forward, gru_rollout, mask_decoder_forward, NetConfig, NetParams,
    EMBED_DIM, POOLED_DIM, SPEC_SIZE,
};
use asmp_core::scenegraph::{bundle_graphs, GraphConfig, FEATURE_DIM};
use asmp_core::synth::{gen_audio, gen_scene, random_spec, SynthSpec};
use asmp_core::tensorio::{AudioClip, GroundTruthLabel};
use nalgebra::{Rotation3, Unit, Vector3};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn random_cloud(rng: &mut ChaCha8Rng, n: usize) -> PointCloud {
    PointCloud::new(
        (0..n)
            .map(|_| Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-0.6..0.6), rng.random_range(-0.3..0.3)))
            .collect(),
    )
}

fn brute_chamfer(a: &PointCloud, b: &PointCloud) -> f64 {
    let directed = |x: &PointCloud, y: &PointCloud| {
        let mut total = 0.0;
        for p in &x.points {
            let mut best = f64::INFINITY;
            for q in &y.points {
                let d = (p.x - q.x).powi(2) + (p.y - q.y).powi(2) + (p.z - q.z).powi(2);
                best = best.min(d);
            }
            total += best.sqrt();
        }
        total / x.points.len() as f64
    };
    0.5 * (directed(a, b) + directed(b, a))
}

fn criterion1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst_chamfer: f64 = 0.0;
    for _ in 0..50 {
        let (na, nb) = (rng.random_range(5..200), rng.random_range(5..200));
        let a = random_cloud(&mut rng, na);
        let b = random_cloud(&mut rng, nb);
        let got = ok(chamfer(&a, &b))?;
        worst_chamfer = worst_chamfer.max((got - brute_chamfer(&a, &b)).abs());
    }
    ensure(worst_chamfer <= 1e-12, || format!("chamfer deviation {worst_chamfer:e}"))?;

    let (mut rot, mut scale, mut trans) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..20 {
        let src = random_cloud(&mut rng, 80);
        let axis = Unit::new_normalize(Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ));
        let truth = SimilarityTransform {
            rotation: *Rotation3::from_axis_angle(&axis, rng.random_range(-3.0..3.0)).matrix(),
            scale: rng.random_range(0.5..2.0),
            translation: Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
        };
        let reference = PointCloud::new(
            src.points
                .iter()
                .map(|p| Point3::from(truth.scale * (truth.rotation * p.coords) + truth.translation))
                .collect(),
        );
        let r = icp_align(&src, &reference, 100, 1e-14);
        let t = r.transform;
        let fro = (t.rotation - truth.rotation).norm();
        // ‖R₁ − R₂‖_F = 2√2·sin(θ/2)
        rot = rot.max(2.0 * (fro / (2.0 * 2f64.sqrt())).min(1.0).asin());
        scale = scale.max((t.scale - truth.scale).abs());
        trans = trans.max((t.translation - truth.translation).norm());
    }
    ensure(rot < 1e-6 && scale < 1e-9 && trans < 1e-9, || {
        format!("icp rotation {rot:e} rad, scale {scale:e}, translation {trans:e}")
    })?;
    Ok(format!(
        "chamfer max dev {worst_chamfer:.1e}; icp max rotation {rot:.1e} rad, scale {scale:.1e}, translation {trans:.1e}"
    ))
}

fn criterion2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut summary = Vec::new();
    for case in 0..10 {
        let n = rng.random_range(4..12);
        let mut raw = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..i {
                let v = rng.random_range(0.01..5.0);
                raw[[i, j]] = v;
                raw[[j, i]] = v;
            }
        }
        let d = ok(DistanceMatrix::normalized(raw))?;
        let s: Vec<f64> = [25.0, 50.0, 75.0]
            .iter()
            .map(|&p| Ok(sparsity(&ok(rbf_adjacency(&d, p))?, DEFAULT_SPARSITY_EPS)))
            .collect::<Result<_, String>>()?;
        ensure(s[0] >= s[1] && s[1] >= s[2], || format!("case {case}: sparsity {s:?} increases"))?;
        summary.push(s[0] - s[2]);
    }
    let drop = summary.iter().sum::<f64>() / summary.len() as f64;
    Ok(format!("10 matrices non-increasing, mean drop 25->75 {drop:.3}"))
}

fn orthonormal_rows(rng: &mut ChaCha8Rng, k: usize, dim: usize) -> Array2<f64> {
    let mut y = Array2::<f64>::zeros((k, dim));
    for i in 0..k {
        let mut v = Array1::from_shape_simple_fn(dim, || rng.random_range(-1.0..1.0));
        for j in 0..i {
            let prev = y.row(j).to_owned();
            let proj = v.dot(&prev);
            v.scaled_add(-proj, &prev);
        }
        let n = v.dot(&v).sqrt();
        y.row_mut(i).assign(&(v / n));
    }
    y
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for slot in 0..n {
            let mut q = p.clone();
            q.insert(slot, n - 1);
            out.push(q);
        }
    }
    out
}

fn random_table(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    let mut t = Array2::from_shape_fn((rows, cols), |_| rng.random_range(0.01..1.0));
    for mut r in t.rows_mut() {
        let s = r.sum();
        r.mapv_inplace(|v| v / s);
    }
    t
}

fn factorial_ce(table: &Array2<f64>, labels: &[usize]) -> f64 {
    permutations(labels.len())
        .iter()
        .map(|p| {
            p.iter()
                .enumerate()
                .map(|(i, &j)| -table[[i, labels[j]]].max(1e-12).ln())
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}

fn tone(freq: f64, len: usize, amp: f64) -> AudioClip {
    let samples = (0..len)
        .map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / 11025.0).sin())
        .collect();
    AudioClip::new(samples, 11025).unwrap()
}

fn criterion3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for k in 2..=5 {
        let y = orthonormal_rows(&mut rng, k, EMBED_DIM);
        let l = ok(ortho_loss(&y))?;
        ensure(l.abs() <= 1e-9, || format!("orthonormal set of {k} gives {l:e}"))?;
    }
    let u = orthonormal_rows(&mut rng, 1, EMBED_DIM);
    let pair = ndarray::concatenate![ndarray::Axis(0), u.view(), u.view()];
    let same = ok(ortho_loss(&pair))?;
    ensure((same - 2.0).abs() <= 1e-9, || format!("identical pair gives {same}"))?;

    let mut worst_rel: f64 = 0.0;
    for _ in 0..20 {
        let (k, dim) = (rng.random_range(2..5), rng.random_range(3..9));
        let y = Array2::from_shape_fn((k, dim), |_| rng.random_range(-1.0..1.0));
        let g = ortho_loss_grad(&y);
        let h = 1e-6;
        let mut num = Array2::zeros((k, dim));
        for i in 0..k {
            for j in 0..dim {
                let (mut a, mut b) = (y.clone(), y.clone());
                a[[i, j]] += h;
                b[[i, j]] -= h;
                num[[i, j]] = (ortho_penalty(&a) - ortho_penalty(&b)) / (2.0 * h);
            }
        }
        let rel = (&g - &num).mapv(|v| v * v).sum().sqrt() / num.mapv(|v| v * v).sum().sqrt().max(1e-300);
        worst_rel = worst_rel.max(rel);
    }
    ensure(worst_rel <= 1e-5, || format!("gradient relative error {worst_rel:e}"))?;

    for sources in 1..=3 {
        for _ in 0..10 {
            let classes = 5;
            let tables: Vec<Array2<f64>> = (0..2).map(|_| random_table(&mut rng, sources, classes)).collect();
            let labels: Vec<Vec<usize>> =
                (0..2).map(|_| (0..sources).map(|_| rng.random_range(0..classes)).collect()).collect();
            let want: f64 = tables.iter().zip(&labels).map(|(t, l)| factorial_ce(t, l)).sum();
            let got = ok(consistency_loss(&tables, &labels))?;
            ensure(got == want, || format!("consistency {got} vs oracle {want}"))?;

            let windows = 3;
            let dir_tables: Vec<Vec<Array2<f64>>> =
                (0..2).map(|_| (0..windows).map(|_| random_table(&mut rng, sources, 10)).collect()).collect();
            let dir_labels: Vec<Vec<Vec<usize>>> = (0..2)
                .map(|_| (0..windows).map(|_| (0..sources).map(|_| rng.random_range(0..10)).collect()).collect())
                .collect();
            let want: f64 = dir_tables
                .iter()
                .zip(&dir_labels)
                .flat_map(|(ts, ls)| ts.iter().zip(ls).map(|(t, l)| factorial_ce(t, l)))
                .sum();
            let got = ok(dirpred_loss(&dir_tables, &dir_labels, PermutationScope::PerWindow))?;
            ensure(got == want, || format!("dirpred {got} vs oracle {want}"))?;
        }
    }

    let config = ok(StftConfig::new(DEFAULT_WIN, DEFAULT_HOP))?;
    let a = tone(440.0, 20000, 0.4);
    let b = tone(880.0, 20000, 0.3);
    let (ma, mb) = (ok(pooled_magnitude(&a, config))?, ok(pooled_magnitude(&b, config))?);
    let (ia, ib) = (ok(ibm(&ma, &mb))?, ok(ibm(&mb, &ma))?);
    let cyc = ok(cyclic_loss(&[vec![ia.clone()], vec![ib.clone()]], &[ia, ib]))?;
    ensure(cyc == 0.0, || format!("cyclic loss of oracle masks {cyc}"))?;
    Ok(format!("ortho identities hold, gradient rel err {worst_rel:.1e}, enumeration oracles exact, cyc 0"))
}

/// Independent codebook: all non-zero {-1,0,1}³ directions grouped by the
/// number of non-zero components, lexicographic inside each group.
fn oracle_codebook() -> Vec<[f64; 3]> {
    let mut dirs = Vec::new();
    for nonzero in 1..=3 {
        for code in 0..27 {
            let v = [(code / 9) as f64 - 1.0, ((code / 3) % 3) as f64 - 1.0, (code % 3) as f64 - 1.0];
            if v.iter().filter(|c| **c != 0.0).count() == nonzero {
                dirs.push(v);
            }
        }
    }
    dirs
}

fn oracle_scan(d: &[f64; 3], book: &[[f64; 3]]) -> (usize, f64) {
    let norm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    let mut cos: Vec<(usize, f64)> = book
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let tn = (t[0] * t[0] + t[1] * t[1] + t[2] * t[2]).sqrt();
            (i, (d[0] * t[0] + d[1] * t[1] + d[2] * t[2]) / (norm * tn))
        })
        .collect();
    cos.sort_by(|a, b| b.1.total_cmp(&a.1));
    (cos[0].0, cos[0].1 - cos[1].1)
}

fn criterion4() -> Outcome {
    let tau = 0.02;
    for (k, t) in direction_templates().iter().enumerate() {
        ensure(quantize28(t, tau, false) == k, || format!("template {k} misclassified"))?;
    }
    let book = oracle_codebook();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let (mut mismatches, mut perturbed, mut scale_breaks) = (0usize, 0usize, 0usize);
    for _ in 0..100_000 {
        let mut d;
        loop {
            d = [rng.random_range(-1.0f64..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            if !(1e-3..=1.0).contains(&n) {
                continue;
            }
            d = [d[0] / n, d[1] / n, d[2] / n];
            if oracle_scan(&d, &book).1 > 1e-9 {
                break;
            }
            perturbed += 1;
        }
        let v = Displacement::new(d[0], d[1], d[2]);
        let want = oracle_scan(&d, &book).0;
        if quantize28(&v, tau, false) != want {
            mismatches += 1;
        }
        let octant = usize::from(d[0] >= 0.0) + 2 * usize::from(d[1] >= 0.0) + 4 * usize::from(d[2] >= 0.0);
        if quantize10(&v, tau, false) != octant {
            mismatches += 1;
        }
        let c = rng.random_range(tau..50.0);
        if quantize28(&(v * c), tau, false) != want || quantize10(&(v * c), tau, false) != octant {
            scale_breaks += 1;
        }
    }
    ensure(mismatches == 0 && scale_breaks == 0, || {
        format!("{mismatches} oracle mismatches, {scale_breaks} scale-invariance breaks")
    })?;
    Ok(format!("26 templates self-map; 1e5 samples, 0 mismatches, 0 scale breaks ({perturbed} redrawn near ties)"))
}

fn interior_error(x: &[f64], y: &[f64], margin: usize) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for i in margin..x.len() - margin {
        num += (x[i] - y[i]).powi(2);
        den += x[i] * x[i];
    }
    (num / den).sqrt()
}

fn criterion5() -> Outcome {
    let config = ok(StftConfig::new(DEFAULT_WIN, DEFAULT_HOP))?;
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let noise = AudioClip::new(
        (0..DEFAULT_CLIP_LEN).map(|_| rng.random_range(-0.5..0.5)).collect(),
        11025,
    )
    .unwrap();
    let mut worst: f64 = 0.0;
    for clip in [tone(440.0, DEFAULT_CLIP_LEN, 0.5), tone(1234.5, 30000, 0.8), noise] {
        let spec = ok(stft(&clip, config))?;
        let back = ok(istft(&spec))?;
        let n = back.len().min(clip.len());
        worst = worst.max(interior_error(&clip.samples[..n], &back.samples[..n], DEFAULT_WIN));
    }
    ensure(worst <= 1e-3, || format!("round-trip error {worst:e}"))?;
    let frames = ok(stft(&tone(440.0, DEFAULT_CLIP_LEN, 0.5), config))?.frames();
    ensure(frames == 256, || format!("{frames} frames at the default clip length"))?;
    Ok(format!("interior rel L2 {worst:.1e}; T = {frames}"))
}

fn single_tone_spec(seed: u64, freq: f64, class_id: u32) -> SynthSpec {
    let mut spec = random_spec(seed, 1);
    spec.objects[0].frequency = freq;
    spec.objects[0].class_id = class_id;
    spec
}

fn criterion6() -> Outcome {
    let config = ok(StftConfig::new(DEFAULT_WIN, DEFAULT_HOP))?;
    let (a, _) = ok(gen_audio(&single_tone_spec(61, 440.0, 1)))?;
    let (b, _) = ok(gen_audio(&single_tone_spec(62, 880.0, 2)))?;
    let videos = [a[0].clone(), b[0].clone()];
    let mixture = ok(mix(&videos))?;
    let mix_spec = ok(stft(&mixture, config))?;
    let mags = [ok(pooled_magnitude(&videos[0], config))?, ok(pooled_magnitude(&videos[1], config))?];
    let refs: Vec<Vec<f64>> = videos.iter().map(|v| v.samples.clone()).collect();
    let mut lines = Vec::new();
    for u in 0..2 {
        let mask = ok(ibm(&mags[u], &mags[1 - u]))?;
        let est = ok(separate_with_mask(&mask, &mix_spec))?;
        let r = ok(bss_eval(&est.samples, &refs, u))?;
        let base = ok(bss_eval(&mixture.samples, &refs, u))?;
        ensure(r.sdr >= 20.0 && r.sir >= 25.0 && r.sdr - base.sdr >= 10.0, || {
            format!("source {u}: SDR {:.2}, SIR {:.2}, baseline {:.2}", r.sdr, r.sir, base.sdr)
        })?;
        lines.push(format!("SDR {:.1} SIR {:.1} (baseline {:.1})", r.sdr, r.sir, base.sdr));
    }
    Ok(lines.join("; "))
}

fn criterion7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut worst_identity: f64 = 0.0;
    let mut worst_scale: f64 = 0.0;
    let mut min_gap = f64::INFINITY;
    for _ in 0..100 {
        let n = 400;
        let refs: Vec<Vec<f64>> = (0..2).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let (g0, g1) = (rng.random_range(0.5..1.5), rng.random_range(-0.5..0.5));
        let est: Vec<f64> = (0..n)
            .map(|i| g0 * refs[0][i] + g1 * refs[1][i] + rng.random_range(-0.3..0.3))
            .collect();
        let d = ok(bss_decompose(&est, &refs, 0))?;
        for (i, e) in est.iter().enumerate() {
            worst_identity = worst_identity.max((d.s_target[i] + d.e_interf[i] + d.e_artif[i] - e).abs());
        }
        let r = BssResult::from_decomposition(&d);
        let c = rng.random_range(0.01..100.0);
        let scaled: Vec<f64> = est.iter().map(|v| v * c).collect();
        let s = ok(bss_eval(&scaled, &refs, 0))?;
        worst_scale = worst_scale
            .max((r.sdr - s.sdr).abs())
            .max((r.sir - s.sir).abs())
            .max((r.sar - s.sar).abs());
        min_gap = min_gap.min(r.sir - r.sdr);
    }
    ensure(worst_identity <= 1e-9, || format!("decomposition residual {worst_identity:e}"))?;
    ensure(worst_scale < 1e-9, || format!("scale deviation {worst_scale:e} dB"))?;
    ensure(min_gap >= 0.0, || format!("SIR < SDR by {}", -min_gap))?;
    let refs: Vec<Vec<f64>> = (0..2).map(|_| (0..300).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let perfect = ok(bss_eval(&refs[1], &refs, 1))?;
    ensure(perfect.sdr == DB_CAP && perfect.sir == DB_CAP && perfect.sar == DB_CAP, || {
        format!("perfect estimate scored {perfect:?}")
    })?;
    Ok(format!(
        "identity {worst_identity:.1e}, scale dev {worst_scale:.1e} dB, min SIR-SDR {min_gap:.2e}, cap {DB_CAP}"
    ))
}

fn criterion8() -> Outcome {
    let mut compared = 0;
    let mut mismatches = 0;
    for seed in 0..10u64 {
        let spec = random_spec(1000 + seed, 2);
        let dir = ok(tempfile::tempdir())?;
        let bundle = ok(gen_scene(&spec, dir.path()))?;
        let graphs = ok(bundle_graphs(&bundle, &GraphConfig { seed, ..GraphConfig::default() }))?;
        let labels = ok(window_labels(&bundle, &graphs, spec.tau))?;
        for l in labels.iter().filter(|l| !l.background) {
            let k = l.track.ok_or("auditory label without a track")?;
            // Closed form straight from the spec's velocities.
            let v = spec.objects[k]
                .window_velocities
                .as_ref()
                .map_or(spec.objects[k].velocity, |vs| vs[l.window]);
            let steps = (spec.window_frames - 1) as f64;
            let d = Displacement::new(
                steps * v[0] / (spec.width - 1) as f64,
                steps * v[1] / (spec.height - 1) as f64,
                steps * v[2] / spec.background_depth,
            );
            compared += 1;
            if quantize10(&d, spec.tau, false) != l.class10 || quantize28(&d, spec.tau, false) != l.class28 {
                mismatches += 1;
            }
        }
    }
    ensure(mismatches == 0 && compared > 0, || format!("{mismatches} of {compared} labels differ"))?;
    Ok(format!("{compared} object-window labels, 0 mismatches"))
}

fn criterion9() -> Outcome {
    let params = NetParams::init(ok(NetConfig::new(3, 10))?, 909);
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let zeta = Array1::from_shape_simple_fn(POOLED_DIM, || rng.random_range(-1.0..1.0));
    for n in 1..=3 {
        let y = ok(gru_rollout(&zeta, n, &params))?;
        ensure(y.nrows() == n + 1, || format!("rollout of {n} gave {} rows", y.nrows()))?;
        for row in y.rows() {
            let norm = row.dot(&row).sqrt();
            ensure((norm - 1.0).abs() < 1e-9, || format!("row norm {norm}"))?;
        }
    }

    let n = 6;
    let x = Array2::from_shape_simple_fn((n, FEATURE_DIM), || rng.random_range(-1.0..1.0));
    let mut a = Array2::<f64>::eye(n);
    for i in 0..n {
        for j in 0..i {
            let w = if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..1.0) };
            a[[i, j]] = w;
            a[[j, i]] = w;
        }
    }
    let perm = [3, 0, 5, 1, 4, 2];
    let xp = Array2::from_shape_fn(x.dim(), |(i, c)| x[[perm[i], c]]);
    let ap = Array2::from_shape_fn((n, n), |(i, j)| a[[perm[i], perm[j]]]);
    let mut worst: f64 = 0.0;
    for layer in [gat_forward, edgeconv_forward] {
        let y = ok(layer(&x, &a, &params))?;
        let yp = ok(layer(&xp, &ap, &params))?;
        for (i, &p) in perm.iter().enumerate() {
            for c in 0..y.ncols() {
                worst = worst.max((yp[[i, c]] - y[[p, c]]).abs());
            }
        }
    }
    ensure(worst < 1e-9, || format!("equivariance deviation {worst:e}"))?;

    let spec = random_spec(99, 2);
    let dir = ok(tempfile::tempdir())?;
    let bundle = ok(gen_scene(&spec, dir.path()))?;
    let graphs = ok(bundle_graphs(&bundle, &GraphConfig::default()))?;
    let config = ok(StftConfig::new(DEFAULT_WIN, DEFAULT_HOP))?;
    let mixture = ok(pooled_magnitude(&bundle.mixture, config))?;
    ensure(mixture.dim() == (SPEC_SIZE, SPEC_SIZE), || format!("mixture grid {:?}", mixture.dim()))?;
    let y = Array1::from_shape_simple_fn(EMBED_DIM, || rng.random_range(-0.1..0.1));
    let m = ok(mask_decoder_forward(&mixture, y.view(), &params))?;
    ensure(
        m.dim() == (SPEC_SIZE, SPEC_SIZE) && m.iter().all(|v| (0.0..=1.0).contains(v)),
        || "mask shape or range".into(),
    )?;

    let windows = bundle.window_count();
    let run = || -> Result<Vec<u64>, String> {
        let p = NetParams::init(ok(NetConfig::new(3, 28))?, 4242);
        let f = ok(forward_video(&p, &graphs[0], &mixture, windows))?;
        let mut bits = Vec::new();
        let parts = std::iter::once(&f.embeddings)
            .chain(&f.masks)
            .chain(&f.separated)
            .chain(std::iter::once(&f.class_probs))
            .chain(&f.direction_probs);
        for a in parts {
            bits.extend(a.iter().map(|v| v.to_bits()));
        }
        for m in &f.masks {
            ensure(m.dim() == (SPEC_SIZE, SPEC_SIZE) && m.iter().all(|v| (0.0..=1.0).contains(v)), || {
                "forward mask shape or range".into()
            })?;
        }
        Ok(bits)
    };
    let (first, second) = (run()?, run()?);
    ensure(first == second, || "forward pass differs between runs".into())?;
    Ok(format!("rollout rows unit, masks 256x256 in [0,1], equivariance dev {worst:.1e}, forward byte-identical"))
}

fn asmp(args: &[&str], cwd: &Path) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_asmp"))
        .args(args)
        .current_dir(cwd)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.code() == Some(0), || {
        format!("asmp {} exited {:?}: {}", args.join(" "), out.status.code(), String::from_utf8_lossy(&out.stderr))
    })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

#[derive(serde::Deserialize)]
struct FileLabel {
    window: usize,
    class10: usize,
    class28: usize,
    track: Option<usize>,
    background: bool,
}

fn criterion10() -> Outcome {
    let dir = ok(tempfile::tempdir())?;
    let root = dir.path();
    for (name, seed, freq, class) in [("a", 71u64, 440.0, 1u32), ("b", 72, 880.0, 2)] {
        let spec = serde_json::to_string_pretty(&single_tone_spec(seed, freq, class)).map_err(|e| e.to_string())?;
        std::fs::write(root.join(format!("{name}.json")), spec).map_err(|e| e.to_string())?;
        asmp(&["synth", name, "--spec", &format!("{name}.json")], root)?;
        asmp(&["graph", name], root)?;
    }
    asmp(&["separate", "a", "b", "--out", "sep", "--mode", "oracle"], root)?;
    let labels = ["--labels", "a/graph/labels.json", "--labels", "b/graph/labels.json"];
    asmp(&[&["losses", "sep"][..], &labels].concat(), root)?;
    asmp(&[&["eval", "sep"][..], &labels].concat(), root)?;

    let losses: serde_json::Value = read_json(&root.join("sep/losses.json"))?;
    let cyc = losses["cyc"].as_f64().ok_or("losses.json has no cyc")?;
    ensure(cyc == 0.0, || format!("oracle cyc {cyc}"))?;

    let mut reader = ok(csv::Reader::from_path(root.join("sep/metrics.csv")))?;
    let header: Vec<String> = ok(reader.headers())?.iter().map(String::from).collect();
    ensure(
        header == ["kind", "name", "estimate", "sdr", "sir", "sar", "baseline_sdr", "accuracy10", "accuracy28"],
        || format!("header {header:?}"),
    )?;
    let field = |r: &csv::StringRecord, i: usize| r[i].parse::<f64>().map_err(|e| format!("{:?}: {e}", &r[i]));
    let mut sources = 0;
    let mut worst = f64::INFINITY;
    let mut majority = false;
    for record in reader.records() {
        let r = ok(record)?;
        if &r[0] == "separation" && &r[1] != "mean" {
            let (sdr, sir, base) = (field(&r, 3)?, field(&r, 4)?, field(&r, 6)?);
            ensure(sdr >= 20.0 && sir >= 25.0 && sdr - base >= 10.0, || {
                format!("{}: SDR {sdr:.2}, SIR {sir:.2}, baseline {base:.2}", &r[1])
            })?;
            worst = worst.min(sdr);
            sources += 1;
        }
        if &r[0] == "direction" && &r[1] == "predicted" {
            ensure(field(&r, 7)? == 100.0 && field(&r, 8)? == 100.0, || "direction accuracy below 100".into())?;
        }
        majority |= &r[0] == "direction" && &r[1] == "majority_vote";
    }
    ensure(sources == 2 && majority, || format!("{sources} source rows, majority row {majority}"))?;

    let mut compared = 0;
    for name in ["a", "b"] {
        let labels: Vec<FileLabel> = read_json(&root.join(name).join("graph/labels.json"))?;
        let truth: Vec<GroundTruthLabel> = read_json(&root.join(name).join("ground_truth.json"))?;
        for l in labels.iter().filter(|l| !l.background) {
            let t = truth
                .iter()
                .find(|t| t.window == l.window && t.track == l.track)
                .ok_or("label without ground truth")?;
            ensure((t.class10, t.class28) == (l.class10, l.class28), || {
                format!("{name} window {}: {:?} vs {:?}", l.window, (l.class10, l.class28), (t.class10, t.class28))
            })?;
            compared += 1;
        }
    }
    Ok(format!("chain exit 0; min SDR {worst:.1} dB; {compared} labels match ground truth; cyc 0"))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("geometry oracles", criterion1),
        ("sparsity sweep", criterion2),
        ("loss identities", criterion3),
        ("quantizer", criterion4),
        ("audio round trip", criterion5),
        ("oracle separation", criterion6),
        ("bss metrics", criterion7),
        ("motion ground truth", criterion8),
        ("neural invariants", criterion9),
        ("end-to-end cli", criterion10),
    ];
    let started = Instant::now();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {:>2} {name}: {detail} [{secs:.1}s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {:>2} {name}: {why} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1}s",
        criteria.len() - failed,
        started.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
