//! Deterministic synthetic scenes: rectangles moving over a far background
//! plane, with exact depth, flow, detections, tones and analytic
//! ground-truth displacements.
//!
//! Objects move by whole pixels per frame in x and y and by a real amount
//! per frame in depth, so the flow-and-depth pipeline reproduces the
//! analytic displacement up to `f32` storage rounding.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audio::{mix, DEFAULT_CLIP_LEN};
use crate::error::{Error, Result};
use crate::geometry::BoxRect;
use crate::motion::{quantize10, quantize28, Displacement, DEFAULT_TAU};
use crate::scenegraph::FEATURE_DIM;
use crate::tensorio::{
    load_bundle, write_array, write_json, write_wav, ArrayFile, AudioClip, AudioRefs,
    DetectionRecord, GroundTruthLabel, Manifest, SceneBundle, DEFAULT_RATE, DEFAULT_WINDOW_FRAMES,
    MANIFEST_FILE,
};

pub const DETECTION_SCORE: f64 = 0.99;
const FADE_SECS: f64 = 0.01;

/// False for NaN as well as for non-positive values.
fn positive(v: f64) -> bool {
    v > 0.0
}

fn default_fps() -> f64 {
    8.0
}
fn default_window_frames() -> usize {
    DEFAULT_WINDOW_FRAMES
}
fn default_rate() -> u32 {
    DEFAULT_RATE
}
fn default_clip_len() -> usize {
    DEFAULT_CLIP_LEN
}
fn default_background_depth() -> f64 {
    10.0
}
fn default_amplitude() -> f64 {
    0.3
}
fn default_chirp() -> f64 {
    0.02
}
fn default_tau() -> f64 {
    DEFAULT_TAU
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthObject {
    /// Width and height in pixels.
    pub size: [usize; 2],
    /// Top-left corner in frame 0, in pixels.
    pub position: [i64; 2],
    /// Depth in frame 0.
    pub depth: f64,
    /// Per-frame motion `(dx px, dy px, dz)`; `dx` and `dy` must be whole.
    pub velocity: [f64; 3],
    /// Optional per-window override of `velocity`.
    #[serde(default)]
    pub window_velocities: Option<Vec<[f64; 3]>>,
    pub class_id: u32,
    /// Tone frequency in Hz.
    pub frequency: f64,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
}

/// A non-sounding box that follows an object, grown by `margin` pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthContext {
    pub object: usize,
    pub margin: usize,
    pub class_id: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seed: u64,
    #[serde(default)]
    pub video_id: Option<String>,
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    #[serde(default = "default_fps")]
    pub fps: f64,
    #[serde(default = "default_window_frames")]
    pub window_frames: usize,
    #[serde(default = "default_background_depth")]
    pub background_depth: f64,
    pub objects: Vec<SynthObject>,
    #[serde(default)]
    pub context: Vec<SynthContext>,
    /// Amplitude of an extra white-noise background source; 0 disables it.
    #[serde(default)]
    pub noise_level: f64,
    #[serde(default = "default_rate")]
    pub sample_rate: u32,
    #[serde(default = "default_clip_len")]
    pub clip_len: usize,
    /// Relative frequency sweep per window for objects moving in depth.
    #[serde(default = "default_chirp")]
    pub chirp: f64,
    /// No-motion threshold used for the ground-truth classes.
    #[serde(default = "default_tau")]
    pub tau: f64,
}

impl SynthSpec {
    pub fn windows(&self) -> usize {
        self.frames / self.window_frames.max(1)
    }

    fn velocity(&self, object: usize, window: usize) -> [f64; 3] {
        let o = &self.objects[object];
        match &o.window_velocities {
            Some(v) if !v.is_empty() => v[window.min(v.len() - 1)],
            _ => o.velocity,
        }
    }

    /// Velocity in effect for the step from `frame` to `frame + 1`.
    fn step_velocity(&self, object: usize, frame: usize) -> [f64; 3] {
        self.velocity(object, frame / self.window_frames)
    }

    /// Top-left corner and depth of `object` at `frame`.
    pub fn state(&self, object: usize, frame: usize) -> ([i64; 2], f64) {
        let o = &self.objects[object];
        let (mut x, mut y, mut z) = (o.position[0], o.position[1], o.depth);
        for g in 0..frame {
            let v = self.step_velocity(object, g);
            x += v[0] as i64;
            y += v[1] as i64;
            z += v[2];
        }
        (([x, y]), z)
    }

    pub fn object_box(&self, object: usize, frame: usize) -> BoxRect {
        let ([x, y], _) = self.state(object, frame);
        let [w, h] = self.objects[object].size;
        BoxRect::new(x as f64, y as f64, (x + w as i64) as f64, (y + h as i64) as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 2 || self.height < 2 {
            return Err(Error::invalid("image must be at least 2x2"));
        }
        if self.window_frames < 2 || self.frames < self.window_frames {
            return Err(Error::invalid(format!(
                "{} frames cannot hold a window of {} frames",
                self.frames, self.window_frames
            )));
        }
        if !positive(self.fps) || !positive(self.background_depth) || self.sample_rate == 0 {
            return Err(Error::invalid("fps, background depth and sample rate must be positive"));
        }
        if self.objects.is_empty() {
            return Err(Error::invalid("spec needs at least one object"));
        }
        if !(0.0..1.0).contains(&self.chirp) || self.noise_level < 0.0 || self.tau < 0.0 {
            return Err(Error::invalid("chirp must be in [0, 1), noise level and tau >= 0"));
        }
        let nyquist = f64::from(self.sample_rate) / 2.0;
        let mut loudness = self.noise_level;
        for (k, o) in self.objects.iter().enumerate() {
            if o.size[0] == 0 || o.size[1] == 0 {
                return Err(Error::invalid(format!("object {k} has an empty size")));
            }
            let moves = o.window_velocities.iter().flatten().chain(std::iter::once(&o.velocity));
            for v in moves {
                if v.iter().any(|c| !c.is_finite()) || v[0].fract() != 0.0 || v[1].fract() != 0.0 {
                    return Err(Error::invalid(format!(
                        "object {k}: pixel velocities must be whole numbers, got {v:?}"
                    )));
                }
            }
            if !positive(o.frequency) || o.frequency * (1.0 + self.chirp) >= nyquist {
                return Err(Error::invalid(format!(
                    "object {k}: frequency {} Hz reaches the Nyquist limit {nyquist} Hz",
                    o.frequency
                )));
            }
            if o.amplitude < 0.0 {
                return Err(Error::invalid(format!("object {k}: negative amplitude")));
            }
            loudness += o.amplitude;
            for f in 0..self.frames {
                let b = self.object_box(k, f);
                if !b.within(self.width, self.height) {
                    return Err(Error::invalid(format!("object {k} leaves the frame at frame {f}")));
                }
                let (_, z) = self.state(k, f);
                if !(z > 0.0 && z < self.background_depth) {
                    return Err(Error::invalid(format!(
                        "object {k} depth {z} at frame {f} is not between 0 and the background"
                    )));
                }
            }
        }
        if loudness > 1.0 {
            return Err(Error::invalid(format!(
                "source amplitudes sum to {loudness}, the mixture could clip"
            )));
        }
        for (k, c) in self.context.iter().enumerate() {
            if c.object >= self.objects.len() {
                return Err(Error::invalid(format!("context {k} follows a missing object")));
            }
            if self.objects.iter().any(|o| o.class_id == c.class_id) {
                return Err(Error::invalid(format!(
                    "context {k} reuses a sounding class id {}",
                    c.class_id
                )));
            }
        }
        Ok(())
    }

    /// Closed-form displacement of `object` over window `w`.
    pub fn analytic_displacement(&self, object: usize, window: usize) -> Displacement {
        let v = self.velocity(object, window);
        let steps = (self.window_frames - 1) as f64;
        Displacement::new(
            steps * v[0] / (self.width - 1) as f64,
            steps * v[1] / (self.height - 1) as f64,
            steps * v[2] / self.background_depth,
        )
    }
}

/// Depth map of `frame`: the background plane with every object painted at
/// its depth, nearest object winning.
pub fn render_depth(spec: &SynthSpec, frame: usize) -> Array2<f64> {
    let mut depth = Array2::from_elem((spec.height, spec.width), spec.background_depth);
    for k in 0..spec.objects.len() {
        let (_, z) = spec.state(k, frame);
        let (rows, cols) = spec.object_box(k, frame).pixel_ranges(spec.width, spec.height);
        for r in rows {
            for c in cols.clone() {
                if z < depth[[r, c]] {
                    depth[[r, c]] = z;
                }
            }
        }
    }
    depth
}

/// Pixel flow from the reference to the target frame of window `w`.
pub fn render_flow(spec: &SynthSpec, window: usize) -> Array3<f64> {
    let first = window * spec.window_frames;
    let steps = (spec.window_frames - 1) as f64;
    let mut flow = Array3::zeros((spec.height, spec.width, 2));
    let mut nearest = Array2::from_elem((spec.height, spec.width), spec.background_depth);
    for k in 0..spec.objects.len() {
        let (_, z) = spec.state(k, first);
        let v = spec.velocity(k, window);
        let (rows, cols) = spec.object_box(k, first).pixel_ranges(spec.width, spec.height);
        for r in rows {
            for c in cols.clone() {
                if z < nearest[[r, c]] {
                    nearest[[r, c]] = z;
                    flow[[r, c, 0]] = steps * v[0];
                    flow[[r, c, 1]] = steps * v[1];
                }
            }
        }
    }
    flow
}

fn seeded_feature(seed: u64, stream: u64) -> Array1<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    Array1::from_shape_simple_fn(FEATURE_DIM, || rng.random_range(-1.0..1.0))
}

const STREAM_BACKGROUND: u64 = 1;
const STREAM_NOISE: u64 = 2;
const STREAM_OBJECT: u64 = 1 << 16;
const STREAM_CONTEXT: u64 = 1 << 32;

/// One tone per object plus an optional noise source, and their sum.
///
/// While an object moves in depth its tone sweeps by `chirp` over each
/// window: upward when approaching (`dz < 0`), downward when receding.
pub fn gen_audio(spec: &SynthSpec) -> Result<(Vec<AudioClip>, AudioClip)> {
    spec.validate()?;
    let rate = f64::from(spec.sample_rate);
    let window_secs = spec.window_frames as f64 / spec.fps;
    let fade = ((FADE_SECS * rate) as usize).max(1);
    let n = spec.clip_len;
    let envelope = |i: usize| {
        let edge = i.min(n - 1 - i.min(n - 1));
        if edge >= fade {
            1.0
        } else {
            0.5 - 0.5 * (PI * edge as f64 / fade as f64).cos()
        }
    };
    let mut sources = Vec::with_capacity(spec.objects.len() + 1);
    for (k, o) in spec.objects.iter().enumerate() {
        let mut phase = 0.0f64;
        let mut samples = Vec::with_capacity(n);
        for i in 0..n {
            let t = i as f64 / rate;
            let window = ((t / window_secs) as usize).min(spec.windows().saturating_sub(1));
            let within = (t - window as f64 * window_secs) / window_secs;
            let dz = spec.velocity(k, window)[2];
            let sweep = if dz < 0.0 {
                1.0
            } else if dz > 0.0 {
                -1.0
            } else {
                0.0
            };
            let freq = o.frequency * (1.0 + sweep * spec.chirp * within.clamp(0.0, 1.0));
            samples.push(o.amplitude * envelope(i) * phase.sin());
            phase = (phase + 2.0 * PI * freq / rate) % (2.0 * PI);
        }
        sources.push(AudioClip::new(samples, spec.sample_rate)?);
    }
    if spec.noise_level > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(STREAM_NOISE);
        let samples = (0..n)
            .map(|i| spec.noise_level * envelope(i) * rng.random_range(-1.0..1.0))
            .collect();
        sources.push(AudioClip::new(samples, spec.sample_rate)?);
    }
    let mixture = mix(&sources)?;
    Ok((sources, mixture))
}

/// Ground-truth labels: one per object and one background label per window.
pub fn ground_truth(spec: &SynthSpec) -> Vec<GroundTruthLabel> {
    let mut out = Vec::new();
    for w in 0..spec.windows() {
        for k in 0..spec.objects.len() {
            let d = spec.analytic_displacement(k, w);
            out.push(GroundTruthLabel {
                track: Some(k),
                window: w,
                vector: [d.x, d.y, d.z],
                class10: quantize10(&d, spec.tau, false),
                class28: quantize28(&d, spec.tau, false),
            });
        }
        let zero = Displacement::zeros();
        out.push(GroundTruthLabel {
            track: None,
            window: w,
            vector: [0.0; 3],
            class10: quantize10(&zero, spec.tau, true),
            class28: quantize28(&zero, spec.tau, true),
        });
    }
    out
}

/// Renders `spec` into a bundle directory and loads it back.
pub fn gen_scene(spec: &SynthSpec, dir: impl AsRef<Path>) -> Result<SceneBundle> {
    spec.validate()?;
    let dir = dir.as_ref();
    let windows = spec.windows();
    let array = |a: &ArrayFile, rel: &str| -> Result<PathBuf> {
        let rel = PathBuf::from(rel);
        write_array(a, dir.join(&rel))?;
        Ok(rel)
    };

    let mut depth = Vec::with_capacity(spec.frames);
    for f in 0..spec.frames {
        depth.push(array(
            &ArrayFile::from_ndarray(&render_depth(spec, f))?,
            &format!("depth/frame_{f:04}.a3mp"),
        )?);
    }
    let mut flow = Vec::with_capacity(windows);
    for w in 0..windows {
        flow.push(array(
            &ArrayFile::from_ndarray(&render_flow(spec, w))?,
            &format!("flow/window_{w:03}.a3mp"),
        )?);
    }

    let mut object_features = Vec::new();
    for k in 0..spec.objects.len() {
        let f = seeded_feature(spec.seed, STREAM_OBJECT + k as u64);
        object_features.push(array(&ArrayFile::from_ndarray(&f)?, &format!("features/object_{k}.a3mp"))?);
    }
    let mut context_features = Vec::new();
    for k in 0..spec.context.len() {
        let f = seeded_feature(spec.seed, STREAM_CONTEXT + k as u64);
        context_features.push(array(&ArrayFile::from_ndarray(&f)?, &format!("features/context_{k}.a3mp"))?);
    }
    let background = array(
        &ArrayFile::from_ndarray(&seeded_feature(spec.seed, STREAM_BACKGROUND))?,
        "features/background.a3mp",
    )?;

    let mut records = Vec::new();
    for w in 0..windows {
        let frame = w * spec.window_frames;
        for (k, o) in spec.objects.iter().enumerate() {
            records.push(DetectionRecord {
                id: records.len(),
                frame,
                label: o.class_id,
                bbox: spec.object_box(k, frame),
                score: DETECTION_SCORE,
                feature: object_features[k].clone(),
                track: Some(k),
            });
        }
        for (k, c) in spec.context.iter().enumerate() {
            let b = spec.object_box(c.object, frame);
            let m = c.margin as f64;
            records.push(DetectionRecord {
                id: records.len(),
                frame,
                label: c.class_id,
                bbox: BoxRect::new(
                    (b.x0 - m).max(0.0),
                    (b.y0 - m).max(0.0),
                    (b.x1 + m).min(spec.width as f64),
                    (b.y1 + m).min(spec.height as f64),
                ),
                score: DETECTION_SCORE,
                feature: context_features[k].clone(),
                track: None,
            });
        }
    }
    write_json(&records, dir.join("detections.json"))?;

    let (sources, mixture) = gen_audio(spec)?;
    let mut source_paths = Vec::with_capacity(sources.len());
    for (k, s) in sources.iter().enumerate() {
        let rel = PathBuf::from(format!("audio/source_{k}.wav"));
        write_wav(s, dir.join(&rel))?;
        source_paths.push(rel);
    }
    write_wav(&mixture, dir.join("audio/mixture.wav"))?;
    write_json(&ground_truth(spec), dir.join("ground_truth.json"))?;

    let mut classes: Vec<u32> = spec.objects.iter().map(|o| o.class_id).collect();
    classes.sort_unstable();
    classes.dedup();
    let manifest = Manifest {
        video_id: spec.video_id.clone().unwrap_or_else(|| format!("synth-{}", spec.seed)),
        frame_count: spec.frames,
        fps: spec.fps,
        window_frames: spec.window_frames,
        width: spec.width,
        height: spec.height,
        depth,
        flow,
        detections: "detections.json".into(),
        audio: AudioRefs {
            sources: source_paths,
            mixture: "audio/mixture.wav".into(),
        },
        auditory_classes: classes,
        background_feature: Some(background),
        ground_truth: Some("ground_truth.json".into()),
        tracks: vec![],
    };
    write_json(&manifest, dir.join(MANIFEST_FILE))?;
    load_bundle(dir)
}

/// A random valid spec: `objects` (1 or 2) rectangles, each confined to its
/// own vertical strip so they never overlap, with whole-pixel planar motion
/// and real-valued depth motion.
pub fn random_spec(seed: u64, objects: usize) -> SynthSpec {
    let objects = objects.clamp(1, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (width, height, window_frames) = (96usize, 48usize, 8usize);
    let windows = rng.random_range(1..=3usize);
    let frames = windows * window_frames + rng.random_range(0..window_frames);
    let strip = width / objects;
    let tones = [440.0, 880.0];
    let list = (0..objects)
        .map(|k| {
            let size = [rng.random_range(6..=10usize), rng.random_range(6..=10usize)];
            let vels: Vec<[f64; 3]> = (0..windows)
                .map(|_| {
                    [
                        f64::from(rng.random_range(-1..=1i32)),
                        f64::from(rng.random_range(-1..=1i32)),
                        rng.random_range(-0.08..0.08),
                    ]
                })
                .collect();
            // Keep the full path inside the strip.
            let (mut lo, mut hi, mut pos) = ([0i64; 2], [0i64; 2], [0i64; 2]);
            for f in 0..frames {
                let v = vels[(f / window_frames).min(windows - 1)];
                for a in 0..2 {
                    pos[a] += v[a] as i64;
                    lo[a] = lo[a].min(pos[a]);
                    hi[a] = hi[a].max(pos[a]);
                }
            }
            let x_lo = (k * strip) as i64 - lo[0];
            let x_hi = ((k + 1) * strip) as i64 - size[0] as i64 - hi[0];
            let y_lo = -lo[1];
            let y_hi = height as i64 - size[1] as i64 - hi[1];
            SynthObject {
                size,
                position: [rng.random_range(x_lo..=x_hi), rng.random_range(y_lo..=y_hi)],
                depth: rng.random_range(4.0..6.0),
                velocity: vels[0],
                window_velocities: Some(vels),
                class_id: k as u32 + 1,
                frequency: tones[k],
                amplitude: 0.3,
            }
        })
        .collect();
    SynthSpec {
        seed,
        video_id: None,
        width,
        height,
        frames,
        fps: 8.0,
        window_frames,
        background_depth: 10.0,
        objects: list,
        context: vec![],
        noise_level: 0.0,
        sample_rate: DEFAULT_RATE,
        clip_len: DEFAULT_CLIP_LEN,
        chirp: default_chirp(),
        tau: DEFAULT_TAU,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn still(frequency: f64) -> SynthSpec {
        SynthSpec {
            seed: 1,
            video_id: Some("still".into()),
            width: 32,
            height: 24,
            frames: 16,
            fps: 8.0,
            window_frames: 8,
            background_depth: 10.0,
            objects: vec![SynthObject {
                size: [6, 5],
                position: [4, 4],
                depth: 5.0,
                velocity: [0.0; 3],
                window_velocities: None,
                class_id: 3,
                frequency,
                amplitude: 0.5,
            }],
            context: vec![SynthContext { object: 0, margin: 2, class_id: 90 }],
            noise_level: 0.0,
            sample_rate: 11025,
            clip_len: 4000,
            chirp: 0.02,
            tau: 0.02,
        }
    }

    #[test]
    fn static_object_has_zero_flow_and_no_motion_class() {
        let spec = still(440.0);
        assert!(render_flow(&spec, 0).iter().all(|&v| v == 0.0));
        let gt = ground_truth(&spec);
        assert_eq!(gt.len(), 4);
        assert!(gt.iter().filter(|g| g.track.is_some()).all(|g| g.class10 == 8));
        assert!(gt.iter().filter(|g| g.track.is_none()).all(|g| g.class10 == 9 && g.class28 == 27));
    }

    #[test]
    fn depth_rendering_prefers_the_nearest_object() {
        let mut spec = still(440.0);
        let mut second = spec.objects[0].clone();
        second.position = [6, 6];
        second.depth = 3.0;
        second.frequency = 880.0;
        second.amplitude = 0.3;
        spec.objects.push(second);
        let d = render_depth(&spec, 0);
        assert_eq!(d[[4, 4]], 5.0);
        assert_eq!(d[[6, 6]], 3.0);
        assert_eq!(d[[0, 0]], 10.0);
    }

    #[test]
    fn validation_errors() {
        let mut s = still(440.0);
        s.objects[0].velocity = [3.0, 0.0, 0.0];
        assert!(s.validate().unwrap_err().to_string().contains("leaves the frame"));
        let mut s = still(440.0);
        s.objects[0].velocity = [0.5, 0.0, 0.0];
        assert!(s.validate().is_err());
        assert!(still(5500.0).validate().is_err());
        assert!(still(5512.5).validate().is_err());
        let mut s = still(440.0);
        s.objects[0].amplitude = 2.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn single_tone_mixture_is_the_source() {
        let (sources, mixture) = gen_audio(&still(440.0)).unwrap();
        assert_eq!(sources.len(), 1);
        assert_eq!(mixture, sources[0]);
    }

    /// Instantaneous frequency from zero crossings over one window.
    fn crossing_rate(s: &[f64], rate: f64) -> (f64, f64) {
        let crossings: Vec<usize> = (1..s.len()).filter(|&i| s[i - 1] < 0.0 && s[i] >= 0.0).collect();
        let half = crossings.len() / 2;
        let freq = |a: &[usize]| rate * (a.len() - 1) as f64 / (a[a.len() - 1] - a[0]) as f64;
        (freq(&crossings[..half]), freq(&crossings[half..]))
    }

    #[test]
    fn approaching_objects_rise_in_pitch() {
        let mut spec = still(1000.0);
        spec.chirp = 0.2;
        spec.clip_len = 11025;
        spec.objects[0].velocity = [0.0, 0.0, -0.1];
        let (s, _) = gen_audio(&spec).unwrap();
        let window = (spec.window_frames as f64 / spec.fps * 11025.0) as usize;
        let (early, late) = crossing_rate(&s[0].samples[200..window - 200], 11025.0);
        assert!(late > early, "{early} -> {late}");
        spec.objects[0].velocity = [0.0, 0.0, 0.1];
        let (s, _) = gen_audio(&spec).unwrap();
        let (early, late) = crossing_rate(&s[0].samples[200..window - 200], 11025.0);
        assert!(late < early);
    }

    #[test]
    fn bundle_is_byte_identical_across_runs() {
        let spec = random_spec(42, 2);
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let bundle = gen_scene(&spec, a.path()).unwrap();
        gen_scene(&spec, b.path()).unwrap();
        let mut files = Vec::new();
        for entry in walk(a.path()) {
            let rel = entry.strip_prefix(a.path()).unwrap().to_path_buf();
            assert_eq!(std::fs::read(&entry).unwrap(), std::fs::read(b.path().join(&rel)).unwrap(), "{rel:?}");
            files.push(rel);
        }
        assert!(files.len() > spec.frames);
        assert_eq!(bundle.window_count(), spec.windows());
        assert_eq!(bundle.sources.len(), 2);
    }

    fn walk(dir: &Path) -> Vec<PathBuf> {
        let mut out = Vec::new();
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                out.extend(walk(&p));
            } else {
                out.push(p);
            }
        }
        out.sort();
        out
    }

    #[test]
    fn random_specs_are_valid() {
        for seed in 0..50 {
            random_spec(seed, 2).validate().unwrap();
            random_spec(seed, 1).validate().unwrap();
        }
    }
}
