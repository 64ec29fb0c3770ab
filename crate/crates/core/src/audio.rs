//! Short-time Fourier analysis, mixing, masking and ideal binary masks.
//!
//! A window of `N` samples gives `N/2 + 1` one-sided bins (512 for the
//! default 1022-sample window). Masks live on a half-resolution grid: each
//! pair of adjacent bins is averaged by [`pool_frequency`] and duplicated
//! again by [`unpool_mask`].

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{Array2, Axis, Zip};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::tensorio::AudioClip;

pub const DEFAULT_WIN: usize = 1022;
pub const DEFAULT_HOP: usize = 256;
/// Clip length giving exactly 256 frames with the default window and hop.
pub const DEFAULT_CLIP_LEN: usize = 66302;

/// Magnitudes or masks, frequency bins along rows and frames along columns.
pub type Magnitude = Array2<f64>;
pub type Mask = Array2<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StftConfig {
    pub win: usize,
    pub hop: usize,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            win: DEFAULT_WIN,
            hop: DEFAULT_HOP,
        }
    }
}

impl StftConfig {
    pub fn new(win: usize, hop: usize) -> Result<Self> {
        if win < 2 || !win.is_multiple_of(2) {
            return Err(Error::invalid(format!("window length must be even and >= 2, got {win}")));
        }
        if hop == 0 || hop > win {
            return Err(Error::invalid(format!("hop must be in 1..={win}, got {hop}")));
        }
        Ok(Self { win, hop })
    }

    pub fn bins(&self) -> usize {
        self.win / 2 + 1
    }

    pub fn frames(&self, len: usize) -> usize {
        if len < self.win {
            0
        } else {
            1 + (len - self.win) / self.hop
        }
    }

    /// Signal length covered by `frames` frames.
    pub fn signal_len(&self, frames: usize) -> usize {
        if frames == 0 {
            0
        } else {
            self.win + (frames - 1) * self.hop
        }
    }
}

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    pub data: Array2<Complex64>,
    pub config: StftConfig,
    pub rate: u32,
}

impl ComplexSpectrogram {
    pub fn bins(&self) -> usize {
        self.data.nrows()
    }

    pub fn frames(&self) -> usize {
        self.data.ncols()
    }

    pub fn magnitude(&self) -> Magnitude {
        self.data.mapv(|c| c.norm())
    }

    /// Real and imaginary parts as two separate grids.
    pub fn parts(&self) -> (Array2<f64>, Array2<f64>) {
        (self.data.mapv(|c| c.re), self.data.mapv(|c| c.im))
    }

    pub fn from_parts(
        re: &Array2<f64>,
        im: &Array2<f64>,
        config: StftConfig,
        rate: u32,
    ) -> Result<Self> {
        if re.dim() != im.dim() || re.nrows() != config.bins() {
            return Err(Error::Shape(format!(
                "spectrogram parts {:?}/{:?} do not match {} bins",
                re.dim(),
                im.dim(),
                config.bins()
            )));
        }
        let mut data = Array2::zeros(re.dim());
        Zip::from(&mut data)
            .and(re)
            .and(im)
            .for_each(|d, &r, &i| *d = Complex64::new(r, i));
        Ok(Self { data, config, rate })
    }
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut planner = FftPlanner::new();
    if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    }
}

pub fn stft(clip: &AudioClip, config: StftConfig) -> Result<ComplexSpectrogram> {
    let (win, hop, bins) = (config.win, config.hop, config.bins());
    let frames = config.frames(clip.len());
    if frames == 0 {
        return Err(Error::invalid(format!(
            "clip of {} samples is shorter than the {win}-sample window",
            clip.len()
        )));
    }
    let window = hann(win);
    let fft = plan(win, false);
    let columns: Vec<Vec<Complex64>> = (0..frames)
        .into_par_iter()
        .map(|t| {
            let start = t * hop;
            let mut buf: Vec<Complex64> = clip.samples[start..start + win]
                .iter()
                .zip(&window)
                .map(|(&x, &w)| Complex64::new(x * w, 0.0))
                .collect();
            fft.process(&mut buf);
            buf.truncate(bins);
            buf
        })
        .collect();
    let data = Array2::from_shape_fn((bins, frames), |(k, t)| columns[t][k]);
    Ok(ComplexSpectrogram {
        data,
        config,
        rate: clip.rate,
    })
}

/// Weighted overlap-add inverse of [`stft`]. Samples with a vanishing
/// window-power sum (the first sample when the window starts at zero) are
/// left at zero.
pub fn istft(spec: &ComplexSpectrogram) -> Result<AudioClip> {
    let config = spec.config;
    let (win, hop, bins) = (config.win, config.hop, config.bins());
    if spec.bins() != bins {
        return Err(Error::Shape(format!(
            "spectrogram has {} bins, window {win} needs {bins}",
            spec.bins()
        )));
    }
    let frames = spec.frames();
    let window = hann(win);
    let ifft = plan(win, true);
    let scale = 1.0 / win as f64;
    let segments: Vec<Vec<f64>> = (0..frames)
        .into_par_iter()
        .map(|t| {
            let col = spec.data.column(t);
            let mut buf = vec![Complex64::new(0.0, 0.0); win];
            for k in 0..bins {
                buf[k] = col[k];
            }
            for k in 1..win / 2 {
                buf[win - k] = col[k].conj();
            }
            // The DC and Nyquist terms of a real signal carry no imaginary part.
            buf[0].im = 0.0;
            buf[win / 2].im = 0.0;
            ifft.process(&mut buf);
            buf.iter().zip(&window).map(|(c, &w)| c.re * scale * w).collect()
        })
        .collect();
    let len = config.signal_len(frames);
    let mut out = vec![0.0; len];
    let mut norm = vec![0.0; len];
    for (t, seg) in segments.iter().enumerate() {
        let start = t * hop;
        for (i, (&s, &w)) in seg.iter().zip(&window).enumerate() {
            out[start + i] += s;
            norm[start + i] += w * w;
        }
    }
    for (o, &n) in out.iter_mut().zip(&norm) {
        *o = if n > 1e-10 { *o / n } else { 0.0 };
    }
    AudioClip::new(out, spec.rate)
}

/// Averages adjacent bin pairs, halving the row count.
pub fn pool_frequency(mag: &Magnitude) -> Result<Magnitude> {
    let (rows, cols) = mag.dim();
    if rows % 2 != 0 {
        return Err(Error::Shape(format!("cannot pool an odd bin count ({rows})")));
    }
    Ok(Array2::from_shape_fn((rows / 2, cols), |(r, c)| {
        0.5 * (mag[[2 * r, c]] + mag[[2 * r + 1, c]])
    }))
}

/// Duplicates every row, doubling the row count.
pub fn unpool_mask(mask: &Mask) -> Mask {
    let (rows, cols) = mask.dim();
    Array2::from_shape_fn((2 * rows, cols), |(r, c)| mask[[r / 2, c]])
}

pub fn mix(clips: &[AudioClip]) -> Result<AudioClip> {
    let first = clips.first().ok_or(Error::Empty("nothing to mix"))?;
    let mut out = first.samples.clone();
    for clip in &clips[1..] {
        if clip.len() != first.len() {
            return Err(Error::Shape(format!(
                "length mismatch: {} vs {} samples",
                clip.len(),
                first.len()
            )));
        }
        if clip.rate != first.rate {
            return Err(Error::invalid(format!(
                "rate mismatch: {} vs {} Hz",
                clip.rate, first.rate
            )));
        }
        for (o, s) in out.iter_mut().zip(&clip.samples) {
            *o += s;
        }
    }
    AudioClip::new(out, first.rate)
}

/// Center-crops or zero-pads (evenly on both sides) to `len` samples.
pub fn fit_length(clip: &AudioClip, len: usize) -> AudioClip {
    let n = clip.len();
    let samples = if n >= len {
        let start = (n - len) / 2;
        clip.samples[start..start + len].to_vec()
    } else {
        let pad = (len - n) / 2;
        let mut s = vec![0.0; len];
        s[pad..pad + n].copy_from_slice(&clip.samples);
        s
    };
    AudioClip {
        samples,
        rate: clip.rate,
    }
}

fn same_shape(a: &Array2<f64>, b: &Array2<f64>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!("shapes {:?} and {:?} differ", a.dim(), b.dim())));
    }
    Ok(())
}

/// `1` where `xu` strictly exceeds `xother`, else `0`.
pub fn ibm(xu: &Magnitude, xother: &Magnitude) -> Result<Mask> {
    same_shape(xu, xother)?;
    let mut out = Array2::zeros(xu.dim());
    Zip::from(&mut out)
        .and(xu)
        .and(xother)
        .for_each(|m, &a, &b| *m = if a > b { 1.0 } else { 0.0 });
    Ok(out)
}

pub fn apply_mask(mask: &Mask, x: &Magnitude) -> Result<Magnitude> {
    same_shape(mask, x)?;
    Ok(mask * x)
}

/// Pooled magnitude of `clip`.
pub fn pooled_magnitude(clip: &AudioClip, config: StftConfig) -> Result<Magnitude> {
    pool_frequency(&stft(clip, config)?.magnitude())
}

/// Ideal binary masks on the pooled grid: source `u` against the sum of all
/// other sources.
pub fn ibm_for_sources(sources: &[AudioClip], config: StftConfig) -> Result<Vec<Mask>> {
    let total = mix(sources)?;
    sources
        .par_iter()
        .map(|s| {
            let rest: Vec<f64> = total.samples.iter().zip(&s.samples).map(|(t, x)| t - x).collect();
            let rest = AudioClip::new(rest, s.rate)?;
            ibm(&pooled_magnitude(s, config)?, &pooled_magnitude(&rest, config)?)
        })
        .collect()
}

/// Combines a magnitude estimate with the phase of `phase_source` and
/// inverts. `magnitude` may be on the full bin grid or the pooled one, in
/// which case it is unpooled first.
pub fn reconstruct(magnitude: &Magnitude, phase_source: &ComplexSpectrogram) -> Result<AudioClip> {
    let full = if magnitude.nrows() * 2 == phase_source.bins() {
        unpool_mask(magnitude)
    } else {
        magnitude.clone()
    };
    if full.dim() != phase_source.data.dim() {
        return Err(Error::Shape(format!(
            "magnitude {:?} does not fit spectrogram {:?}",
            magnitude.dim(),
            phase_source.data.dim()
        )));
    }
    let mut data = phase_source.data.clone();
    Zip::from(&mut data).and(&full).for_each(|c, &m| {
        let r = c.norm();
        *c = if r > 0.0 { *c * (m / r) } else { Complex64::new(m, 0.0) };
    });
    istft(&ComplexSpectrogram {
        data,
        config: phase_source.config,
        rate: phase_source.rate,
    })
}

/// Separates one source from `mixture` with a pooled-grid mask: the
/// unpooled mask scales the full-resolution mixture magnitude.
pub fn separate_with_mask(mask: &Mask, mixture: &ComplexSpectrogram) -> Result<AudioClip> {
    let full = unpool_mask(mask);
    let magnitude = mixture.magnitude();
    reconstruct(&apply_mask(&full, &magnitude)?, mixture)
}

/// Sum of squares over frequency, one value per frame.
pub fn frame_energy(mag: &Magnitude) -> Vec<f64> {
    mag.map_axis(Axis(0), |col| col.iter().map(|v| v * v).sum())
        .to_vec()
}
