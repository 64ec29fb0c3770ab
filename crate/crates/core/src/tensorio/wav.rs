use std::path::Path;

use serde::{Deserialize, Serialize};

use super::write_atomic;
use crate::error::{Error, Result};

pub const DEFAULT_RATE: u32 = 11025;

const PCM_SCALE: f64 = 32768.0;

/// Mono audio in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, rate: u32) -> Result<Self> {
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::invalid(format!("non-finite sample at index {i}")));
        }
        Ok(Self { samples, rate })
    }

    pub fn silence(len: usize, rate: u32) -> Self {
        Self {
            samples: vec![0.0; len],
            rate,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.rate)
    }
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let wav_err = |msg: String| Error::Wav {
        path: path.to_path_buf(),
        msg,
    };
    let mut reader = hound::WavReader::open(path).map_err(|e| wav_err(e.to_string()))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(wav_err(format!("expected mono, found {} channels", spec.channels)));
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(wav_err(format!(
            "unsupported bit depth: {} bit {:?}",
            spec.bits_per_sample, spec.sample_format
        )));
    }
    let samples = reader
        .samples::<i16>()
        .map(|s| s.map(|v| f64::from(v) / PCM_SCALE))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| wav_err(e.to_string()))?;
    Ok(AudioClip {
        samples,
        rate: spec.sample_rate,
    })
}

/// Writes 16-bit PCM mono. Samples are rounded to the nearest step and
/// clamped to the representable range.
pub fn write_wav(clip: &AudioClip, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut cursor = std::io::Cursor::new(Vec::new());
    {
        let mut writer = hound::WavWriter::new(&mut cursor, spec).map_err(|e| Error::Wav {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        for &s in &clip.samples {
            let q = (s * PCM_SCALE).round().clamp(-32768.0, 32767.0) as i16;
            writer.write_sample(q).map_err(|e| Error::Wav {
                path: path.to_path_buf(),
                msg: e.to_string(),
            })?;
        }
        writer.finalize().map_err(|e| Error::Wav {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
    }
    write_atomic(path, &cursor.into_inner())
}
