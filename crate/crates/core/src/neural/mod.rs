//! Forward-only, seeded networks: graph attention, edge convolution,
//! pooling, the recurrent sub-graph embedder, the mask U-Net and the two
//! spectrogram classifiers.
//!
//! Weights are Glorot-uniform from a 64-bit seed with zero biases; nothing
//! is trained. Batch normalization is omitted (at initialization, in
//! inference mode, it is the identity).

mod graph;
pub mod layers;
mod spectral;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2, ArrayD, ArrayView1, ArrayView2, Ix1, Ix2, IxDyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenegraph::{SceneGraph, FEATURE_DIM};
use crate::tensorio::{read_array, read_json, write_array, write_json, ArrayFile};

pub use graph::{edgeconv_forward, embed_graph, gat_forward, gru_rollout, pool};
pub use spectral::{
    audio_classifier_forward, direction_classifier_forward, mask_decoder_forward, window_slices,
};

pub const HEADS: usize = 4;
pub const HEAD_DIM: usize = FEATURE_DIM / HEADS;
pub const EMBED_DIM: usize = 512;
pub const POOLED_DIM: usize = 2 * FEATURE_DIM;
pub const SPEC_SIZE: usize = 256;
pub const UNET_CHANNELS: [usize; 7] = [8, 16, 32, 64, 128, 256, 512];
pub const CLASSIFIER_CHANNELS: [usize; 3] = [8, 16, 32];
pub const DIRECTION_CHANNELS: [usize; 4] = [16, 32, 64, 128];
pub const DIRECTION_HIDDEN: usize = 256;
pub const PARAMS_INDEX: &str = "params.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetConfig {
    /// Output size of the audio (identity) classifier.
    pub audio_classes: usize,
    /// 10 or 28.
    pub direction_classes: usize,
}

impl NetConfig {
    pub fn new(audio_classes: usize, direction_classes: usize) -> Result<Self> {
        if audio_classes == 0 {
            return Err(Error::invalid("audio classifier needs at least one class"));
        }
        if !matches!(direction_classes, 10 | 28) {
            return Err(Error::invalid(format!(
                "direction classes must be 10 or 28, got {direction_classes}"
            )));
        }
        Ok(Self {
            audio_classes,
            direction_classes,
        })
    }

    /// Tensor names with their shapes and Glorot fans, in a fixed order.
    fn layout(&self) -> Vec<(String, Vec<usize>, usize, usize)> {
        let mut out = Vec::new();
        let dense = |out: &mut Vec<_>, name: &str, o: usize, i: usize| {
            out.push((format!("{name}.w"), vec![o, i], i, o));
            out.push((format!("{name}.b"), vec![o], i, o));
        };
        for h in 0..HEADS {
            out.push((format!("gat.h{h}.w"), vec![HEAD_DIM, FEATURE_DIM], FEATURE_DIM, HEAD_DIM));
            out.push((format!("gat.h{h}.a_src"), vec![HEAD_DIM], HEAD_DIM, 1));
            out.push((format!("gat.h{h}.a_dst"), vec![HEAD_DIM], HEAD_DIM, 1));
        }
        dense(&mut out, "edge", FEATURE_DIM, 2 * FEATURE_DIM);
        dense(&mut out, "gru.proj", EMBED_DIM, POOLED_DIM);
        for gate in ["r", "z", "n"] {
            dense(&mut out, &format!("gru.i{gate}"), EMBED_DIM, EMBED_DIM);
            dense(&mut out, &format!("gru.h{gate}"), EMBED_DIM, EMBED_DIM);
        }
        let conv = |out: &mut Vec<_>, name: String, o: usize, i: usize, k: usize| {
            out.push((format!("{name}.w"), vec![o, i * k * k], i * k * k, o * k * k));
            out.push((format!("{name}.b"), vec![o], i * k * k, o * k * k));
        };
        let mut prev = 1;
        for (l, &c) in UNET_CHANNELS.iter().enumerate() {
            conv(&mut out, format!("unet.enc{l}"), c, prev, 4);
            prev = c;
        }
        // Decoder stage l maps its input (previous stage plus skip) to the
        // mirrored encoder width, ending at one channel.
        let mut input = 2 * EMBED_DIM;
        for l in 0..UNET_CHANNELS.len() {
            let o = if l + 1 < UNET_CHANNELS.len() {
                UNET_CHANNELS[UNET_CHANNELS.len() - 2 - l]
            } else {
                1
            };
            out.push((format!("unet.dec{l}.w"), vec![o * 16, input], input * 16, o * 16));
            out.push((format!("unet.dec{l}.b"), vec![o], input * 16, o * 16));
            input = 2 * o;
        }
        let mut prev = 1;
        for (l, &c) in CLASSIFIER_CHANNELS.iter().enumerate() {
            conv(&mut out, format!("cls.conv{l}"), c, prev, 3);
            prev = c;
        }
        dense(&mut out, "cls.out", self.audio_classes, prev);
        let mut prev = 1;
        for (l, &c) in DIRECTION_CHANNELS.iter().enumerate() {
            conv(&mut out, format!("dir.conv{l}"), c, prev, 3);
            prev = c;
        }
        dense(&mut out, "dir.embed", EMBED_DIM, prev);
        dense(&mut out, "dir.hidden", DIRECTION_HIDDEN, 2 * EMBED_DIM);
        dense(&mut out, "dir.out", self.direction_classes, DIRECTION_HIDDEN);
        out
    }
}

/// FNV-1a, used to give every tensor its own random stream.
fn name_stream(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    pub seed: u64,
    pub config: NetConfig,
    pub tensors: BTreeMap<String, ArrayD<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ParamsIndex {
    seed: u64,
    config: NetConfig,
    tensors: Vec<IndexEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct IndexEntry {
    name: String,
    file: PathBuf,
    shape: Vec<usize>,
}

impl NetParams {
    /// Glorot-uniform weights, zero biases. Each tensor draws from its own
    /// stream, so adding a tensor never changes the others.
    pub fn init(config: NetConfig, seed: u64) -> Self {
        let tensors = config
            .layout()
            .into_par_iter()
            .map(|(name, shape, fan_in, fan_out)| {
                let value = if name.ends_with(".b") {
                    ArrayD::zeros(IxDyn(&shape))
                } else {
                    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(name_stream(&name));
                    ArrayD::from_shape_simple_fn(IxDyn(&shape), || rng.random_range(-a..=a))
                };
                (name, value)
            })
            .collect();
        Self {
            seed,
            config,
            tensors,
        }
    }

    fn get(&self, name: &str) -> Result<&ArrayD<f64>> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::invalid(format!("missing parameter {name}")))
    }

    pub fn matrix(&self, name: &str) -> Result<ArrayView2<'_, f64>> {
        self.get(name)?
            .view()
            .into_dimensionality::<Ix2>()
            .map_err(|_| Error::Shape(format!("parameter {name} is not a matrix")))
    }

    pub fn vector(&self, name: &str) -> Result<ArrayView1<'_, f64>> {
        self.get(name)?
            .view()
            .into_dimensionality::<Ix1>()
            .map_err(|_| Error::Shape(format!("parameter {name} is not a vector")))
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.values().map(|t| t.len()).sum()
    }

    /// Writes one array file per tensor plus a `params.json` index.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let mut entries = Vec::with_capacity(self.tensors.len());
        for (name, t) in &self.tensors {
            let file = PathBuf::from(format!("{name}.a3mp"));
            write_array(&ArrayFile::from_ndarray(t)?, dir.join(&file))?;
            entries.push(IndexEntry {
                name: name.clone(),
                file,
                shape: t.shape().to_vec(),
            });
        }
        let index = ParamsIndex {
            seed: self.seed,
            config: self.config,
            tensors: entries,
        };
        write_json(&index, dir.join(PARAMS_INDEX))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let index: ParamsIndex = read_json(dir.join(PARAMS_INDEX))?;
        let mut tensors = BTreeMap::new();
        for e in index.tensors {
            let t: ArrayD<f64> = read_array(dir.join(&e.file))?.to_ndarray()?;
            if t.shape() != e.shape.as_slice() {
                return Err(Error::Shape(format!(
                    "parameter {} has shape {:?}, index says {:?}",
                    e.name,
                    t.shape(),
                    e.shape
                )));
            }
            tensors.insert(e.name, t);
        }
        let params = Self {
            seed: index.seed,
            config: index.config,
            tensors,
        };
        for (name, shape, ..) in params.config.layout() {
            if params.get(&name)?.shape() != shape.as_slice() {
                return Err(Error::Shape(format!("parameter {name} should have shape {shape:?}")));
            }
        }
        Ok(params)
    }
}

/// Everything the network produces for one video.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoForward {
    /// Unit embeddings, one row per separated source (auditory nodes + 1).
    pub embeddings: Array2<f64>,
    pub masks: Vec<Array2<f64>>,
    /// Masked magnitudes `M̂ ⊙ X`.
    pub separated: Vec<Array2<f64>>,
    /// Identity-class probabilities, one row per source.
    pub class_probs: Array2<f64>,
    /// `direction_probs[w]` holds one row per source for window `w`.
    pub direction_probs: Vec<Array2<f64>>,
}

/// Mask, separated magnitude, class row and per-window direction rows.
type SourceOutputs = (Array2<f64>, Array2<f64>, Array1<f64>, Vec<Array1<f64>>);

/// Runs graph embedding, the recurrent rollout, mask decoding and both
/// classifiers for one video. `mixture` is the pooled 256×256 mixture
/// magnitude; `windows` is the number of direction windows.
pub fn forward_video(
    params: &NetParams,
    graph: &SceneGraph,
    mixture: &Array2<f64>,
    windows: usize,
) -> Result<VideoForward> {
    let zeta = embed_graph(graph, params)?;
    let sources = graph.auditory_index.len().max(1);
    let embeddings = gru_rollout(&zeta, sources, params)?;
    let per_source: Vec<SourceOutputs> = embeddings
        .rows()
        .into_iter()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|y| {
            let mask = mask_decoder_forward(mixture, y, params)?;
            let separated = &mask * mixture;
            let probs = audio_classifier_forward(&separated, params)?;
            let dirs = window_slices(separated.ncols(), windows)?
                .into_iter()
                .map(|r| {
                    let slice = separated.slice(ndarray::s![.., r]).to_owned();
                    direction_classifier_forward(&slice, y, params)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((mask, separated, probs, dirs))
        })
        .collect::<Result<_>>()?;
    let n = per_source.len();
    let k = params.config.audio_classes;
    let d = params.config.direction_classes;
    let mut class_probs = Array2::zeros((n, k));
    let mut direction_probs = vec![Array2::zeros((n, d)); windows];
    let mut masks = Vec::with_capacity(n);
    let mut separated = Vec::with_capacity(n);
    for (i, (m, s, p, dirs)) in per_source.into_iter().enumerate() {
        class_probs.row_mut(i).assign(&p);
        for (w, q) in dirs.iter().enumerate() {
            direction_probs[w].row_mut(i).assign(q);
        }
        masks.push(m);
        separated.push(s);
    }
    Ok(VideoForward {
        embeddings,
        masks,
        separated,
        class_probs,
        direction_probs,
    })
}
