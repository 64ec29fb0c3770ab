use std::ops::Range;

use ndarray::{concatenate, Array1, Array2, Array3, ArrayView1, Axis};

use super::layers::{conv2d, conv_transpose2d, dense, global_average, leaky_relu, sigmoid, softmax};
use super::{NetParams, CLASSIFIER_CHANNELS, DIRECTION_CHANNELS, EMBED_DIM, SPEC_SIZE, UNET_CHANNELS};
use crate::error::{Error, Result};

/// Magnitudes enter every network as `ln(1 + x)`.
fn input_map(x: &Array2<f64>) -> Array3<f64> {
    x.mapv(f64::ln_1p).insert_axis(Axis(0))
}

fn check_embedding(y: ArrayView1<f64>) -> Result<()> {
    if y.len() != EMBED_DIM {
        return Err(Error::Shape(format!("embedding has {} entries, expected {EMBED_DIM}", y.len())));
    }
    Ok(())
}

fn check_square(x: &Array2<f64>) -> Result<()> {
    if x.dim() != (SPEC_SIZE, SPEC_SIZE) {
        return Err(Error::Shape(format!(
            "spectrogram is {:?}, expected {SPEC_SIZE}x{SPEC_SIZE}",
            x.dim()
        )));
    }
    Ok(())
}

/// U-Net mask decoder: seven 4×4 stride-2 convolutions down to 2×2, the
/// embedding tiled 2×2 and stacked onto the bottleneck, seven transposed
/// convolutions back up with skip connections, then a sigmoid.
pub fn mask_decoder_forward(
    x: &Array2<f64>,
    y: ArrayView1<f64>,
    params: &NetParams,
) -> Result<Array2<f64>> {
    check_square(x)?;
    check_embedding(y)?;
    let mut skips = Vec::with_capacity(UNET_CHANNELS.len());
    let mut h = input_map(x);
    for l in 0..UNET_CHANNELS.len() {
        h = conv2d(
            &h,
            params.matrix(&format!("unet.enc{l}.w"))?,
            params.vector(&format!("unet.enc{l}.b"))?,
            4,
            2,
            1,
        )?
        .mapv(leaky_relu);
        skips.push(h.clone());
    }
    let (_, bh, bw) = h.dim();
    let tiled = Array3::from_shape_fn((EMBED_DIM, bh, bw), |(c, _, _)| y[c]);
    h = concatenate![Axis(0), h, tiled];
    let last = UNET_CHANNELS.len() - 1;
    for l in 0..=last {
        h = conv_transpose2d(
            &h,
            params.matrix(&format!("unet.dec{l}.w"))?,
            params.vector(&format!("unet.dec{l}.b"))?,
            4,
            2,
            1,
        )?;
        if l < last {
            h.mapv_inplace(leaky_relu);
            let skip = &skips[last - 1 - l];
            h = concatenate![Axis(0), h, skip.view()];
        }
    }
    Ok(h.index_axis_move(Axis(0), 0).mapv(sigmoid))
}

fn conv_stack(x: &Array2<f64>, prefix: &str, stages: usize, params: &NetParams) -> Result<Array1<f64>> {
    let mut h = input_map(x);
    for l in 0..stages {
        h = conv2d(
            &h,
            params.matrix(&format!("{prefix}.conv{l}.w"))?,
            params.vector(&format!("{prefix}.conv{l}.b"))?,
            3,
            2,
            1,
        )?
        .mapv(leaky_relu);
    }
    Ok(global_average(&h))
}

/// Small convolutional classifier over a separated magnitude; returns a
/// probability row over the identity classes.
pub fn audio_classifier_forward(s: &Array2<f64>, params: &NetParams) -> Result<Array1<f64>> {
    check_square(s)?;
    let pooled = conv_stack(s, "cls", CLASSIFIER_CHANNELS.len(), params)?;
    let logits = dense(params.matrix("cls.out.w")?, params.vector("cls.out.b")?, pooled.view())?;
    Ok(softmax(&logits))
}

/// Direction classifier over one time slice `(256, T_w)` of a separated
/// magnitude, conditioned on the source embedding.
pub fn direction_classifier_forward(
    slice: &Array2<f64>,
    y: ArrayView1<f64>,
    params: &NetParams,
) -> Result<Array1<f64>> {
    check_embedding(y)?;
    if slice.nrows() != SPEC_SIZE || slice.ncols() == 0 {
        return Err(Error::Shape(format!("direction slice is {:?}", slice.dim())));
    }
    let pooled = conv_stack(slice, "dir", DIRECTION_CHANNELS.len(), params)?;
    let embed = dense(params.matrix("dir.embed.w")?, params.vector("dir.embed.b")?, pooled.view())?;
    let joint = concatenate![Axis(0), embed, y];
    let hidden = dense(params.matrix("dir.hidden.w")?, params.vector("dir.hidden.b")?, joint.view())?
        .mapv(leaky_relu);
    let logits = dense(params.matrix("dir.out.w")?, params.vector("dir.out.b")?, hidden.view())?;
    Ok(softmax(&logits))
}

/// Splits `frames` columns into `windows` consecutive slices of width
/// `frames / windows`; the last slice also takes the remainder.
pub fn window_slices(frames: usize, windows: usize) -> Result<Vec<Range<usize>>> {
    if windows == 0 || windows > frames {
        return Err(Error::invalid(format!(
            "cannot split {frames} frames into {windows} windows"
        )));
    }
    let width = frames / windows;
    Ok((0..windows)
        .map(|w| {
            let end = if w + 1 == windows { frames } else { (w + 1) * width };
            w * width..end
        })
        .collect())
}
