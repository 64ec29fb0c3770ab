use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point3 = nalgebra::Point3<f64>;

/// Axis-aligned pixel rectangle `[x0, y0, x1, y1)` with continuous
/// coordinates; the pixels it covers are the integer cells it overlaps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BoxRect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl From<[f64; 4]> for BoxRect {
    fn from([x0, y0, x1, y1]: [f64; 4]) -> Self {
        Self { x0, y0, x1, y1 }
    }
}

impl From<BoxRect> for [f64; 4] {
    fn from(b: BoxRect) -> Self {
        [b.x0, b.y0, b.x1, b.y1]
    }
}

impl BoxRect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> f64 {
        (self.x1 - self.x0).max(0.0)
    }

    pub fn height(&self) -> f64 {
        (self.y1 - self.y0).max(0.0)
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn intersection_area(&self, other: &BoxRect) -> f64 {
        let w = self.x1.min(other.x1) - self.x0.max(other.x0);
        let h = self.y1.min(other.y1) - self.y0.max(other.y0);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    pub fn within(&self, width: usize, height: usize) -> bool {
        self.x0 >= 0.0 && self.y0 >= 0.0 && self.x1 <= width as f64 && self.y1 <= height as f64
    }

    /// Row and column index ranges of the covered pixels, clipped to the image.
    pub fn pixel_ranges(
        &self,
        width: usize,
        height: usize,
    ) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let clip = |lo: f64, hi: f64, n: usize| {
            let a = lo.floor().max(0.0) as usize;
            let b = (hi.ceil().max(0.0) as usize).min(n);
            a.min(b)..b
        };
        (clip(self.y0, self.y1, height), clip(self.x0, self.x1, width))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    /// Detection the cloud was lifted from, when there is one.
    pub source_box: Option<usize>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Self {
        Self {
            points,
            source_box: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Maximum of a depth frame, used to bring depths into `[0, 1]`.
pub(crate) fn frame_max(depth: &Array2<f64>) -> f64 {
    depth.iter().copied().fold(0.0, f64::max)
}

pub(crate) fn normalized_depth(value: f64, max: f64) -> f64 {
    if max > 0.0 {
        value / max
    } else {
        0.0
    }
}

/// Pixel index mapped to `[0, 1]`: `i / (n - 1)`, or 0 for single-pixel axes.
pub(crate) fn axis_coord(i: f64, n: usize) -> f64 {
    if n > 1 {
        i / (n - 1) as f64
    } else {
        0.0
    }
}

/// Lifts the pixels of `bbox` (every `stride`-th row and column) into a
/// pseudo-3D cloud: `x = col / (W - 1)`, `y = row / (H - 1)` and depth
/// divided by the frame maximum.
pub fn backproject(depth: &Array2<f64>, bbox: &BoxRect, stride: usize) -> Result<PointCloud> {
    if stride == 0 {
        return Err(Error::invalid("stride must be positive"));
    }
    let (height, width) = depth.dim();
    if !bbox.within(width, height) {
        return Err(Error::invalid(format!(
            "box {:?} outside {width}x{height} frame",
            <[f64; 4]>::from(*bbox)
        )));
    }
    if depth.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite depth value"));
    }
    let (rows, cols) = bbox.pixel_ranges(width, height);
    if rows.is_empty() || cols.is_empty() {
        return Err(Error::Empty("box covers no pixels"));
    }
    let max = frame_max(depth);
    let points = rows
        .step_by(stride)
        .flat_map(|r| cols.clone().step_by(stride).map(move |c| (r, c)))
        .map(|(r, c)| {
            Point3::new(
                axis_coord(c as f64, width),
                axis_coord(r as f64, height),
                normalized_depth(depth[[r, c]], max),
            )
        })
        .collect();
    Ok(PointCloud::new(points))
}
