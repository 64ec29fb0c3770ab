pub mod audio;
pub mod error;
pub mod geometry;
pub mod losses;
pub mod metrics;
pub mod motion;
pub mod neural;
pub mod scenegraph;
pub mod synth;
pub mod tensorio;

pub use error::{Error, Result};
