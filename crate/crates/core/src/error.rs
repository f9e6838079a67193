use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the saliency pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("pixel coordinate ({x}, {y}) outside a {width}x{height} image")]
    OutOfRange {
        x: f64,
        y: f64,
        width: usize,
        height: usize,
    },

    #[error("field of view {fov} rad is too small to cover the sphere with six views (need >= pi/2)")]
    FovTooSmall { fov: f64 },

    #[error("invalid frustum: {0}")]
    InvalidFrustum(String),

    #[error("every pixel of the map is a hole")]
    AllHoles,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("need at least two distinct sources to split, found {0}")]
    TooFewSources(usize),

    #[error("training diverged at iteration {iteration}: test loss {test_loss} exceeds 10x best {best}")]
    Diverged {
        iteration: usize,
        test_loss: f64,
        best: f64,
    },

    #[error("saliency map sums to zero")]
    AllZero,

    #[error("input is constant (zero standard deviation)")]
    ConstantInput,

    #[error("fixation set is empty")]
    EmptyFixations,

    #[error("corrupt file {path}: {reason}")]
    CorruptFile { path: PathBuf, reason: String },

    #[error("architecture mismatch: {0}")]
    ArchitectureMismatch(String),

    #[error("bad image {path}: {reason}")]
    BadImage { path: PathBuf, reason: String },

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
