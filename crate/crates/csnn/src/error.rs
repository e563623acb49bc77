//! Crate-wide error type.

use std::path::PathBuf;

/// Errors produced by any stage of the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An image failed a structural precondition (empty, too small, wrong shape).
    #[error("invalid image: {0}")]
    InvalidImage(String),

    /// A parameter set violated one of its invariants. The message names the
    /// violated constraint.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// Two components were combined with incompatible shapes.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A bounding box does not intersect its source image.
    #[error("bounding box {0} does not intersect the image")]
    EmptyIntersection(String),

    /// A network referenced a neuron id that does not exist.
    #[error("synapse references missing neuron id {0}")]
    DanglingNeuron(usize),

    /// A scheduled spike falls outside the simulation window.
    #[error("spike at {time} ms is outside the {duration} ms simulation window")]
    EventOutOfRange { time: u32, duration: u32 },

    /// Calibration could not reach the target rate inside the scale bracket.
    #[error(
        "calibration target {target_hz} Hz unreachable in scale bracket \
         [2^-20, 2^20]; best achieved {achieved_hz} Hz at scale {scale}"
    )]
    CalibrationUnreachable {
        target_hz: f64,
        achieved_hz: f64,
        scale: f64,
    },

    /// A persisted file failed to parse. Line numbers are 1-based.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// A class label was outside the configured range.
    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: usize, num_classes: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
