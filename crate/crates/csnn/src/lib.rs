//! Convolutional spiking neural network pipeline.
//!
//! The crate covers the full path from raw annotated images to a trained
//! classifier:
//!
//! 1. [`preprocess`] — grayscale conversion, differential heat maps, square
//!    crops and max-shrink to 31×31 patches.
//! 2. [`kernel`] — competitive, resource-conserving construction of
//!    convolution kernels from a patch corpus.
//! 3. [`snn`] — discrete-time integrate-and-fire simulation with threshold
//!    subtraction and rate-coded input.
//! 4. [`builder`] — porting a kernel bank into a fixed-weight convolution +
//!    pooling network, with rate calibration.
//! 5. [`colanet`] — a columnar plastic classifier head trained with
//!    anti-Hebbian depression plus reward potentiation.
//! 6. [`pipeline`] — batch orchestration, k-fold evaluation, reports and
//!    kernel visualization behind the `csnn` binary.

pub mod builder;
pub mod colanet;
pub mod error;
pub mod kernel;
pub mod pipeline;
pub mod preprocess;
pub mod snn;

pub use error::{Error, Result};
