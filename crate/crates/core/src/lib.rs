//! Continuous concentration-level estimation from body keypoint time series.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`features`] pools keypoint coordinates into 50-frame windows and
//!    reduces each window to four standard deviations.
//! 2. [`mlp`] maps each feature vector to a recognition level in (0, 1)
//!    with a 4-8-8-1 network trained by binary cross-entropy and Adam.
//! 3. [`kalman`] smooths the recognition levels into estimation levels.
//! 4. [`mixture_fit`] fits a two-Gaussian curve to the histogram of the
//!    estimation levels.
//!
//! [`keypoint_io`] handles trace files and [`synth`] produces labeled
//! synthetic traces for testing the whole chain without recorded data.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod exec;
pub mod features;
pub mod kalman;
pub mod keypoint_io;
pub mod mixture_fit;
pub mod mlp;
pub mod synth;

pub use error::{Error, Result};
pub use exec::Execution;
