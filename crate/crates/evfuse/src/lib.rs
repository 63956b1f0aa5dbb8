//! evfuse — fusing low-framerate intensity frames with event-camera streams
//! to synthesize a high-framerate grayscale video.
//!
//! The pipeline has four stages, each usable on its own:
//!
//! 1. [`event_model`] — the physical event-firing model and its smooth tanh
//!    surrogate, plus a deterministic event simulator for synthetic data.
//! 2. [`binning`] — turning a raw event stream into event frames, either
//!    conflict-driven (ternary frames) or stacked over time windows.
//! 3. [`sensing`] + [`solver`] — the intensity forward models for
//!    interpolation, prediction and motion deblur, and the Adam-based
//!    reconstruction that inverts them jointly with the event model under
//!    spatial and temporal total-variation priors.
//! 4. [`metrics`] + [`io`] — PSNR/SSIM/error maps and the on-disk formats
//!    (event text, PGM, tensor container, config, manifest).
//!
//! Every operation is a pure function of its inputs; two runs with identical
//! inputs produce bit-identical outputs. See the `examples/` directory for
//! one runnable program per capability, and the `evfuse` binary for the
//! scriptable command-line front end.

pub mod binning;
pub mod cli;
pub mod error;
pub mod event_model;
pub mod io;
pub mod metrics;
pub mod sensing;
pub mod solver;
pub mod synth;

pub use error::{Error, Result};
pub use event_model::{Event, EventFrameTensor, EventStream, Polarity, TensorMode, ThresholdParams};
pub use sensing::{HighResTensor, Observation, Problem, SensingCase};
pub use solver::{SolveTrace, SolverConfig};
