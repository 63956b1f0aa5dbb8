//! Intensity forward models and the fusion problem descriptor.
//!
//! Three sensing cases are supported: interpolation observes the first and
//! last frame of the latent video, prediction observes only the first, and
//! motion deblur observes the temporal mean of all frames. The deblur
//! operator is modelled as a mean rather than a raw sum so the observation
//! lives on the same [0, 1] intensity scale as the latent tensor and the
//! loss weights transfer across frame counts.

use ndarray::{Array2, Array3, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::event_model::{validate_groups, EventFrameTensor, EventModelMode, TensorMode};

/// The latent high-framerate video, shape `(d, h, w)`, intensities in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct HighResTensor {
    data: Array3<f64>,
    frame_period_us: u64,
}

impl HighResTensor {
    /// Wraps frame data, clamping intensities into [0, 1] on ingestion.
    /// Non-finite values and videos with fewer than two frames are rejected.
    pub fn new(mut data: Array3<f64>, frame_period_us: u64) -> Result<Self> {
        let d = data.shape()[0];
        if d < 2 {
            return Err(Error::InsufficientFrames { needed: 2, got: d });
        }
        if frame_period_us == 0 {
            return Err(Error::Parameter("frame_period_us must be positive".into()));
        }
        for v in data.iter_mut() {
            if !v.is_finite() {
                return Err(Error::Domain("non-finite intensity".into()));
            }
            *v = v.clamp(0.0, 1.0);
        }
        Ok(HighResTensor { data, frame_period_us })
    }

    /// `(d, h, w)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        let s = self.data.shape();
        (s[0], s[1], s[2])
    }

    pub fn num_frames(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn frame_period_us(&self) -> u64 {
        self.frame_period_us
    }

    pub fn frame(&self, k: usize) -> ArrayView2<'_, f64> {
        self.data.index_axis(Axis(0), k)
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }
}

/// Which intensity frames the camera observed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SensingCase {
    Interpolation,
    Prediction,
    Deblur,
}

impl std::fmt::Display for SensingCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SensingCase::Interpolation => write!(f, "interpolation"),
            SensingCase::Prediction => write!(f, "prediction"),
            SensingCase::Deblur => write!(f, "deblur"),
        }
    }
}

/// A case-tagged intensity measurement.
#[derive(Debug, Clone, PartialEq)]
pub enum Observation {
    /// First and last frame of the latent video.
    Interpolation { first: Array2<f64>, last: Array2<f64> },
    /// First frame only.
    Prediction { first: Array2<f64> },
    /// Temporal mean over all frames.
    Deblur { mean: Array2<f64> },
}

impl Observation {
    pub fn case(&self) -> SensingCase {
        match self {
            Observation::Interpolation { .. } => SensingCase::Interpolation,
            Observation::Prediction { .. } => SensingCase::Prediction,
            Observation::Deblur { .. } => SensingCase::Deblur,
        }
    }

    /// `(h, w)` of the observed frames.
    pub fn frame_shape(&self) -> (usize, usize) {
        match self {
            Observation::Interpolation { first, .. } => first.dim(),
            Observation::Prediction { first } => first.dim(),
            Observation::Deblur { mean } => mean.dim(),
        }
    }

    /// Number of observed intensity pixels (the normalizer of the intensity
    /// loss term).
    pub fn pixel_count(&self) -> usize {
        let (h, w) = self.frame_shape();
        match self {
            Observation::Interpolation { .. } => 2 * h * w,
            _ => h * w,
        }
    }
}

/// Applies the intensity sensing operator for `case` to a video.
pub fn forward_intensity(video: &HighResTensor, case: SensingCase) -> Observation {
    let (d, _, _) = video.dims();
    match case {
        SensingCase::Interpolation => Observation::Interpolation {
            first: video.frame(0).to_owned(),
            last: video.frame(d - 1).to_owned(),
        },
        SensingCase::Prediction => Observation::Prediction { first: video.frame(0).to_owned() },
        SensingCase::Deblur => {
            let mut mean = Array2::<f64>::zeros(video.frame(0).dim());
            for k in 0..d {
                mean += &video.frame(k);
            }
            mean /= d as f64;
            Observation::Deblur { mean }
        }
    }
}

/// Immutable bundle consumed by the solver: the observation, the binned
/// events, the transition grouping of the event model and the target frame
/// count.
#[derive(Debug, Clone)]
pub struct Problem {
    observation: Observation,
    events: EventFrameTensor,
    groups: Vec<usize>,
    d: usize,
    frame_period_us: u64,
}

impl Problem {
    pub fn observation(&self) -> &Observation {
        &self.observation
    }

    pub fn events(&self) -> &EventFrameTensor {
        &self.events
    }

    /// Transitions covered by each event frame; singleton groups in ternary
    /// mode.
    pub fn groups(&self) -> &[usize] {
        &self.groups
    }

    pub fn event_model_mode(&self) -> EventModelMode {
        match self.events.mode() {
            TensorMode::Ternary => EventModelMode::Ternary,
            TensorMode::Stacked => EventModelMode::Stacked(self.groups.clone()),
        }
    }

    /// Target latent frame count.
    pub fn d(&self) -> usize {
        self.d
    }

    /// `(h, w)` of every frame in the problem.
    pub fn frame_shape(&self) -> (usize, usize) {
        self.observation.frame_shape()
    }

    pub fn frame_period_us(&self) -> u64 {
        self.frame_period_us
    }

    pub fn with_frame_period(mut self, frame_period_us: u64) -> Self {
        self.frame_period_us = frame_period_us;
        self
    }
}

/// Bundles an observation with binned events into a solvable problem.
///
/// Ternary tensors must hold exactly `d - 1` frames. Stacked tensors get a
/// uniform grouping, so `d - 1` must be divisible by the frame count; use
/// [`make_problem_with_groups`] for a non-uniform split.
pub fn make_problem(
    observation: Observation,
    events: EventFrameTensor,
    d: usize,
) -> Result<Problem> {
    let m = events.num_frames();
    let groups = match events.mode() {
        TensorMode::Ternary => {
            if d < 2 || m != d - 1 {
                return Err(Error::Consistency(format!(
                    "{m} ternary event frames require d = {}, got d = {d}",
                    m + 1
                )));
            }
            vec![1; m]
        }
        TensorMode::Stacked => {
            if d < 2 || m == 0 || !(d - 1).is_multiple_of(m) {
                return Err(Error::Consistency(format!(
                    "cannot split {} transitions uniformly over {m} stacked frames",
                    d.saturating_sub(1)
                )));
            }
            vec![(d - 1) / m; m]
        }
    };
    finish_problem(observation, events, groups, d)
}

/// Like [`make_problem`] but with an explicit transition grouping; `d` is
/// implied by the group sum.
pub fn make_problem_with_groups(
    observation: Observation,
    events: EventFrameTensor,
    groups: Vec<usize>,
) -> Result<Problem> {
    if groups.len() != events.num_frames() {
        return Err(Error::Partition(format!(
            "{} groups for {} event frames",
            groups.len(),
            events.num_frames()
        )));
    }
    let d = groups.iter().sum::<usize>() + 1;
    finish_problem(observation, events, groups, d)
}

fn finish_problem(
    observation: Observation,
    events: EventFrameTensor,
    groups: Vec<usize>,
    d: usize,
) -> Result<Problem> {
    validate_groups(&groups, d - 1)?;
    if observation.frame_shape() != events.frame_shape() {
        return Err(Error::Dimension(format!(
            "observation frames are {:?} but event frames are {:?}",
            observation.frame_shape(),
            events.frame_shape()
        )));
    }
    Ok(Problem { observation, events, groups, d, frame_period_us: 1000 })
}
