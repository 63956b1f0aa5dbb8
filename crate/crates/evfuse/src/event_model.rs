//! Event-camera firing model and its differentiable surrogate.
//!
//! A pixel fires an event when the log-intensity change between two frames
//! exceeds a threshold:
//!
//! ```text
//! theta = ln(I_t + b) - ln(I_0 + b)
//! e =  1   if theta >  eps_p
//! e = -1   if theta < -eps_n
//! e =  0   otherwise
//! ```
//!
//! The hard thresholding is non-differentiable, so the reconstruction uses
//! the smooth surrogate `tanh(alpha * (h_next - h_t))` per frame pair. Both
//! forms live here, together with a deterministic simulator that converts a
//! video into an event stream by applying the firing rule pairwise.

use ndarray::{Array2, Array3, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::sensing::HighResTensor;

/// Direction of a brightness change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarity {
    /// Brightness increased.
    Positive,
    /// Brightness decreased.
    Negative,
}

impl Polarity {
    /// Signed value, +1 or -1. Zero is never a stored polarity; it means
    /// "no event" in the firing rule.
    pub fn value(self) -> i8 {
        match self {
            Polarity::Positive => 1,
            Polarity::Negative => -1,
        }
    }

    pub fn from_value(v: i8) -> Option<Self> {
        match v {
            1 => Some(Polarity::Positive),
            -1 => Some(Polarity::Negative),
            _ => None,
        }
    }
}

/// A single camera event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Event {
    /// Column index, 0-based.
    pub x: u32,
    /// Row index, 0-based.
    pub y: u32,
    /// Timestamp in microseconds.
    pub t: u64,
    pub polarity: Polarity,
}

/// A time-ordered sequence of events from one sensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventStream {
    sensor_width: u32,
    sensor_height: u32,
    events: Vec<Event>,
}

impl EventStream {
    /// Builds a stream, checking bounds and timestamp order (ties allowed).
    pub fn new(sensor_width: u32, sensor_height: u32, events: Vec<Event>) -> Result<Self> {
        let stream = EventStream { sensor_width, sensor_height, events };
        stream.validate()?;
        Ok(stream)
    }

    /// Re-checks the stream invariants.
    pub fn validate(&self) -> Result<()> {
        if self.sensor_width == 0 || self.sensor_height == 0 {
            return Err(Error::Domain("sensor dimensions must be positive".into()));
        }
        let mut prev_t = 0u64;
        for (i, ev) in self.events.iter().enumerate() {
            if ev.x >= self.sensor_width || ev.y >= self.sensor_height {
                return Err(Error::Bounds(format!(
                    "event {} at ({}, {}) outside sensor {}x{}",
                    i, ev.x, ev.y, self.sensor_width, self.sensor_height
                )));
            }
            if i > 0 && ev.t < prev_t {
                return Err(Error::Ordering(format!(
                    "event {} has timestamp {} before previous {}",
                    i, ev.t, prev_t
                )));
            }
            prev_t = ev.t;
        }
        Ok(())
    }

    pub fn sensor_width(&self) -> u32 {
        self.sensor_width
    }

    pub fn sensor_height(&self) -> u32 {
        self.sensor_height
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Builds a stream without validating; only for tests that need to
    /// construct deliberately broken input.
    #[cfg(test)]
    pub(crate) fn unchecked(sensor_width: u32, sensor_height: u32, events: Vec<Event>) -> Self {
        EventStream { sensor_width, sensor_height, events }
    }
}

/// Thresholds of the firing rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdParams {
    /// Positive log-intensity threshold, > 0.
    pub eps_p: f64,
    /// Negative log-intensity threshold, > 0.
    pub eps_n: f64,
    /// Log offset keeping ln() away from zero, > 0.
    pub b: f64,
}

impl Default for ThresholdParams {
    fn default() -> Self {
        // b is one 8-bit intensity step; eps sits inside the (0, 0.05)
        // range that real sensors are tuned over.
        ThresholdParams { eps_p: 0.02, eps_n: 0.02, b: 1.0 / 255.0 }
    }
}

impl ThresholdParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_p > 0.0 && self.eps_p.is_finite()) {
            return Err(Error::Parameter(format!("eps_p must be > 0, got {}", self.eps_p)));
        }
        if !(self.eps_n > 0.0 && self.eps_n.is_finite()) {
            return Err(Error::Parameter(format!("eps_n must be > 0, got {}", self.eps_n)));
        }
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(Error::Parameter(format!("b must be > 0, got {}", self.b)));
        }
        Ok(())
    }
}

/// How the frames of an [`EventFrameTensor`] were produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorMode {
    /// One event per pixel per frame; values in {-1, 0, +1}.
    Ternary,
    /// Polarities integrated over a window; values are integers.
    Stacked,
}

/// A stack of binned event frames aligned to frame transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct EventFrameTensor {
    data: Array3<f64>,
    mode: TensorMode,
}

impl EventFrameTensor {
    /// Wraps ternary frames, checking every element is -1, 0 or +1.
    pub fn ternary(data: Array3<f64>) -> Result<Self> {
        for &v in data.iter() {
            if v != -1.0 && v != 0.0 && v != 1.0 {
                return Err(Error::Domain(format!("ternary frame holds non-ternary value {v}")));
            }
        }
        Ok(EventFrameTensor { data, mode: TensorMode::Ternary })
    }

    /// Wraps stacked frames, checking every element is an integer.
    pub fn stacked(data: Array3<f64>) -> Result<Self> {
        for &v in data.iter() {
            if !v.is_finite() || v.fract() != 0.0 {
                return Err(Error::Domain(format!("stacked frame holds non-integer value {v}")));
            }
        }
        Ok(EventFrameTensor { data, mode: TensorMode::Stacked })
    }

    /// Frames stacked along axis 0 with shape `(frames, h, w)`.
    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }

    pub fn mode(&self) -> TensorMode {
        self.mode
    }

    pub fn num_frames(&self) -> usize {
        self.data.shape()[0]
    }

    /// `(height, width)` of each frame.
    pub fn frame_shape(&self) -> (usize, usize) {
        (self.data.shape()[1], self.data.shape()[2])
    }
}

/// Sign with `sign(0) = 0`; also maps NaN to 0.
pub(crate) fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn check_same_shape(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!("frame shapes differ: {:?} vs {:?}", a.dim(), b.dim())));
    }
    Ok(())
}

/// Applies the hard firing rule to one frame pair.
///
/// Returns a ternary array: +1 where the log-intensity rose past `eps_p`,
/// -1 where it fell past `eps_n`, 0 elsewhere. Thresholds are strict, so a
/// pixel exactly at threshold fires nothing.
pub fn fire_events(
    prev_frame: ArrayView2<f64>,
    cur_frame: ArrayView2<f64>,
    params: &ThresholdParams,
) -> Result<Array2<i8>> {
    check_same_shape(prev_frame, cur_frame)?;
    params.validate()?;
    let mut out = Array2::<i8>::zeros(prev_frame.raw_dim());
    for ((o, &i0), &it) in out.iter_mut().zip(prev_frame.iter()).zip(cur_frame.iter()) {
        if !i0.is_finite() || !it.is_finite() {
            return Err(Error::Domain("non-finite intensity".into()));
        }
        let theta = (it + params.b).ln() - (i0 + params.b).ln();
        *o = if theta > params.eps_p {
            1
        } else if theta < -params.eps_n {
            -1
        } else {
            0
        };
    }
    Ok(out)
}

/// Simulates an event stream from a video by applying [`fire_events`] to
/// each consecutive frame pair.
///
/// All events of the pair `(k, k+1)` carry the end-of-interval timestamp
/// `(k+1) * frame_period` and are emitted in row-major order (y, then x),
/// so the output is deterministic and sorted. At most one event per pixel
/// per pair; the latent video is the finest temporal grid available.
pub fn simulate_stream(
    video: &HighResTensor,
    params: &ThresholdParams,
    frame_period: u64,
) -> Result<EventStream> {
    let (d, h, w) = video.dims();
    if d < 2 {
        return Err(Error::InsufficientFrames { needed: 2, got: d });
    }
    if frame_period == 0 {
        return Err(Error::Parameter("frame_period must be positive".into()));
    }
    let mut events = Vec::new();
    for k in 0..d - 1 {
        let fired = fire_events(video.frame(k), video.frame(k + 1), params)?;
        let t = (k as u64 + 1) * frame_period;
        for y in 0..h {
            for x in 0..w {
                if let Some(polarity) = Polarity::from_value(fired[(y, x)]) {
                    events.push(Event { x: x as u32, y: y as u32, t, polarity });
                }
            }
        }
    }
    EventStream::new(w as u32, h as u32, events)
}

/// Smooth surrogate for one frame transition: `tanh(alpha * (h_next - h_t))`
/// elementwise, strictly inside (-1, 1).
pub fn tanh_event_frame(
    h_t: ArrayView2<f64>,
    h_next: ArrayView2<f64>,
    alpha: f64,
) -> Result<Array2<f64>> {
    check_same_shape(h_t, h_next)?;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Parameter(format!("alpha must be > 0, got {alpha}")));
    }
    let mut out = Array2::<f64>::zeros(h_t.raw_dim());
    for ((o, &a), &b) in out.iter_mut().zip(h_t.iter()).zip(h_next.iter()) {
        *o = (alpha * (b - a)).tanh();
    }
    Ok(out)
}

/// Event-model layout used by the forward operator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventModelMode {
    /// One model frame per latent transition.
    Ternary,
    /// Each model frame is the sum of the tanh frames of a group of
    /// consecutive transitions; the group sizes must partition `d - 1`.
    Stacked(Vec<usize>),
}

impl EventModelMode {
    /// Singleton groups, one per transition.
    pub fn singleton_groups(d: usize) -> Self {
        EventModelMode::Stacked(vec![1; d.saturating_sub(1)])
    }
}

/// The differentiable event forward operator.
///
/// Ternary mode yields `d - 1` tanh frames; stacked mode sums the tanh
/// frames of each transition group, matching how stacked binning integrates
/// polarities over a window.
pub fn forward_event_model(
    video: &HighResTensor,
    alpha: f64,
    mode: &EventModelMode,
) -> Result<Array3<f64>> {
    let (d, h, w) = video.dims();
    if d < 2 {
        return Err(Error::InsufficientFrames { needed: 2, got: d });
    }
    let groups: Vec<usize> = match mode {
        EventModelMode::Ternary => vec![1; d - 1],
        EventModelMode::Stacked(groups) => {
            validate_groups(groups, d - 1)?;
            groups.clone()
        }
    };
    let mut out = Array3::<f64>::zeros((groups.len(), h, w));
    let mut transition = 0usize;
    for (gi, &size) in groups.iter().enumerate() {
        let mut acc = out.index_axis_mut(Axis(0), gi);
        for _ in 0..size {
            let frame = tanh_event_frame(video.frame(transition), video.frame(transition + 1), alpha)?;
            acc += &frame;
            transition += 1;
        }
    }
    Ok(out)
}

pub(crate) fn validate_groups(groups: &[usize], transitions: usize) -> Result<()> {
    if groups.is_empty() {
        return Err(Error::Partition("grouping is empty".into()));
    }
    if groups.contains(&0) {
        return Err(Error::Partition("grouping contains an empty group".into()));
    }
    let total: usize = groups.iter().sum();
    if total != transitions {
        return Err(Error::Partition(format!(
            "grouping covers {total} transitions but the video has {transitions}"
        )));
    }
    Ok(())
}

/// Fraction of nonzero elements in a ternary tensor.
pub fn event_density(frames: &EventFrameTensor) -> Result<f64> {
    if frames.mode() != TensorMode::Ternary {
        return Err(Error::UnsupportedMode("event_density requires ternary mode".into()));
    }
    let total = frames.data().len();
    if total == 0 {
        return Ok(0.0);
    }
    let nonzero = frames.data().iter().filter(|&&v| v != 0.0).count();
    Ok(nonzero as f64 / total as f64)
}
