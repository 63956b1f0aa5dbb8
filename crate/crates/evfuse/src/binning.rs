//! Binning a raw event stream into event frames.
//!
//! Two strategies:
//!
//! * conflict-driven — events fill the current frame until one lands on a
//!   pixel that is already occupied, which opens a new frame. Every output
//!   frame is ternary and keeps per-pixel temporal order, and the frame
//!   count is minimal among contiguous binnings with one event per pixel
//!   per frame.
//! * stacked — the stream's time span is split into equal windows and
//!   polarities are summed per pixel per window.

use ndarray::{Array2, Array3, Axis};

use crate::error::{Error, Result};
use crate::event_model::{EventFrameTensor, EventStream};

/// Binned frames plus the timestamp range each frame covers.
#[derive(Debug, Clone)]
pub struct BinningResult {
    pub frames: EventFrameTensor,
    /// Inclusive `(start, end)` microsecond range per frame, ordered and
    /// non-overlapping (ties at shared endpoints allowed).
    pub frame_boundaries: Vec<(u64, u64)>,
}

/// Conflict-driven binning: one event per pixel per frame, ternary output.
///
/// An incoming event joins the current frame unless its pixel already holds
/// an event there (regardless of polarity), in which case a new frame opens
/// with that event. Equal timestamps are processed in stream order. An
/// empty stream yields an empty result, not an error.
pub fn bin_conflict_driven(stream: &EventStream) -> Result<BinningResult> {
    stream.validate()?;
    let h = stream.sensor_height() as usize;
    let w = stream.sensor_width() as usize;

    let mut frames: Vec<Array2<f64>> = Vec::new();
    let mut boundaries: Vec<(u64, u64)> = Vec::new();
    // Occupancy is stamped with the frame index so opening a new frame
    // does not require clearing the grid.
    let mut stamp = Array2::<usize>::from_elem((h, w), usize::MAX);
    let mut current: Option<Array2<f64>> = None;

    for ev in stream.events() {
        let pos = (ev.y as usize, ev.x as usize);
        let frame_idx = frames.len();
        let occupied = current.is_some() && stamp[pos] == frame_idx;
        if occupied || current.is_none() {
            if let Some(done) = current.take() {
                frames.push(done);
            }
            current = Some(Array2::zeros((h, w)));
            boundaries.push((ev.t, ev.t));
        }
        let frame = current.as_mut().expect("current frame exists");
        frame[pos] = f64::from(ev.polarity.value());
        stamp[pos] = frames.len();
        boundaries.last_mut().expect("boundary exists").1 = ev.t;
    }
    if let Some(done) = current.take() {
        frames.push(done);
    }

    let mut data = Array3::<f64>::zeros((frames.len(), h, w));
    for (k, f) in frames.iter().enumerate() {
        data.index_axis_mut(Axis(0), k).assign(f);
    }
    Ok(BinningResult { frames: EventFrameTensor::ternary(data)?, frame_boundaries: boundaries })
}

/// Stacked binning: polarities summed per pixel over `num_frames` equal
/// time windows.
///
/// An event exactly on a window boundary goes to the later window, except
/// the final timestamp, which goes to the last window. An empty stream
/// yields an empty result.
pub fn bin_stacked(stream: &EventStream, num_frames: usize) -> Result<BinningResult> {
    if num_frames < 1 {
        return Err(Error::Parameter("num_frames must be at least 1".into()));
    }
    stream.validate()?;
    let h = stream.sensor_height() as usize;
    let w = stream.sensor_width() as usize;
    if stream.is_empty() {
        return Ok(BinningResult {
            frames: EventFrameTensor::stacked(Array3::zeros((0, h, w)))?,
            frame_boundaries: Vec::new(),
        });
    }

    let t0 = stream.events().first().expect("nonempty").t;
    let t1 = stream.events().last().expect("nonempty").t;
    let span = t1 - t0;
    let n = num_frames as u128;

    let mut data = Array3::<f64>::zeros((num_frames, h, w));
    for ev in stream.events() {
        let idx = if ev.t == t1 || span == 0 {
            num_frames - 1
        } else {
            // floor((t - t0) * n / span); boundary hits land in the later
            // window because the division is exact there.
            (((ev.t - t0) as u128 * n) / span as u128) as usize
        };
        data[(idx, ev.y as usize, ev.x as usize)] += f64::from(ev.polarity.value());
    }

    let mut boundaries = Vec::with_capacity(num_frames);
    for i in 0..num_frames as u128 {
        let start = t0 + (i * span as u128 / n) as u64;
        let end = if i == n - 1 { t1 } else { t0 + ((i + 1) * span as u128 / n) as u64 };
        boundaries.push((start, end));
    }
    Ok(BinningResult { frames: EventFrameTensor::stacked(data)?, frame_boundaries: boundaries })
}
