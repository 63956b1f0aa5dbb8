//! Compare conflict-driven binning against stacked time-window binning on
//! the same stream.
//!
//! ```bash
//! cargo run -p evfuse --example binning_strategies
//! ```

use evfuse::binning::{bin_conflict_driven, bin_stacked};
use evfuse::event_model::simulate_stream;
use evfuse::synth::{moving_square_video, MovingSquare};
use evfuse::ThresholdParams;

fn main() -> evfuse::Result<()> {
    let video = moving_square_video(64, 64, 9, MovingSquare::default(), 1000);
    let stream = simulate_stream(&video, &ThresholdParams::default(), 1000)?;
    println!("stream: {} events over {} us", stream.len(), stream.events().last().unwrap().t);

    let conflict = bin_conflict_driven(&stream)?;
    let m = conflict.frames.num_frames();
    println!("\nconflict-driven: {m} ternary frames");
    for (i, (a, b)) in conflict.frame_boundaries.iter().enumerate() {
        let nonzero = conflict
            .frames
            .data()
            .index_axis(ndarray::Axis(0), i)
            .iter()
            .filter(|&&v| v != 0.0)
            .count();
        println!("  frame {i}: [{a:>5}, {b:>5}] us, {nonzero} events");
    }

    // Match the frame count so the strategies are comparable.
    let stacked = bin_stacked(&stream, m)?;
    println!("\nstacked over {m} equal windows:");
    for (i, (a, b)) in stacked.frame_boundaries.iter().enumerate() {
        let frame = stacked.frames.data().index_axis(ndarray::Axis(0), i);
        let total: f64 = frame.iter().map(|v| v.abs()).sum();
        let peak = frame.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
        println!("  frame {i}: [{a:>5}, {b:>5}] us, |sum| {total}, peak |count| {peak}");
    }

    let conserved: f64 = stream.events().iter().map(|e| f64::from(e.polarity.value())).sum();
    assert_eq!(conflict.frames.data().sum(), conserved);
    assert_eq!(stacked.frames.data().sum(), conserved);
    println!("\nboth strategies conserve total polarity: {conserved}");
    Ok(())
}
