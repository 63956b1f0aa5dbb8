//! Simulate an event stream from a synthetic video and write it to disk.
//!
//! ```bash
//! cargo run -p evfuse --example simulate_events
//! ```

use evfuse::event_model::{event_density, fire_events, simulate_stream, EventFrameTensor};
use evfuse::io::{write_event_text, write_pgm};
use evfuse::synth::{moving_square_video, MovingSquare};
use evfuse::ThresholdParams;
use ndarray::Array3;

fn main() -> evfuse::Result<()> {
    let out_dir = std::env::temp_dir().join("evfuse_simulate_events");
    std::fs::create_dir_all(&out_dir).expect("create output directory");

    let video = moving_square_video(64, 64, 9, MovingSquare::default(), 1000);
    let thresholds = ThresholdParams::default();
    let stream = simulate_stream(&video, &thresholds, 1000)?;

    // Per-transition ternary frames give the stream's density.
    let (d, h, w) = video.dims();
    let mut frames = Array3::<f64>::zeros((d - 1, h, w));
    for k in 0..d - 1 {
        let fired = fire_events(video.frame(k), video.frame(k + 1), &thresholds)?;
        for ((y, x), &v) in fired.indexed_iter() {
            frames[(k, y, x)] = f64::from(v);
        }
    }
    let density = event_density(&EventFrameTensor::ternary(frames)?)?;

    for k in 0..d {
        write_pgm(video.frame(k), &out_dir.join(format!("frame_{k:03}.pgm")))?;
    }
    write_event_text(&stream, &out_dir.join("events.txt"))?;

    println!("video: {d} frames of {w}x{h}");
    println!("thresholds: eps_p = {}, eps_n = {}, b = {}", thresholds.eps_p, thresholds.eps_n, thresholds.b);
    println!("simulated {} events (density {density:.4})", stream.len());
    let first = stream.events().first().unwrap();
    let last = stream.events().last().unwrap();
    println!("time span: {} us .. {} us", first.t, last.t);
    println!("wrote frames and events.txt to {}", out_dir.display());
    Ok(())
}
