//! Frame prediction: extrapolate future frames from the first frame plus
//! the "future" events.
//!
//! ```bash
//! cargo run -p evfuse --example predict
//! ```

use evfuse::binning::bin_conflict_driven;
use evfuse::event_model::simulate_stream;
use evfuse::metrics::{psnr, ssim};
use evfuse::sensing::{forward_intensity, make_problem, SensingCase};
use evfuse::solver::{initialize, solve, SolverConfig};
use evfuse::synth::{moving_square_video, MovingSquare};
use evfuse::ThresholdParams;

fn main() -> evfuse::Result<()> {
    let truth = moving_square_video(64, 64, 9, MovingSquare::default(), 1000);
    let thresholds = ThresholdParams::default();
    let stream = simulate_stream(&truth, &thresholds, 1000)?;
    let binned = bin_conflict_driven(&stream)?;
    let d = binned.frames.num_frames() + 1;

    let observation = forward_intensity(&truth, SensingCase::Prediction);
    let problem = make_problem(observation, binned.frames, d)?;
    let cfg = SolverConfig { thresholds, ..SolverConfig::default() };

    // The baseline for prediction is "nothing moves": d copies of frame 0.
    let frozen = initialize(&problem);
    let (predicted, _) = solve(&problem, &cfg, None)?;

    println!("predicting {d} frames from frame 0 plus {} events\n", stream.len());
    println!("frame   frozen baseline       prediction");
    for k in 0..d {
        let fp = psnr(frozen.frame(k), truth.frame(k))?;
        let fs = ssim(frozen.frame(k), truth.frame(k))?;
        let pp = psnr(predicted.frame(k), truth.frame(k))?;
        let ps = ssim(predicted.frame(k), truth.frame(k))?;
        println!("{k:>5}   {fp:>6.2} / {fs:.4}       {pp:>6.2} / {ps:.4}");
    }
    let last = d - 1;
    println!(
        "\nend-frame gain over the frozen baseline: {:+.2} dB",
        psnr(predicted.frame(last), truth.frame(last))? - psnr(frozen.frame(last), truth.frame(last))?
    );
    Ok(())
}
