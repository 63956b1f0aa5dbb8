//! Ablate the TV terms: solve the same interpolation problem with the
//! pixel loss alone, each TV term alone, and the full objective.
//!
//! ```bash
//! cargo run -p evfuse --example loss_ablation
//! ```

use evfuse::binning::bin_conflict_driven;
use evfuse::event_model::simulate_stream;
use evfuse::metrics::{psnr, ssim};
use evfuse::sensing::{forward_intensity, make_problem, SensingCase};
use evfuse::solver::{solve, SolverConfig};
use evfuse::synth::{moving_square_video, MovingSquare};
use evfuse::ThresholdParams;

fn main() -> evfuse::Result<()> {
    let truth = moving_square_video(64, 64, 9, MovingSquare::default(), 1000);
    let thresholds = ThresholdParams::default();
    let stream = simulate_stream(&truth, &thresholds, 1000)?;
    let binned = bin_conflict_driven(&stream)?;
    let d = binned.frames.num_frames() + 1;
    let observation = forward_intensity(&truth, SensingCase::Interpolation);
    let problem = make_problem(observation, binned.frames, d)?;
    let base = SolverConfig { thresholds, ..SolverConfig::default() };
    let mid = (d - 1) / 2;

    println!("mid-frame quality under loss ablations (interpolation):\n");
    for (name, lambda_xy, lambda_t) in [
        ("pixel only", 0.0, 0.0),
        ("pixel + temporal TV", 0.0, base.lambda_t),
        ("pixel + spatial TV", base.lambda_xy, 0.0),
        ("full objective", base.lambda_xy, base.lambda_t),
    ] {
        let cfg = SolverConfig { lambda_xy, lambda_t, ..base.clone() };
        let (rec, _) = solve(&problem, &cfg, None)?;
        let p = psnr(rec.frame(mid), truth.frame(mid))?;
        let s = ssim(rec.frame(mid), truth.frame(mid))?;
        println!("{name:<22} psnr {p:>6.2} dB   ssim {s:.4}");
    }
    Ok(())
}
