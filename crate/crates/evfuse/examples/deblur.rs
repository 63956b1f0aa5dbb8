//! Motion deblur: recover a sharp frame sequence from one motion-blurred
//! observation (the temporal mean) plus the events fired during the
//! exposure.
//!
//! ```bash
//! cargo run -p evfuse --example deblur
//! ```

use evfuse::binning::bin_conflict_driven;
use evfuse::event_model::simulate_stream;
use evfuse::io::write_pgm;
use evfuse::metrics::psnr;
use evfuse::sensing::{forward_intensity, make_problem, SensingCase};
use evfuse::solver::{solve, SolverConfig};
use evfuse::synth::{moving_square_video, MovingSquare};
use evfuse::{Observation, ThresholdParams};

fn main() -> evfuse::Result<()> {
    let out_dir = std::env::temp_dir().join("evfuse_deblur");
    std::fs::create_dir_all(&out_dir).expect("create output directory");

    let truth = moving_square_video(64, 64, 9, MovingSquare::default(), 1000);
    let thresholds = ThresholdParams::default();
    let stream = simulate_stream(&truth, &thresholds, 1000)?;
    let binned = bin_conflict_driven(&stream)?;
    let d = binned.frames.num_frames() + 1;

    let observation = forward_intensity(&truth, SensingCase::Deblur);
    let blurry = match &observation {
        Observation::Deblur { mean } => mean.clone(),
        _ => unreachable!(),
    };
    write_pgm(blurry.view(), &out_dir.join("blurry.pgm"))?;

    let problem = make_problem(observation, binned.frames, d)?;
    let cfg = SolverConfig { thresholds, ..SolverConfig::default() };
    let (sharp, _) = solve(&problem, &cfg, None)?;

    println!("deblurring a {d}-frame exposure with {} events\n", stream.len());
    println!("frame   PSNR vs truth (dB)   PSNR of blurry input (dB)");
    for k in 0..d {
        let rec = psnr(sharp.frame(k), truth.frame(k))?;
        let blur = psnr(blurry.view(), truth.frame(k))?;
        println!("{k:>5}   {rec:>8.2}             {blur:>8.2}");
        write_pgm(sharp.frame(k), &out_dir.join(format!("sharp_{k:03}.pgm")))?;
    }

    // Forward consistency: the temporal mean of the reconstruction must
    // reproduce the blurry observation.
    let reprojected = match forward_intensity(&sharp, SensingCase::Deblur) {
        Observation::Deblur { mean } => mean,
        _ => unreachable!(),
    };
    let mae = (&reprojected - &blurry).iter().map(|v| v.abs()).sum::<f64>() / blurry.len() as f64;
    println!("\nforward-projected reconstruction vs observation: MAE {mae:.2e}");
    println!("wrote blurry.pgm and sharp frames to {}", out_dir.display());
    Ok(())
}
