//! Frame interpolation: recover the frames between two observed endpoints
//! from the events in between, and compare against the linear-blend
//! baseline.
//!
//! ```bash
//! cargo run -p evfuse --example interpolate
//! ```

use evfuse::binning::bin_conflict_driven;
use evfuse::event_model::simulate_stream;
use evfuse::io::write_pgm;
use evfuse::metrics::{psnr, ssim};
use evfuse::sensing::{forward_intensity, make_problem, SensingCase};
use evfuse::solver::{initialize, solve, SolverConfig};
use evfuse::synth::{moving_square_video, MovingSquare};
use evfuse::ThresholdParams;

fn main() -> evfuse::Result<()> {
    let out_dir = std::env::temp_dir().join("evfuse_interpolate");
    std::fs::create_dir_all(&out_dir).expect("create output directory");

    let truth = moving_square_video(64, 64, 9, MovingSquare::default(), 1000);
    let thresholds = ThresholdParams::default();
    let stream = simulate_stream(&truth, &thresholds, 1000)?;
    let binned = bin_conflict_driven(&stream)?;
    let d = binned.frames.num_frames() + 1;
    println!("{} events -> {} event frames -> d = {d}", stream.len(), d - 1);

    let observation = forward_intensity(&truth, SensingCase::Interpolation);
    let problem = make_problem(observation, binned.frames, d)?;
    let cfg = SolverConfig { thresholds, ..SolverConfig::default() };

    let blend = initialize(&problem);
    let (reconstruction, _) = solve(&problem, &cfg, None)?;

    println!("\nper-frame PSNR (dB) and SSIM, blend baseline vs reconstruction:");
    println!("frame   blend                 reconstruction");
    for k in 0..d {
        let bp = psnr(blend.frame(k), truth.frame(k))?;
        let bs = ssim(blend.frame(k), truth.frame(k))?;
        let rp = psnr(reconstruction.frame(k), truth.frame(k))?;
        let rs = ssim(reconstruction.frame(k), truth.frame(k))?;
        println!("{k:>5}   {bp:>6.2} / {bs:.4}       {rp:>6.2} / {rs:.4}");
        write_pgm(reconstruction.frame(k), &out_dir.join(format!("recon_{k:03}.pgm")))?;
        write_pgm(blend.frame(k), &out_dir.join(format!("blend_{k:03}.pgm")))?;
    }

    let mid = (d - 1) / 2;
    let gain = psnr(reconstruction.frame(mid), truth.frame(mid))?
        - psnr(blend.frame(mid), truth.frame(mid))?;
    println!("\nmid-frame gain over the blend: {gain:+.2} dB");
    println!("wrote frames to {}", out_dir.display());
    Ok(())
}
