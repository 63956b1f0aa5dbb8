//! Track the objective and accuracy during optimization and dump the trace
//! as CSV.
//!
//! ```bash
//! cargo run -p evfuse --example convergence_trace
//! ```

use evfuse::binning::bin_conflict_driven;
use evfuse::event_model::simulate_stream;
use evfuse::io::atomic_write;
use evfuse::sensing::{forward_intensity, make_problem, SensingCase};
use evfuse::solver::{solve, SolverConfig};
use evfuse::synth::{moving_square_video, MovingSquare};
use evfuse::ThresholdParams;

fn main() -> evfuse::Result<()> {
    let out = std::env::temp_dir().join("evfuse_trace.csv");
    let truth = moving_square_video(64, 64, 9, MovingSquare::default(), 1000);
    let thresholds = ThresholdParams::default();
    let stream = simulate_stream(&truth, &thresholds, 1000)?;
    let binned = bin_conflict_driven(&stream)?;
    let d = binned.frames.num_frames() + 1;
    let observation = forward_intensity(&truth, SensingCase::Interpolation);
    let problem = make_problem(observation, binned.frames, d)?;
    let cfg = SolverConfig { thresholds, ..SolverConfig::default() };

    let (_, trace) = solve(&problem, &cfg, Some(&truth))?;
    atomic_write(&out, trace.to_csv().as_bytes())?;

    println!("epoch  objective   pixel      tv_xy      tv_t      psnr     ssim");
    for r in trace.records.iter().step_by(40).chain(trace.records.last()) {
        println!(
            "{:>5}  {:.6}   {:.6}   {:.6}   {:.6}  {:>6.2}   {:.4}",
            r.epoch,
            r.objective,
            r.pixel_loss,
            r.tv_xy,
            r.tv_t,
            r.psnr.unwrap(),
            r.ssim.unwrap()
        );
    }
    let first = trace.records.first().unwrap();
    let last = trace.records.last().unwrap();
    println!(
        "\nobjective fell to {:.1}% of epoch 1; PSNR rose {:.2} dB",
        100.0 * last.objective / first.objective,
        last.psnr.unwrap() - first.psnr.unwrap()
    );
    println!("full trace written to {}", out.display());
    Ok(())
}
