//! Validate the analytic gradient against central finite differences on
//! random instances of all three sensing cases.
//!
//! ```bash
//! cargo run -p evfuse --example gradient_check
//! ```

use evfuse::sensing::SensingCase;
use evfuse::solver::{finite_difference_check, random_instance};

fn main() -> evfuse::Result<()> {
    let step = 1e-5;
    println!("central differences, step {step:e}, shape 8x8x5\n");
    let mut worst = 0.0f64;
    for case in [SensingCase::Interpolation, SensingCase::Prediction, SensingCase::Deblur] {
        for seed in 0..5 {
            let (h, problem, cfg) = random_instance(seed, (8, 8, 5), case);
            let report = finite_difference_check(&h, &problem, &cfg, step)?;
            println!(
                "{case:<14} seed {seed}: max rel error {:.3e}  ({} checked, {} near kinks skipped)",
                report.max_rel_error, report.checked, report.skipped_near_kink
            );
            worst = worst.max(report.max_rel_error);
        }
    }
    println!("\nworst case: {worst:.3e}");
    assert!(worst < 1e-4);
    Ok(())
}
