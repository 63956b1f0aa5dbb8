//! Thin command-line front end; all behavior lives in `evfuse::cli`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use evfuse::cli::{
    cmd_bin, cmd_gradcheck, cmd_reconstruct, cmd_simulate, worker_cap_from_env, BinArgs,
    CommandOutcome, ConfigOverrides, GradcheckArgs, ReconstructArgs, SimulateArgs, Strategy,
};
use evfuse::SensingCase;

#[derive(Parser)]
#[command(
    name = "evfuse",
    version,
    about = "Fuse intensity frames with event streams into high-framerate video"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an event stream from an ordered PGM sequence.
    Simulate {
        /// Directory holding the ordered *.pgm frames.
        video_dir: PathBuf,
        /// Output event text file.
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Microseconds between consecutive frames.
        #[arg(long, default_value_t = 1000)]
        frame_period_us: u64,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Bin an event text file into an event-frame tensor.
    Bin {
        /// Event text file (`t x y p` per line).
        events: PathBuf,
        /// Output tensor container.
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        strategy: StrategyArg,
        /// Window count for stacked binning.
        #[arg(long)]
        num_frames: Option<usize>,
        /// Declared sensor width (bounds-checked when given).
        #[arg(long)]
        width: Option<u32>,
        /// Declared sensor height.
        #[arg(long)]
        height: Option<u32>,
    },
    /// Reconstruct the latent video from observations plus events.
    Reconstruct {
        /// Sensing case.
        #[arg(value_enum)]
        case: CaseArg,
        /// Observed PGM frame(s): two for interpolate, one otherwise.
        #[arg(num_args = 1..=2)]
        frames: Vec<PathBuf>,
        /// Binned event tensor container.
        #[arg(long)]
        events: PathBuf,
        /// Output directory.
        #[arg(short, long)]
        out_dir: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory of ground-truth PGM frames for metrics and error maps.
        #[arg(long)]
        ground_truth: Option<PathBuf>,
        /// Mode of the event tensor (conflict tensors are ternary).
        #[arg(long, value_enum, default_value_t = StrategyArg::Conflict)]
        strategy: StrategyArg,
        /// Latent frame count; defaults to event frames + 1.
        #[arg(long)]
        num_frames: Option<usize>,
        #[arg(long, default_value_t = 1000)]
        frame_period_us: u64,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Check the analytic gradient against finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Instance shape as HxWxD.
        #[arg(long, default_value = "8x8x5")]
        shape: String,
        /// Restrict to one sensing case (default: all three).
        #[arg(long, value_enum)]
        case: Option<CaseArg>,
        /// Test hook: corrupt the gradient so the check must fail.
        #[arg(long, hide = true)]
        corrupt_gradient: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Conflict,
    Stacked,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Conflict => Strategy::Conflict,
            StrategyArg::Stacked => Strategy::Stacked,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CaseArg {
    Interpolate,
    Predict,
    Deblur,
}

impl From<CaseArg> for SensingCase {
    fn from(c: CaseArg) -> Self {
        match c {
            CaseArg::Interpolate => SensingCase::Interpolation,
            CaseArg::Predict => SensingCase::Prediction,
            CaseArg::Deblur => SensingCase::Deblur,
        }
    }
}

#[derive(Args)]
struct OverrideArgs {
    /// tanh slope of the event model.
    #[arg(long)]
    alpha: Option<f64>,
    /// Event loss weight.
    #[arg(long)]
    lambda_e: Option<f64>,
    /// Spatial TV weight.
    #[arg(long)]
    lambda_xy: Option<f64>,
    /// Temporal TV weight.
    #[arg(long)]
    lambda_t: Option<f64>,
    /// Initial learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// Epoch count.
    #[arg(long)]
    epochs: Option<usize>,
}

impl From<OverrideArgs> for ConfigOverrides {
    fn from(o: OverrideArgs) -> Self {
        ConfigOverrides {
            alpha: o.alpha,
            lambda_e: o.lambda_e,
            lambda_xy: o.lambda_xy,
            lambda_t: o.lambda_t,
            lr: o.lr,
            epochs: o.epochs,
        }
    }
}

fn parse_shape(s: &str) -> Result<(usize, usize, usize), String> {
    let parts: Vec<&str> = s.split('x').collect();
    if parts.len() != 3 {
        return Err(format!("shape must be HxWxD, got `{s}`"));
    }
    let mut dims = [0usize; 3];
    for (slot, part) in dims.iter_mut().zip(&parts) {
        *slot = part.parse().map_err(|_| format!("bad shape component `{part}`"))?;
    }
    Ok((dims[0], dims[1], dims[2]))
}

fn run(cli: Cli) -> Result<CommandOutcome, String> {
    let outcome = match cli.command {
        Command::Simulate { video_dir, out, config, frame_period_us, overrides } => {
            cmd_simulate(&SimulateArgs {
                video_dir,
                out_events: out,
                config,
                frame_period_us,
                overrides: overrides.into(),
            })
        }
        Command::Bin { events, out, strategy, num_frames, width, height } => cmd_bin(&BinArgs {
            events,
            out_tensor: out,
            strategy: strategy.into(),
            num_frames,
            width,
            height,
        }),
        Command::Reconstruct {
            case,
            frames,
            events,
            out_dir,
            config,
            ground_truth,
            strategy,
            num_frames,
            frame_period_us,
            overrides,
        } => cmd_reconstruct(&ReconstructArgs {
            case: case.into(),
            frames,
            events_tensor: events,
            out_dir,
            config,
            ground_truth,
            strategy: strategy.into(),
            num_frames,
            frame_period_us,
            overrides: overrides.into(),
        }),
        Command::Gradcheck { seed, shape, case, corrupt_gradient } => {
            let shape = parse_shape(&shape)?;
            cmd_gradcheck(&GradcheckArgs {
                seed,
                shape,
                case: case.map(Into::into),
                corrupt: corrupt_gradient,
            })
        }
    };
    Ok(outcome)
}

fn main() -> ExitCode {
    if let Err(msg) = worker_cap_from_env() {
        eprintln!("error: {msg}");
        return ExitCode::from(1);
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
        Err(e) => {
            // --help / --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(outcome) => {
            print!("{}", outcome.report);
            for d in &outcome.diagnostics {
                eprintln!("{d}");
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
