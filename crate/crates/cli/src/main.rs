use clap::{Parser, Subcommand};
use rodrecon::{Error, Result};
use rodrecon_cli::config::{PipelineConfig, Preset};
use rodrecon_cli::{exit_code, pipeline, EXIT_NOT_CONVERGED, EXIT_OK};
use std::path::PathBuf;
use std::process::ExitCode;

/// Soft-arm shape reconstruction from sparse marker poses.
#[derive(Parser, Debug)]
#[command(name = "rodrecon", version)]
struct Cli {
    /// TOML file overriding preset values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed; every stage seed derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for data-parallel stages.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    /// Built-in parameter set: octopus or br2.
    #[arg(long, global = true)]
    preset: Option<String>,

    /// Working directory holding stage inputs and outputs.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the surrogate strain dataset.
    Simulate,
    /// Fit the per-strain PCA basis.
    Pca,
    /// Sample the training set and the held-out frame log.
    Sample,
    /// Train the network without labels.
    Train {
        /// Independent trainings to run, keeping the best.
        #[arg(long)]
        restarts: Option<usize>,
    },
    /// Reconstruct every frame of the frame log.
    Infer {
        /// Also write every node pose to centerline.csv.
        #[arg(long)]
        centerline: bool,
    },
    /// Compare network inference with the iterative baseline.
    Benchmark {
        /// Number of leading frames to solve.
        #[arg(long, default_value_t = 100)]
        count: usize,
    },
    /// Stream the frame log through the network at its nominal rate.
    Replay {
        /// Process frames back to back instead of at their timestamps.
        #[arg(long)]
        no_pace: bool,
    },
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let preset = cli.preset.as_deref().map(str::parse::<Preset>).transpose()?;
    let mut cfg = PipelineConfig::load(preset, cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<i32> {
    if cli.threads == 0 {
        return Err(Error::config("threads", "must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| Error::config("threads", e.to_string()))?;
    let cfg = load_config(cli)?;
    let dir = cli.out.as_path();
    let summary = match &cli.command {
        Command::Simulate => pipeline::cmd_simulate(&cfg, dir)?.to_string(),
        Command::Pca => pipeline::cmd_pca(&cfg, dir)?.to_string(),
        Command::Sample => pipeline::cmd_sample(&cfg, dir)?.to_string(),
        Command::Train { restarts } => pipeline::cmd_train(&cfg, dir, *restarts)?.to_string(),
        Command::Infer { centerline } => pipeline::cmd_infer(&cfg, dir, *centerline)?.to_string(),
        Command::Benchmark { count } => {
            let report = pipeline::cmd_benchmark(&cfg, dir, *count)?;
            println!("{report}");
            return Ok(if report.unconverged() > 0 { EXIT_NOT_CONVERGED } else { EXIT_OK });
        }
        Command::Replay { no_pace } => pipeline::cmd_replay(&cfg, dir, !no_pace)?.to_string(),
    };
    println!("{summary}");
    Ok(EXIT_OK)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    };
    ExitCode::from(code as u8)
}
