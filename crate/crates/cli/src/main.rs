use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use auvrl::config::TrainConfig;
use auvrl::run::{cmd_compare, cmd_eval, cmd_terrain_preview, cmd_train, CONFIG_FILE};
use auvrl::Error;

#[derive(Parser)]
#[command(name = "auvrl", version, about = "Train, evaluate and compare underwater-vehicle controllers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the configured algorithm and write a run directory.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Replace the root seed of the config.
        #[arg(long)]
        seed_override: Option<u64>,
        /// Run directory (defaults to `output_dir` of the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Roll out a checkpoint deterministically and write metrics and trajectories.
    Eval {
        checkpoint: PathBuf,
        /// Environment config (defaults to the config stored next to the checkpoint).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        #[arg(long)]
        seed_override: Option<u64>,
        /// Output directory (defaults to `eval/` next to the checkpoint).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize two or more run directories over the same environment.
    Compare {
        #[arg(required = true, num_args = 2..)]
        runs: Vec<PathBuf>,
        /// Episode return that counts as reaching the threshold.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        threshold: f64,
        /// Write the comparison CSV here; the table always goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump the seafloor and target depth profile of a config as CSV.
    TerrainPreview {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed_override: Option<u64>,
        /// Sample spacing along the mission, metres.
        #[arg(long, default_value_t = 1.0)]
        spacing: f64,
        #[arg(long, default_value = "terrain.csv")]
        out: PathBuf,
    },
}

fn load(path: &Path, seed_override: Option<u64>) -> auvrl::Result<TrainConfig> {
    let mut cfg = TrainConfig::load(path)?;
    if let Some(seed) = seed_override {
        cfg.seed = seed;
        cfg.validate()?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Train {
            config,
            seed_override,
            out,
        } => {
            let mut cfg = load(&config, seed_override)?;
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            let dir = cmd_train(&cfg)?;
            println!("{}", dir.display());
        }
        Command::Eval {
            checkpoint,
            config,
            episodes,
            seed_override,
            out,
        } => {
            let run_dir = checkpoint.parent().unwrap_or(Path::new(".")).to_path_buf();
            let config = config.unwrap_or_else(|| run_dir.join(CONFIG_FILE));
            let cfg = load(&config, seed_override)?;
            let out = out.unwrap_or_else(|| run_dir.join("eval"));
            let rows = cmd_eval(&checkpoint, &cfg, episodes, &out)?;
            let steps: usize = rows.iter().map(|r| r.steps).sum();
            let ret: f64 = rows.iter().map(|r| r.ret).sum();
            println!(
                "{} episodes, {} steps, mean reward {:.6} -> {}",
                rows.len(),
                steps,
                if steps > 0 { ret / steps as f64 } else { 0.0 },
                out.display()
            );
        }
        Command::Compare { runs, threshold, out } => {
            let cmp = cmd_compare(&runs, threshold)?;
            print!("{}", cmp.table());
            if let Some(out) = out {
                let file = fs::File::create(&out).with_context(|| format!("creating {}", out.display()))?;
                cmp.write_csv(file)?;
            }
        }
        Command::TerrainPreview {
            config,
            seed_override,
            spacing,
            out,
        } => {
            let cfg = load(&config, seed_override)?;
            let n = cmd_terrain_preview(&cfg, spacing, &out)?;
            println!("{n} samples -> {}", out.display());
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Config { .. }) => 2,
        Some(Error::NumericAbort { .. }) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
