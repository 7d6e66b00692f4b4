use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use risopt::harness::{self, config, plot, recipes};
use risopt::Error;

/// Exit status when a directory holds nothing plottable.
const NOTHING_TO_PLOT: u8 = 2;

#[derive(Parser)]
#[command(name = "risopt", version, about = "RIS-assisted MU-MIMO downlink: SER analysis and beamforming optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a recipe and write results, traces and a manifest.
    Run {
        #[arg(long)]
        recipe: String,
        /// TOML file layered over the recipe defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Override a config key, e.g. `--set de.population=40` (repeatable).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Print the resolved config and exit.
        #[arg(long)]
        dry_run: bool,
    },
    /// Render SVG plots from a run directory.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// List the built-in recipes.
    ListRecipes,
    /// Re-run a manifest and report files whose hashes differ.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(Error::NothingToPlot(dir)) => {
            eprintln!("nothing to plot in {dir}");
            ExitCode::from(NOTHING_TO_PLOT)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> risopt::Result<ExitCode> {
    match cli.command {
        Command::Run { recipe, config: file, seed, out, overrides, dry_run } => {
            let r = recipes::find(&recipe)
                .ok_or_else(|| Error::Config(format!("unknown recipe '{recipe}' (see list-recipes)")))?;
            let text = file.map(std::fs::read_to_string).transpose()?;
            let cfg = config::resolve(&r.config(), text.as_deref(), &overrides)?;
            if dry_run {
                print!("{}", cfg.to_toml()?);
                return Ok(ExitCode::SUCCESS);
            }
            let summary = harness::run_experiment(r.name, &cfg, seed, &out)?;
            println!("{} rows -> {}", summary.rows, summary.out_dir.display());
            for e in &summary.errors {
                eprintln!("sub-run error: {e}");
            }
        }
        Command::Plot { input } => {
            for path in plot::plot_dir(&input)? {
                println!("{}", path.display());
            }
        }
        Command::ListRecipes => {
            for r in recipes::RECIPES {
                println!("{:<14} {}", r.name, r.summary);
            }
        }
        Command::Replay { manifest, out } => {
            let diff = harness::replay(&manifest, &out)?;
            if !diff.is_empty() {
                for f in &diff {
                    eprintln!("differs: {f}");
                }
                return Ok(ExitCode::FAILURE);
            }
            println!("all files reproduced");
        }
    }
    Ok(ExitCode::SUCCESS)
}
