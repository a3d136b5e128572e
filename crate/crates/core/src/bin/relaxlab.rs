use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use relaxlab::experiments::registry;
use relaxlab::{load_config, run_experiment, RunOptions};

#[derive(Parser)]
#[command(name = "relaxlab", version, about = "Time-splitting experiments for a chromatography relaxation system")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides the config's `outputs`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run sweep members on this many threads.
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        parallel: Option<u32>,
    },
    /// List the registered experiments.
    ListExperiments,
}

const DEFAULT_OUT: &str = "relaxlab-out";

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListExperiments => {
            for e in registry() {
                println!("{:<22}{}", e.name, e.summary);
            }
            ExitCode::SUCCESS
        }
        Command::Run {
            config,
            out,
            parallel,
        } => {
            let cfg = match load_config(&config) {
                Ok(cfg) => cfg,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            };
            let out_dir = out
                .or_else(|| cfg.outputs.clone())
                .or_else(|| std::env::var_os("RELAXLAB_OUT").map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT).join(&cfg.name));
            let opts = RunOptions {
                out_dir,
                parallel: parallel.map(|n| n as usize),
            };
            match run_experiment(&cfg, &opts) {
                Ok(summary) => {
                    for (name, check) in &summary.checks {
                        if !check.pass {
                            eprintln!(
                                "violation: {name}: {:e} (tolerance {:e})",
                                check.max_violation, check.tolerance
                            );
                        }
                    }
                    println!("{}: outputs in {}", cfg.name, opts.out_dir.display());
                    if summary.all_pass() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(2)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
    }
}
