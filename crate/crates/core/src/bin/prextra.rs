use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use prextra::problems::{synthesize, write_matrix, SpectralRecipe};
use prextra::runner::{compare, run, RunConfig};
use prextra::validate::validate;

#[derive(Parser)]
#[command(name = "prextra", version, about = "Decentralized optimization on the Stiefel manifold")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and write trajectory.csv and summary.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Synthesize a data matrix from a spectral recipe (binary MXA1 output).
    GenData {
        #[arg(long)]
        recipe: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the self-checks against a config (defaults to sparse PCA).
    Validate {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run several configs on one instance and merge their trajectories.
    Compare {
        #[arg(long, num_args = 1.., required = true)]
        configs: Vec<PathBuf>,
        #[arg(long, default_value = "compare.csv")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> prextra::Result<ExitCode> {
    match command {
        Command::Run { config, out } => {
            let mut cfg = RunConfig::from_json_file(&config)?;
            if out.is_some() || cfg.output_dir.is_none() {
                cfg.output_dir = Some(out.unwrap_or_else(|| PathBuf::from("out")));
            }
            let output = run(&cfg)?;
            let s = &output.summary;
            println!("{}: {} iterations, {:?}", s.algorithm, s.iterations, s.termination);
            if let Some(err) = &s.error {
                println!("stopped on error: {err}");
            }
            if let Some(p) = &output.csv_path {
                println!("{}", p.display());
            }
            Ok(if s.error.is_some() { ExitCode::FAILURE } else { ExitCode::SUCCESS })
        }
        Command::GenData { recipe, out } => {
            let recipe: SpectralRecipe = serde_json::from_str(&std::fs::read_to_string(recipe)?)?;
            let a = synthesize(&recipe)?;
            write_matrix(&out, &a)?;
            println!("{}x{} -> {}", a.nrows(), a.ncols(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { config } => {
            let cfg = match config {
                Some(p) => RunConfig::from_json_file(p)?,
                None => RunConfig::spca(),
            };
            let report = validate(&cfg);
            print!("{report}");
            Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Compare { configs, out } => {
            let cfgs = configs
                .iter()
                .map(RunConfig::from_json_file)
                .collect::<prextra::Result<Vec<_>>>()?;
            let result = compare(&cfgs, &out)?;
            for r in &result.runs {
                println!("{}: {} iterations, {:?}", r.summary.algorithm, r.summary.iterations, r.summary.termination);
            }
            println!("{}", result.csv_path.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}
