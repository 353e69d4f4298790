use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use hybridswap::pipeline::{exit_code, run, run_exit_code, Experiment, RunConfig};
use hybridswap::Error;

/// Hybrid discrete/continuous-variable entanglement swapping simulator.
#[derive(Debug, Parser)]
#[command(name = "hybridswap", version)]
struct Cli {
    /// swap, scan, postselect, tomo, chsh or teleport
    experiment: String,
    /// TOML run configuration; defaults apply to anything omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(cli: &Cli) -> Result<RunConfig, Error> {
    let experiment: Experiment = cli.experiment.parse()?;
    let mut config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            RunConfig::parse(&text).map_err(|e| match e {
                Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
                other => other,
            })?
        }
        None => RunConfig::default(),
    };
    config.resolve_experiment(Some(experiment))?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output = out.clone();
    }
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = load(&cli).and_then(|config| run(&config));
    match result {
        Ok(out) => {
            for f in &out.files {
                println!("{}", out.dir.join(&f.name).display());
            }
            println!("{}", out.dir.join("manifest.json").display());
            if !out.converged {
                eprintln!("warning: tomographic reconstruction hit its iteration cap");
            }
            if let Some(report) = &out.comparison {
                for row in &report.rows {
                    println!("{} at {}: paper {} ± {}, simulated {:.4}: {}", row.quantity.name(), row.context, row.paper, row.uncertainty, row.simulated, row.verdict);
                }
            }
            ExitCode::from(run_exit_code(&out) as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
