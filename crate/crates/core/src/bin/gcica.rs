use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gcica_core::harness::{run_simulate, run_sweep, to_json_17, version_string, SweepSpec};
use gcica_core::SystemConfig;

#[derive(Parser)]
#[command(
    name = "gcica",
    version,
    about = "Simulator and closed-form analysis for multi-phase pilot random access"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Monte Carlo trials at a single configuration
    Simulate {
        /// TOML system configuration
        #[arg(long)]
        config: PathBuf,
        /// Override the master seed from the config
        #[arg(long)]
        seed: Option<u64>,
        /// Number of trials to run
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Output directory for results.csv, trials.jsonl, summary.json
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Closed-form graph evolution and performance ceilings
    Analyze {
        /// TOML system configuration
        #[arg(long)]
        config: PathBuf,
        /// Output JSON file
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo over a grid of configurations
    Sweep {
        /// TOML sweep description: a base config plus grid axes
        #[arg(long)]
        spec: PathBuf,
        /// Output directory for results.csv and summary.json
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cmd: Cmd) -> gcica_core::Result<()> {
    match cmd {
        Cmd::Simulate {
            config,
            seed,
            trials,
            out,
        } => {
            let mut cfg = SystemConfig::from_path(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let rows = run_simulate(&cfg, trials, &out)?;
            for row in &rows {
                println!(
                    "{}: p_s {:.4}, throughput {:.4} ({} trials)",
                    row.scheme, row.p_s, row.throughput, row.trials
                );
            }
            println!("wrote {}", out.display());
        }
        Cmd::Analyze { config, out } => {
            let cfg = SystemConfig::from_path(&config)?;
            let result = gcica_core::analysis::analyze(&cfg)?;
            let report = serde_json::json!({
                "version": version_string(),
                "config": cfg,
                "result": result,
            });
            std::fs::write(&out, to_json_17(&report)? + "\n")?;
            println!(
                "p_fail {:.6}, p_s ceiling {:.6}, throughput ceiling {:.6}",
                result.p_fail, result.p_s_u, result.gamma_u
            );
            println!("wrote {}", out.display());
        }
        Cmd::Sweep { spec, out } => {
            let spec = SweepSpec::from_path(&spec)?;
            let rows = run_sweep(&spec, &out)?;
            println!("wrote {} rows to {}", rows.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
