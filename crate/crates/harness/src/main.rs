use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dse_harness::{parse_config, parse_sweep, plot, run, sweep, validate, HarnessError};

#[derive(Parser)]
#[command(name = "dse", version, about = "Decentralized optimization simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one config; writes the metrics CSV and a final-state checkpoint.
    Run {
        config: PathBuf,
        /// Also write each node's shard as CSV into this directory.
        #[arg(long)]
        dump_shards: Option<PathBuf>,
    },
    /// Run a grid of configs and write a summary CSV.
    Sweep { spec: PathBuf },
    /// Print smoothness, mixing and theory diagnostics for a config.
    Validate {
        config: PathBuf,
        /// Write the mixing matrix as CSV.
        #[arg(long)]
        export_w: Option<PathBuf>,
    },
    /// Chart one metric column from one or more CSVs.
    Plot {
        #[arg(required = true)]
        csvs: Vec<PathBuf>,
        #[arg(long)]
        metric: String,
        #[arg(long)]
        out: PathBuf,
        /// Logarithmic y axis.
        #[arg(long)]
        log: bool,
    },
}

fn dispatch(cmd: Cmd) -> Result<(), HarnessError> {
    match cmd {
        Cmd::Run {
            config,
            dump_shards,
        } => {
            let cfg = parse_config(&config)?;
            if let Some(dir) = dump_shards {
                for p in run::dump_shards(&cfg, &dir)? {
                    println!("shard {}", p.display());
                }
            }
            let prep = dse_harness::prepare(&cfg)?;
            for w in &prep.warnings {
                eprintln!("{w}");
            }
            let report = run(&cfg)?;
            if let Some(last) = report.execution.rows.last() {
                println!(
                    "t={} loss={:e} grad_norm_sq={:e} consensus_sq={:e}",
                    last.t, last.loss, last.grad_norm_sq, last.consensus_sq
                );
            }
            println!("csv {}", report.csv_path.display());
            println!("checkpoint {}", report.checkpoint_path.display());
        }
        Cmd::Sweep { spec } => {
            let spec = parse_sweep(&spec)?;
            let report = sweep(&spec, sweep::threads_from_env())?;
            let failed = report.rows.iter().filter(|r| r.status != "ok").count();
            println!(
                "{} runs, {failed} not ok; summary {}",
                report.rows.len(),
                report.summary_path.display()
            );
        }
        Cmd::Validate { config, export_w } => {
            let cfg = parse_config(&config)?;
            let (report, prep) = validate::validate(&cfg)?;
            print!("{}", report.render(&cfg));
            if let Some(path) = export_w {
                std::fs::write(&path, prep.mixing.to_csv())
                    .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
            }
        }
        Cmd::Plot {
            csvs,
            metric,
            out,
            log,
        } => plot::plot(&csvs, &metric, &out, log)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
