use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use marcin_clt::harness::{emit_plot, run, ExperimentConfig, RunOptions, RunReport};

mod charfn_cmd;
mod dpp_cmd;
mod output;
mod spin_cmd;

#[derive(Parser)]
#[command(name = "marcin-clt", version, about = "Zero-free characteristic functions, KS bounds and CLT checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a key = value configuration file. Exits 0
    /// only if every gate passes.
    Run {
        config: PathBuf,
        /// Output directory (overrides output.dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for sweep points; 0 uses every CPU.
        #[arg(long, env = "MARCIN_CLT_JOBS", default_value_t = 0)]
        jobs: usize,
    },
    /// Plot one metric of a JSON report as SVG.
    Plot {
        report: PathBuf,
        #[arg(long)]
        metric: String,
        /// SVG path; defaults to `<report stem>_<metric>.svg` beside the report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Characteristic functions of built-in models.
    Charfn(charfn_cmd::Args),
    /// Lattice spin systems.
    Spin(spin_cmd::Args),
    /// α-determinantal point processes.
    Dpp(dpp_cmd::Args),
}

fn run_config(config: PathBuf, out: Option<PathBuf>, jobs: usize) -> Result<bool> {
    let config = ExperimentConfig::from_file(&config).with_context(|| format!("reading {}", config.display()))?;
    let report = run(
        &config,
        &RunOptions {
            out_dir: out,
            jobs,
            in_memory: false,
        },
    )?;
    for row in report.rows.iter().filter(|r| r.error.is_some()) {
        eprintln!("{} = {}: {}", report.sweep, row.sweep, row.error.as_deref().unwrap_or_default());
    }
    for gate in &report.gates {
        let value = gate.value.map(|v| format!(" ({})", output::num(v))).unwrap_or_default();
        println!("{} {}{}: {}", if gate.passed { "PASS" } else { "FAIL" }, gate.name, value, gate.invariant);
    }
    Ok(report.all_passed())
}

fn plot(report_path: PathBuf, metric: String, out: Option<PathBuf>) -> Result<()> {
    let report =
        RunReport::from_json_file(&report_path).with_context(|| format!("reading {}", report_path.display()))?;
    let out = out.unwrap_or_else(|| {
        let stem = report_path.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
        report_path.with_file_name(format!("{stem}_{metric}.svg"))
    });
    let path = emit_plot(&report, &metric, out)?;
    println!("{}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, out, jobs } => run_config(config, out, jobs),
        Command::Plot { report, metric, out } => plot(report, metric, out).map(|_| true),
        Command::Charfn(args) => charfn_cmd::main(args).map(|_| true),
        Command::Spin(args) => spin_cmd::main(args).map(|_| true),
        Command::Dpp(args) => dpp_cmd::main(args).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
