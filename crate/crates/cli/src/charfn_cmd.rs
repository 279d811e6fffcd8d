use std::path::PathBuf;

use anyhow::Result;
use clap::Subcommand;
use marcin_clt::charfn::{ks_bound, zero_free_radius, CharFnModel, ScanOptions};
use marcin_clt::registry::model_from_name;
use serde_json::json;

use crate::output::{emit, num, Table};

#[derive(clap::Args)]
pub struct Args {
    #[command(subcommand)]
    action: Action,
    /// Model string, e.g. `gaussian`, `binomial:n=10,p=0.3`,
    /// `iid_sum:base=rademacher,n=64` or `spin_total:side=4,beta=0.5,h=0.2`.
    #[arg(long, global = true, default_value = "gaussian")]
    model: String,
    /// Standardize the model to mean 0 and variance 1 first.
    #[arg(long, global = true)]
    standardize: bool,
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Action {
    /// Characteristic function `E[e^{itX}]` at real `t`.
    Eval {
        /// Comma-separated points.
        #[arg(long, value_delimiter = ',', required = true)]
        t: Vec<f64>,
    },
    /// Zero-free radius of the characteristic function.
    Scan {
        #[arg(long)]
        radius: f64,
        /// Spacing of the scanned circles; defaults to radius / 16.
        #[arg(long)]
        step: Option<f64>,
    },
    /// KS bound `2|σ − 1| + A (1 + log⁺ log max_{|u|=r}|Ψ|) / r` at each radius.
    Bound {
        #[arg(long, value_delimiter = ',', required = true)]
        radius: Vec<f64>,
        /// Calibration constant A.
        #[arg(long, default_value_t = 1.0)]
        constant_a: f64,
    },
}

fn model(args: &Args) -> Result<CharFnModel> {
    let m = model_from_name(&args.model)?;
    Ok(if args.standardize { m.standardized()? } else { m })
}

pub fn main(args: Args) -> Result<()> {
    let m = model(&args)?;
    match &args.action {
        Action::Eval { t } => {
            let mut table = Table::new(vec!["t", "re", "im", "modulus"]);
            let mut values = Vec::new();
            for &t in t.iter() {
                let v = m.charfn(t)?;
                table.push(vec![num(t), num(v.re), num(v.im), num(v.norm())]);
                values.push(json!({"t": t, "re": v.re, "im": v.im}));
            }
            let report = json!({"model": m.description, "mean": m.mean, "std_dev": m.std_dev, "values": values});
            emit(&args.out, "charfn_eval", &table, &report)?;
        }
        Action::Scan { radius, step } => {
            let step = step.unwrap_or(radius / 16.0);
            let scan = zero_free_radius(&m, *radius, step, &ScanOptions::default())?;
            let mut table = Table::new(vec!["radius_scanned", "zero_free_radius", "min_modulus", "status"]);
            table.push(vec![
                num(scan.radius_scanned),
                num(scan.zero_free_radius),
                num(scan.min_modulus),
                format!("{:?}", scan.status).to_lowercase(),
            ]);
            emit(&args.out, "charfn_scan", &table, &serde_json::to_value(&scan)?)?;
        }
        Action::Bound { radius, constant_a } => {
            let mut table = Table::new(vec![
                "r",
                "bound",
                "sigma_term",
                "bracket_term",
                "log_circle_max",
                "zero_free_radius",
                "degenerate",
            ]);
            let mut reports = Vec::new();
            for &r in radius.iter() {
                let b = ks_bound(&m, r, *constant_a, &ScanOptions::default())?;
                table.push(vec![
                    num(b.r),
                    num(b.bound),
                    num(b.sigma_term),
                    num(b.bracket_term),
                    num(b.log_circle_max),
                    num(b.zero_free_radius),
                    b.degenerate.to_string(),
                ]);
                reports.push(b);
            }
            emit(&args.out, "charfn_bound", &table, &serde_json::to_value(&reports)?)?;
        }
    }
    Ok(())
}
