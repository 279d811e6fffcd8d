use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::Subcommand;
use marcin_clt::registry::{isotropic_coupling, spin_measure_from_name};
use marcin_clt::spin::{
    lee_yang_zeros, metropolis_total_spin, size_seed, spin_clt_experiment, ExactSolver, MetropolisConfig,
    SpinCltConfig, SpinFamily,
};
use serde_json::json;

use crate::output::{emit, num, opt, Table};

/// Model settings. Every flag may also be given in a `--model-file` of
/// `key = value` lines (keys are the flag names without dashes, `#` starts
/// a comment); flags override the file.
#[derive(clap::Args)]
pub struct Args {
    #[command(subcommand)]
    action: Action,
    #[arg(long, global = true)]
    model_file: Option<PathBuf>,
    /// Lattice dimension [default: 1].
    #[arg(long, global = true)]
    dim: Option<usize>,
    /// Comma-separated side lengths.
    #[arg(long, global = true, value_delimiter = ',')]
    side: Option<Vec<usize>>,
    /// ising, atomic, xy or heisenberg [default: ising].
    #[arg(long, global = true)]
    model: Option<String>,
    /// Atoms of an atomic measure as `x@w;x@w;...`.
    #[arg(long, global = true)]
    atoms: Option<String>,
    #[arg(long, global = true)]
    beta: Option<f64>,
    /// Uniform field on the first spin component.
    #[arg(long, global = true)]
    field: Option<f64>,
    /// Nearest-neighbour coupling [default: 1].
    #[arg(long, global = true)]
    coupling: Option<f64>,
    /// Periodic boundary [default: false].
    #[arg(long, global = true)]
    periodic: Option<bool>,
    /// Monte Carlo samples over all chains [default: 200000].
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Sweeps discarded per chain [default: 2000].
    #[arg(long, global = true)]
    burn_in: Option<usize>,
    /// Independent chains [default: 8].
    #[arg(long, global = true)]
    chains: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Action {
    /// Partition function and total-spin moments by exact enumeration or
    /// transfer matrix.
    Exact,
    /// Metropolis estimates of the total-spin mean and variance.
    Sample,
    /// Lee–Yang zeros of the fugacity polynomial (Ising).
    Leeyang,
    /// Total-spin CLT across sizes: variance scaling, KS distances and bounds.
    Clt {
        /// Bound radius as a fraction of the Lee–Yang gap β·h.
        #[arg(long, default_value_t = 0.9)]
        radius_fraction: f64,
        #[arg(long, default_value_t = 1.0)]
        constant_a: f64,
    },
}

struct Settings {
    family: SpinFamily,
    sides: Vec<usize>,
    mc: MetropolisConfig,
}

fn read_model_file(path: &PathBuf) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("{}: line {}: expected key = value", path.display(), n + 1))?;
        let key = k.trim().replace('-', "_");
        const KEYS: [&str; 12] = [
            "dim", "side", "model", "atoms", "beta", "field", "coupling", "periodic", "samples", "burn_in", "chains",
            "seed",
        ];
        if !KEYS.contains(&key.as_str()) {
            bail!("{}: line {}: unknown key {key:?}", path.display(), n + 1);
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

fn from_file<T: FromStr>(file: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
    file.get(key)
        .map(|v| v.parse::<T>().map_err(|_| anyhow!("model file: cannot parse {key} = {v:?}")))
        .transpose()
}

fn settings(args: &Args) -> Result<Settings> {
    let file = match &args.model_file {
        Some(p) => read_model_file(p)?,
        None => BTreeMap::new(),
    };
    let sides = match &args.side {
        Some(s) => s.clone(),
        None => match file.get("side") {
            Some(v) => v
                .split(',')
                .map(|s| s.trim().parse::<usize>().map_err(|_| anyhow!("model file: cannot parse side {s:?}")))
                .collect::<Result<_>>()?,
            None => bail!("--side is required"),
        },
    };
    let name = args.model.clone().or_else(|| file.get("model").cloned()).unwrap_or_else(|| "ising".into());
    let atoms = args.atoms.clone().or_else(|| file.get("atoms").cloned());
    let measure = spin_measure_from_name(&name, atoms.as_deref())?;
    let j = args.coupling.or(from_file(&file, "coupling")?).unwrap_or(1.0);
    let beta = args.beta.or(from_file(&file, "beta")?).ok_or_else(|| anyhow!("--beta is required"))?;
    let h = args.field.or(from_file(&file, "field")?).unwrap_or(0.0);
    let family = SpinFamily {
        dim: args.dim.or(from_file(&file, "dim")?).unwrap_or(1),
        periodic: args.periodic.or(from_file(&file, "periodic")?).unwrap_or(false),
        coupling: isotropic_coupling(&measure, j),
        measure,
        field: [h, 0.0, 0.0],
        beta,
        quadrature: Default::default(),
    };
    let mc = MetropolisConfig {
        n_samples: args.samples.or(from_file(&file, "samples")?).unwrap_or(200_000),
        burn_in: args.burn_in.or(from_file(&file, "burn_in")?).unwrap_or(2_000),
        thinning: 1,
        seed: args.seed.or(from_file(&file, "seed")?).unwrap_or(0),
        chains: args.chains.or(from_file(&file, "chains")?).unwrap_or(8),
        proposal_width: 1.0,
    };
    Ok(Settings { family, sides, mc })
}

pub fn main(args: Args) -> Result<()> {
    let s = settings(&args)?;
    let sites = |side: usize| side.pow(s.family.dim as u32);
    match &args.action {
        Action::Exact => {
            let mut table = Table::new(vec!["side", "sites", "backend", "log_partition", "mean", "variance"]);
            let mut rows = Vec::new();
            for &side in &s.sides {
                let solver = ExactSolver::new(&s.family.build(side)?)?;
                let log_z = solver.partition().ln();
                let (mean, var) = solver.total_spin_moments()?;
                let backend = format!("{:?}", solver.backend());
                table.push(vec![side.to_string(), sites(side).to_string(), backend.clone(), num(log_z.re), num(mean), num(var)]);
                rows.push(json!({"side": side, "sites": sites(side), "backend": backend,
                    "log_partition": log_z.re, "mean": mean, "variance": var}));
            }
            emit(&args.out, "spin_exact", &table, &json!({"family": s.family, "rows": rows}))?;
        }
        Action::Sample => {
            let mut table = Table::new(vec![
                "side",
                "sites",
                "mean",
                "variance",
                "effective_samples",
                "standard_error",
                "acceptance_rate",
            ]);
            let mut rows = Vec::new();
            for (i, &side) in s.sides.iter().enumerate() {
                let mc = MetropolisConfig {
                    seed: size_seed(s.mc.seed, i),
                    ..s.mc
                };
                let series = metropolis_total_spin(&s.family.build(side)?, &mc)?;
                let sum = series.summary();
                table.push(vec![
                    side.to_string(),
                    sites(side).to_string(),
                    num(sum.mean),
                    num(sum.variance),
                    num(sum.effective_samples),
                    num(sum.standard_error),
                    num(series.acceptance_rate),
                ]);
                rows.push(json!({"side": side, "sites": sites(side), "summary": sum,
                    "acceptance_rate": series.acceptance_rate, "seed": mc.seed}));
            }
            emit(&args.out, "spin_sample", &table, &json!({"family": s.family, "mc": s.mc, "rows": rows}))?;
        }
        Action::Leeyang => {
            let mut table = Table::new(vec![
                "side",
                "sites",
                "zeros",
                "max_unit_circle_deviation",
                "zero_free_field_radius",
                "nearest_zero_re",
                "nearest_zero_im",
            ]);
            let mut rows = Vec::new();
            for &side in &s.sides {
                let r = lee_yang_zeros(&s.family.build(side)?)?;
                table.push(vec![
                    side.to_string(),
                    sites(side).to_string(),
                    r.fugacity_zeros.len().to_string(),
                    num(r.max_abs_deviation_from_unit_circle),
                    num(r.zero_free_field_radius),
                    num(r.nearest_charfn_zero.re),
                    num(r.nearest_charfn_zero.im),
                ]);
                rows.push(json!({"side": side, "report": r}));
            }
            emit(&args.out, "spin_leeyang", &table, &json!({"family": s.family, "rows": rows}))?;
        }
        Action::Clt {
            radius_fraction,
            constant_a,
        } => {
            let config = SpinCltConfig {
                sizes: s.sides.clone(),
                mc: s.mc,
                radius_fraction: *radius_fraction,
                constant_a: *constant_a,
            };
            let result = spin_clt_experiment(&s.family, &config)?;
            let mut table = Table::new(vec![
                "side",
                "sites",
                "mean",
                "variance",
                "exact_variance",
                "effective_samples",
                "ks",
                "bound",
            ]);
            for r in &result.rows {
                table.push(vec![
                    r.side.to_string(),
                    r.sites.to_string(),
                    num(r.mean),
                    num(r.variance),
                    opt(r.exact_variance),
                    num(r.effective_samples),
                    num(r.ks),
                    num(r.report.bound),
                ]);
            }
            emit(
                &args.out,
                "spin_clt",
                &table,
                &json!({"family": s.family, "config": config, "result": result}),
            )?;
        }
    }
    Ok(())
}
