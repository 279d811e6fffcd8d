use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Experiment families the runner dispatches to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// KS distance of standardized i.i.d. sums against `n`.
    IidRate,
    /// Total-spin CLT over growing lattice boxes.
    SpinClt,
    /// Fugacity zeros of Ising partition functions.
    SpinLeeyang,
    /// Standardized cumulants and zero-free radii of point-process
    /// linear statistics.
    DppClt,
    /// Variance growth of point-process linear statistics.
    DppVariance,
    /// The zero-free-disk KS bound against exact KS distances.
    KsBoundAudit,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::IidRate,
        ExperimentKind::SpinClt,
        ExperimentKind::SpinLeeyang,
        ExperimentKind::DppClt,
        ExperimentKind::DppVariance,
        ExperimentKind::KsBoundAudit,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::IidRate => "iid_rate",
            ExperimentKind::SpinClt => "spin_clt",
            ExperimentKind::SpinLeeyang => "spin_leeyang",
            ExperimentKind::DppClt => "dpp_clt",
            ExperimentKind::DppVariance => "dpp_variance",
            ExperimentKind::KsBoundAudit => "ks_bound_audit",
        }
    }

    /// Name of the sweep variable, the first CSV column.
    pub fn sweep_name(&self) -> &'static str {
        match self {
            ExperimentKind::IidRate | ExperimentKind::KsBoundAudit => "n",
            ExperimentKind::SpinClt | ExperimentKind::SpinLeeyang => "sites",
            ExperimentKind::DppClt | ExperimentKind::DppVariance => "L",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Argument(format!("unknown experiment kind {s:?}")))
    }
}

#[derive(Debug, Clone, Copy)]
enum ValueType {
    Float,
    Positive,
    UInt,
    Count,
    Positives,
    Counts,
    Bool,
    Text,
    Choice(&'static [&'static str]),
}

impl ValueType {
    fn check(&self, raw: &str) -> std::result::Result<(), String> {
        let float = |s: &str| s.trim().parse::<f64>().ok().filter(|v| v.is_finite());
        let uint = |s: &str| s.trim().parse::<u64>().ok();
        let list = |s: &str| -> Vec<String> { s.split(',').map(|p| p.trim().to_string()).collect() };
        match self {
            ValueType::Float => float(raw).map(|_| ()).ok_or_else(|| "expected a finite number".into()),
            ValueType::Positive => float(raw)
                .filter(|v| *v > 0.0)
                .map(|_| ())
                .ok_or_else(|| "expected a positive number".into()),
            ValueType::UInt => uint(raw).map(|_| ()).ok_or_else(|| "expected a nonnegative integer".into()),
            ValueType::Count => uint(raw)
                .filter(|v| *v > 0)
                .map(|_| ())
                .ok_or_else(|| "expected a positive integer".into()),
            ValueType::Positives => {
                let items = list(raw);
                if items.iter().all(|s| float(s).is_some_and(|v| v > 0.0)) {
                    Ok(())
                } else {
                    Err("expected a comma-separated list of positive numbers".into())
                }
            }
            ValueType::Counts => {
                let items = list(raw);
                if items.iter().all(|s| uint(s).is_some_and(|v| v > 0)) {
                    Ok(())
                } else {
                    Err("expected a comma-separated list of positive integers".into())
                }
            }
            ValueType::Bool => match raw {
                "true" | "false" => Ok(()),
                _ => Err("expected true or false".into()),
            },
            ValueType::Text => {
                if raw.is_empty() {
                    Err("expected a nonempty value".into())
                } else {
                    Ok(())
                }
            }
            ValueType::Choice(options) => {
                if options.contains(&raw) {
                    Ok(())
                } else {
                    Err(format!("expected one of {}", options.join(", ")))
                }
            }
        }
    }
}

struct KeySpec {
    key: &'static str,
    ty: ValueType,
    default: Option<&'static str>,
    required: bool,
}

const fn opt(key: &'static str, ty: ValueType, default: &'static str) -> KeySpec {
    KeySpec {
        key,
        ty,
        default: Some(default),
        required: false,
    }
}

const fn req(key: &'static str, ty: ValueType) -> KeySpec {
    KeySpec {
        key,
        ty,
        default: None,
        required: true,
    }
}

/// Optional key without a default.
const fn maybe(key: &'static str, ty: ValueType) -> KeySpec {
    KeySpec {
        key,
        ty,
        default: None,
        required: false,
    }
}

const KERNELS: &[&str] = &["gaussian", "ball_fourier", "projection", "tabulated"];
const PHIS: &[&str] = &["indicator", "bump", "constant", "tabulated"];
const BASES: &[&str] = &["rademacher", "bernoulli"];
const MEASURES: &[&str] = &["ising", "circle", "sphere"];

fn kernel_keys() -> Vec<KeySpec> {
    vec![
        req("dpp.kernel", ValueType::Choice(KERNELS)),
        opt("dpp.dim", ValueType::Count, "1"),
        maybe("dpp.amplitude", ValueType::Positive),
        opt("dpp.length", ValueType::Positive, "1"),
        maybe("dpp.rank", ValueType::Count),
        maybe("dpp.kernel_file", ValueType::Text),
        req("dpp.alpha", ValueType::Float),
        maybe("dpp.decay_beta", ValueType::Positive),
        opt("dpp.phi", ValueType::Choice(PHIS), "bump"),
        maybe("dpp.phi_file", ValueType::Text),
        req("dpp.scales", ValueType::Positives),
        maybe("dpp.resolution", ValueType::Positive),
    ]
}

fn iid_keys() -> Vec<KeySpec> {
    vec![
        opt("iid.base", ValueType::Choice(BASES), "rademacher"),
        opt("iid.p", ValueType::Positive, "0.5"),
        req("iid.ns", ValueType::Counts),
        opt("iid.radius_scale", ValueType::Positive, "0.5"),
    ]
}

fn schema(kind: ExperimentKind) -> Vec<KeySpec> {
    let mut keys = vec![
        opt("output.dir", ValueType::Text, "."),
        opt("output.name", ValueType::Text, kind.name()),
        maybe("seed", ValueType::UInt),
    ];
    match kind {
        ExperimentKind::IidRate => {
            keys.extend(iid_keys());
            keys.extend([
                opt("iid.samples", ValueType::Count, "1000000"),
                opt("tolerance.slope_min", ValueType::Float, "-0.65"),
                opt("tolerance.slope_max", ValueType::Float, "-0.40"),
            ]);
        }
        ExperimentKind::KsBoundAudit => {
            keys.extend(iid_keys());
            keys.push(opt("iid.constant_a", ValueType::Positive, "1"));
        }
        ExperimentKind::SpinClt => keys.extend([
            opt("spin.dim", ValueType::Count, "1"),
            opt("spin.measure", ValueType::Choice(MEASURES), "ising"),
            opt("spin.j", ValueType::Float, "1"),
            req("spin.h", ValueType::Positive),
            req("spin.beta", ValueType::Positive),
            opt("spin.periodic", ValueType::Bool, "false"),
            req("spin.sides", ValueType::Counts),
            opt("spin.samples", ValueType::Count, "200000"),
            opt("spin.burn_in", ValueType::UInt, "2000"),
            opt("spin.thinning", ValueType::Count, "1"),
            opt("spin.chains", ValueType::Count, "8"),
            opt("spin.proposal_width", ValueType::Positive, "1"),
            opt("spin.radius_fraction", ValueType::Positive, "0.9"),
            opt("spin.constant_a", ValueType::Positive, "1"),
            opt("tolerance.variance_exponent_min", ValueType::Float, "0.85"),
            opt("tolerance.variance_exponent_max", ValueType::Float, "1.15"),
            opt("tolerance.ks_exponent_min", ValueType::Float, "-0.8"),
            opt("tolerance.ks_exponent_max", ValueType::Float, "-0.3"),
            opt("tolerance.min_effective_samples", ValueType::Float, "10000"),
        ]),
        ExperimentKind::SpinLeeyang => keys.extend([
            opt("spin.dim", ValueType::Count, "1"),
            opt("spin.j", ValueType::Float, "1"),
            opt("spin.h", ValueType::Float, "0.1"),
            req("spin.beta", ValueType::Positive),
            opt("spin.periodic", ValueType::Bool, "false"),
            req("spin.sides", ValueType::Counts),
            opt("tolerance.unit_circle", ValueType::Positive, "1e-8"),
        ]),
        ExperimentKind::DppClt => {
            keys.extend(kernel_keys());
            keys.extend([
                opt("dpp.backend", ValueType::Choice(&["cumulant", "sampling"]), "cumulant"),
                opt("dpp.samples", ValueType::Count, "20000"),
                opt("dpp.scan", ValueType::Bool, "true"),
                opt("dpp.scan_radius", ValueType::Positive, "8"),
                opt("dpp.scan_step", ValueType::Positive, "0.5"),
                opt("dpp.scan_rel_tol", ValueType::Positive, "0.01"),
                opt("tolerance.final_skewness", ValueType::Positive, "0.1"),
                opt("tolerance.zero_free_spread", ValueType::Positive, "0.2"),
            ]);
        }
        ExperimentKind::DppVariance => {
            keys.extend(kernel_keys());
            keys.push(opt("tolerance.exponent_deviation", ValueType::Positive, "0.2"));
        }
    }
    keys
}

/// A validated experiment description: the kind plus every key of its
/// schema resolved to a value (explicit or default).
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    kind: ExperimentKind,
    values: BTreeMap<String, String>,
}

impl ExperimentConfig {
    /// Parses `key = value` lines; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut problems = Vec::new();
        let mut pairs = Vec::new();
        let mut seen = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                problems.push(format!("line {}: expected `key = value`, got {line:?}", i + 1));
                continue;
            };
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if seen.insert(k.clone(), i + 1).is_some() {
                problems.push(format!("{k}: set more than once (line {})", i + 1));
                continue;
            }
            pairs.push((k, v));
        }
        match Self::from_pairs(pairs) {
            Ok(c) if problems.is_empty() => Ok(c),
            Ok(_) => Err(Error::Validation(problems)),
            Err(Error::Validation(more)) => {
                problems.extend(more);
                Err(Error::Validation(problems))
            }
            Err(e) => Err(e),
        }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Validates a key-value map; every offending key is reported.
    pub fn from_pairs<I, K, V>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        let mut given: BTreeMap<String, String> = BTreeMap::new();
        let mut order = Vec::new();
        for (k, v) in pairs {
            let k = k.into();
            order.push(k.clone());
            given.insert(k, v.into());
        }
        let mut problems = Vec::new();
        let kind = match given.remove("experiment") {
            None => {
                let names: Vec<&str> = ExperimentKind::ALL.iter().map(|k| k.name()).collect();
                return Err(Error::Validation(vec![format!(
                    "experiment: required (one of {})",
                    names.join(", ")
                )]));
            }
            Some(v) => match v.parse::<ExperimentKind>() {
                Ok(k) => k,
                Err(_) => {
                    let names: Vec<&str> = ExperimentKind::ALL.iter().map(|k| k.name()).collect();
                    return Err(Error::Validation(vec![format!(
                        "experiment: unknown kind {v:?} (one of {})",
                        names.join(", ")
                    )]));
                }
            },
        };
        let schema = schema(kind);
        for k in &order {
            if k != "experiment" && !schema.iter().any(|s| s.key == k) {
                problems.push(format!("{k}: unknown key for {kind}"));
            }
        }
        let mut values = BTreeMap::new();
        for spec in &schema {
            match given.get(spec.key) {
                Some(v) => match spec.ty.check(v) {
                    Ok(()) => {
                        values.insert(spec.key.to_string(), v.clone());
                    }
                    Err(msg) => problems.push(format!("{}: {msg}, got {v:?}", spec.key)),
                },
                None if spec.required => problems.push(format!("{}: required for {kind}", spec.key)),
                None => {
                    if let Some(d) = spec.default {
                        values.insert(spec.key.to_string(), d.to_string());
                    }
                }
            }
        }
        let config = ExperimentConfig { kind, values };
        problems.extend(config.cross_checks());
        if problems.is_empty() {
            Ok(config)
        } else {
            Err(Error::Validation(problems))
        }
    }

    fn cross_checks(&self) -> Vec<String> {
        let mut problems = Vec::new();
        let has = |k: &str| self.values.contains_key(k);
        let is = |k: &str, v: &str| self.values.get(k).is_some_and(|x| x == v);
        if self.is_stochastic() && !has("seed") {
            problems.push(format!("seed: required for stochastic experiment {}", self.kind));
        }
        if is("dpp.kernel", "projection") && !has("dpp.rank") {
            problems.push("dpp.rank: required for the projection kernel".into());
        }
        if is("dpp.kernel", "tabulated") && !has("dpp.kernel_file") {
            problems.push("dpp.kernel_file: required for a tabulated kernel".into());
        }
        if is("dpp.phi", "tabulated") && !has("dpp.phi_file") {
            problems.push("dpp.phi_file: required for a tabulated test function".into());
        }
        if is("iid.base", "bernoulli") {
            if let Ok(p) = self.f64("iid.p") {
                if p >= 1.0 {
                    problems.push(format!("iid.p: must lie in (0, 1), got {p}"));
                }
            }
        }
        if self.kind == ExperimentKind::SpinLeeyang && self.f64("spin.j").is_ok_and(|j| j == 0.0) {
            problems.push("spin.j: must be nonzero".into());
        }
        problems
    }

    /// Whether the run draws random numbers (and so needs `seed`).
    pub fn is_stochastic(&self) -> bool {
        match self.kind {
            ExperimentKind::IidRate | ExperimentKind::SpinClt => true,
            ExperimentKind::DppClt => self.values.get("dpp.backend").is_some_and(|b| b == "sampling"),
            _ => false,
        }
    }

    pub fn kind(&self) -> ExperimentKind {
        self.kind
    }

    pub fn seed(&self) -> Option<u64> {
        self.values.get("seed").and_then(|s| s.parse().ok())
    }

    /// Every resolved key, including `experiment`, sorted by key.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut out = self.values.clone();
        out.insert("experiment".into(), self.kind.name().into());
        out
    }

    /// Canonical text form; parses back to an equal configuration.
    pub fn to_text(&self) -> String {
        let mut out = format!("experiment = {}\n", self.kind);
        for (k, v) in &self.values {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Replaces a value and re-validates.
    pub fn with_value(&self, key: &str, value: &str) -> Result<Self> {
        let mut map = self.echo();
        map.insert(key.to_string(), value.to_string());
        Self::from_pairs(map)
    }

    fn missing(&self, key: &str) -> Error {
        Error::Validation(vec![format!("{key}: missing")])
    }

    pub fn text(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| self.missing(key))
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        self.text(key)?
            .parse()
            .map_err(|_| Error::Validation(vec![format!("{key}: not a number")]))
    }

    pub fn opt_f64(&self, key: &str) -> Result<Option<f64>> {
        self.get(key).map(|_| self.f64(key)).transpose()
    }

    pub fn u64(&self, key: &str) -> Result<u64> {
        self.text(key)?
            .parse()
            .map_err(|_| Error::Validation(vec![format!("{key}: not an integer")]))
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        Ok(self.u64(key)? as usize)
    }

    pub fn bool(&self, key: &str) -> Result<bool> {
        Ok(self.text(key)? == "true")
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>> {
        self.text(key)?
            .split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| Error::Validation(vec![format!("{key}: not a number list")]))
            })
            .collect()
    }

    pub fn u64_list(&self, key: &str) -> Result<Vec<u64>> {
        self.text(key)?
            .split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| Error::Validation(vec![format!("{key}: not an integer list")]))
            })
            .collect()
    }

    /// `output.dir` joined with `output.name` and `extension`.
    pub fn output_path(&self, dir: Option<&Path>, extension: &str) -> PathBuf {
        let dir = dir.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(self.get("output.dir").unwrap_or(".")));
        dir.join(format!("{}.{extension}", self.get("output.name").unwrap_or(self.kind.name())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn messages(err: Error) -> Vec<String> {
        match err {
            Error::Validation(m) => m,
            other => panic!("expected a validation error, got {other}"),
        }
    }

    #[test]
    fn missing_seed_is_named() {
        let err = ExperimentConfig::parse("experiment = iid_rate\niid.ns = 16, 64, 256\n").unwrap_err();
        let msgs = messages(err);
        assert_eq!(msgs.len(), 1);
        assert!(msgs[0].starts_with("seed:"), "{msgs:?}");
    }

    #[test]
    fn every_offending_key_is_listed() {
        let text = "experiment = spin_clt\nspin.beta = -1\nspin.sides = 4, x\nspin.colour = red\n";
        let msgs = messages(ExperimentConfig::parse(text).unwrap_err());
        for key in ["spin.beta", "spin.sides", "spin.colour", "spin.h", "seed"] {
            assert!(msgs.iter().any(|m| m.starts_with(&format!("{key}:"))), "{key} missing from {msgs:?}");
        }
    }

    #[test]
    fn malformed_lines_and_duplicates() {
        let text = "experiment = spin_leeyang\nspin.beta = 0.4\nspin.beta = 0.5\nspin.sides 3\n";
        let msgs = messages(ExperimentConfig::parse(text).unwrap_err());
        assert!(msgs.iter().any(|m| m.starts_with("spin.beta: set more than once")));
        assert!(msgs.iter().any(|m| m.starts_with("line 4")));
    }

    #[test]
    fn unknown_or_missing_kind() {
        assert!(messages(ExperimentConfig::parse("seed = 1\n").unwrap_err())[0].starts_with("experiment:"));
        assert!(messages(ExperimentConfig::parse("experiment = nope\n").unwrap_err())[0].contains("nope"));
    }

    #[test]
    fn round_trip_and_defaults() {
        let text = "# comment\nexperiment = dpp_clt\ndpp.kernel = gaussian\ndpp.alpha = -1\ndpp.scales = 8, 16\n";
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.kind(), ExperimentKind::DppClt);
        assert_eq!(c.get("dpp.phi"), Some("bump"));
        assert!(!c.is_stochastic());
        assert_eq!(ExperimentConfig::parse(&c.to_text()).unwrap(), c);
        assert_eq!(ExperimentConfig::from_pairs(c.echo()).unwrap(), c);
        assert_eq!(c.f64_list("dpp.scales").unwrap(), vec![8.0, 16.0]);
        let sampling = c.with_value("dpp.backend", "sampling");
        assert!(messages(sampling.unwrap_err())[0].starts_with("seed:"));
    }

    #[test]
    fn conditional_keys() {
        let text = "experiment = dpp_variance\ndpp.kernel = projection\ndpp.alpha = -1\ndpp.scales = 1,2,3\n";
        let msgs = messages(ExperimentConfig::parse(text).unwrap_err());
        assert_eq!(msgs, vec!["dpp.rank: required for the projection kernel".to_string()]);
    }
}
