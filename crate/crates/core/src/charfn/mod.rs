//! Characteristic functions on complex disks: evaluation, zero-free radii,
//! Kolmogorov–Smirnov bounds and CLT rate fits.
//!
//! Models store the moment generating function `u ↦ E[e^{uX}]` on a disk;
//! the characteristic function is `Ψ(t) = E[e^{itX}]`, i.e. the evaluator
//! at `i·t`. Disks are rotation invariant so zero-free radii agree for both.

mod ks;
mod model;
mod rate;
mod scan;

pub use ks::{
    empirical_ks, ks_against_normal_atoms, ks_against_normal_cdf, ks_bound, smoothing_ks_bound,
    EmpiricalKs, KsBoundReport,
};
pub use model::{eval_charfn, CharFnModel, Evaluator};
pub use rate::{
    calibrate_iid_rows, clt_rate_fit, iid_rate_experiment, iid_rate_point, iid_sum_ks_bound, IidBase, IidRateConfig, IidRateResult,
    IidRateRow, RateFit,
};
pub use scan::{
    circle_max, winding_number, zero_free_radius, CircleMax, CircleTrace, DiskScanReport,
    ScanOptions, ScanStatus,
};
