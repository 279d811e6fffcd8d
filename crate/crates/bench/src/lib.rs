//! Benchmark fixtures.

use marcin_clt::charfn::CharFnModel;
use marcin_clt::dpp::{DiscretizedKernel, KernelSpec, TestFunction};

/// Discretized Gaussian kernel on the window of `φ_L` (bump) with the
/// sampled test function.
pub fn gaussian_window(amplitude: f64, scale: f64, resolution: f64, alpha: f64) -> (DiscretizedKernel, Vec<f64>) {
    let spec = KernelSpec::gaussian(1, amplitude, 1.0, alpha).expect("valid kernel");
    let dk = DiscretizedKernel::for_statistic(&spec, &TestFunction::Bump, scale, resolution).expect("discretizes");
    let values = dk.sample_function(&TestFunction::Bump, scale);
    (dk, values)
}

/// Rank-`rank` projection kernel on a grid of cell side `resolution`.
pub fn projection_window(rank: usize, resolution: f64) -> DiscretizedKernel {
    let spec = KernelSpec::projection(1, rank, -1.0).expect("valid kernel");
    DiscretizedKernel::for_statistic(&spec, &TestFunction::Constant, 1.0, resolution).expect("discretizes")
}

/// `cos(u)^n`, with zeros on the real axis at `±π/2`.
pub fn rademacher_sum(n: u32) -> CharFnModel {
    CharFnModel::rademacher().iid_sum(n)
}
