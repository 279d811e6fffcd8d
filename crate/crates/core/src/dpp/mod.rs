//! α-determinantal point processes: α-determinants, Fredholm determinants
//! of discretized kernels, cumulants and variance of linear statistics,
//! kernel decay audits and samplers.

mod alpha_det;
mod decay;
mod experiment;
mod fredholm;
mod kernel;
mod sample;

pub use alpha_det::{alpha_det, alpha_det_complex, alpha_det_cycle_polynomial, MAX_ALPHA_DET_ORDER};
pub use decay::{kernel_decay_check, AnnulusRow, DecayParams, DecayReport};
pub use experiment::{
    default_resolution, dpp_clt_experiment, dpp_clt_row, grid_variance, predicted_variance_exponent,
    summarize_dpp_rows, variance_row, variance_scaling_fit,
    DppBackend, DppCltConfig, DppCltResult, DppCltRow, VarianceRow, VarianceScalingFit, RESOLUTION_TOL,
};
pub use fredholm::{
    fredholm_charfn_model, fredholm_laplace, fredholm_log_laplace, fredholm_series_check, linstat_cumulants,
    linstat_mean, linstat_variance_formula, mgf_growth, variance_terms, CumulantReport, SeriesCheck, FREDHOLM_TOL,
    MAX_SERIES_ORDER, RICHARDSON_TOL,
};
pub use kernel::{
    ball_fourier_profile, window_grid, CustomKernel, Density, DiscretizedKernel, Grid, KernelFamily, KernelSpec,
    TabulatedFunction, TabulatedKernel, TestFunction, MAX_DISCRETIZATION_POINTS, SPECTRAL_TOL,
};
pub use sample::{
    correlation_validation, sample_dpp, sample_dpp_many, sample_permanental_cox, sample_poisson, Configuration,
    CorrelationValidation, MIN_VALIDATION_SAMPLES,
};
