//! Ferromagnetic lattice spin systems: exact partition functions, Lee–Yang
//! zeros, Metropolis sampling and the total-spin CLT.

mod clt;
mod exact;
mod floor;
mod leeyang;
mod metropolis;
mod model;

pub use clt::{
    size_seed, spin_clt_experiment, spin_clt_row, summarize_spin_rows,     SpinCltConfig, SpinCltResult, SpinCltRow, SpinFamily,
};
pub use exact::{
    chain_order, direct_gibbs_expectation, log_partition_function, partition_function,
    select_backend, total_spin_charfn, total_spin_model, ExactBackend, ExactSolver, ScaledComplex,
    MAX_ENUMERATION_SITES, MAX_ENUMERATION_STATES, MAX_QUADRATURE_SITES, QUADRATURE_TOL,
};
pub use floor::{
    conditional_tilt_bound, conditional_variance_floor, tilted_variance, tilted_variance_floor,
    VarianceFloor,
};
pub use leeyang::{charfn_zero_from_fugacity, lee_yang_zeros, LeeYangReport};
pub use metropolis::{
    metropolis_observable, metropolis_sample, metropolis_total_spin, spin_correlation_check,
    summarize_chains, CorrelationReport, MetropolisConfig, ObservableSeries, SeriesSummary,
    SpinSampleSet, MAX_STORED_COORDINATES, MIN_EFFECTIVE_SAMPLES,
};
pub use model::{hamiltonian, Lattice, QuadratureOrder, SpinMeasure, SpinModel, SpinNode};
