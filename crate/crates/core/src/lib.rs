//! Quantitative central limit theorems from zero-free characteristic
//! functions.
//!
//! * [`charfn`]: moment generating functions on complex disks, zero-free
//!   radii, Kolmogorov–Smirnov bounds and rate fits.
//! * [`spin`]: lattice spin systems, Lee–Yang zeros, Metropolis sampling
//!   and the total-spin CLT.
//! * [`dpp`]: α-determinantal point processes: kernels, α-determinants,
//!   Fredholm determinants, cumulants, samplers and decay audits.
//! * [`harness`]: configuration-driven experiment runs with CSV and JSON
//!   reports and SVG plots.
//! * [`registry`]: built-in models addressable by name and parameters.
//! * [`numeric`]: quadrature, special functions, linear algebra, statistics.

pub mod charfn;
pub mod dpp;
pub mod error;
pub mod harness;
pub mod numeric;
pub mod registry;
pub mod spin;

pub use error::{Error, Result};
