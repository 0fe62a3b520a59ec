//! Numerical laboratory for the Cauchy-smoothed eigenvalue density of large
//! random matrices in the mesoscopic regime `η = N^(−α)`, `0 < α < 1`.
//!
//! * [`rng`]: per-realization deterministic streams and entry laws.
//! * [`ensembles`]: Wigner and sample-covariance realizations.
//! * [`eigensolve`]: Householder + implicit QL eigenvalues, and a direct
//!   resolvent oracle for cross-checking.
//! * [`laws`]: semicircle and Marchenko–Pastur laws, their Stieltjes
//!   transforms, and the fluctuation covariance kernel.
//! * [`meso`]: smoothed density, Monte Carlo batches, covariance reports and
//!   variance-scaling studies.

pub mod eigensolve;
pub mod ensembles;
pub mod error;
pub mod laws;
pub mod meso;
pub mod quadrature;
pub mod rng;
pub mod stats;

pub use eigensolve::{
    eigenvalues_tridiagonal, resolvent_trace_oracle, spectrum, tridiagonalize, ResolventOracle,
    SpectrumSample,
};
pub use ensembles::{expected_trace, generate, DenseSymmetricMatrix, EnsembleKind, EnsembleSpec};
pub use error::{Error, Result};
pub use laws::{
    covariance_kernel, kernel_asymptote_check, mp_density, semicircle_density, stieltjes,
    support_and_mass, LimitingLaw, SupportAndMass,
};
pub use meso::{
    covariance_report, empirical_cdf, fluctuations, run_batch, smoothed_density,
    variance_scaling_study, CovarianceReport, FluctuationBatch, MesoGrid, ScalingStudy,
};
pub use rng::{make_stream, moment_check, DistributionKind, EntryDistribution, SeedSpec, Stream};
pub use stats::Table;
