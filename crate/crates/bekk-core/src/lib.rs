//! Simulation and tail analysis for multivariate BEKK-ARCH processes.
//!
//! A BEKK-ARCH process is a conditionally heteroskedastic vector time series
//!
//! ```text
//! X_t = H_t^{1/2} Z_t,    H_t = C + Σ_i A_i X_{t-1} X_{t-1}' A_i',
//! ```
//!
//! with Gaussian innovations. Because the innovations are Gaussian, the same
//! process can be written as a random-coefficient stochastic recurrence
//! equation
//!
//! ```text
//! X_t = M_t X_{t-1} + Q_t,    M_t = Σ_i m_it A_i,    m_it ~ N(0,1),  Q_t ~ N(0,C),
//! ```
//!
//! which is the representation everything in this crate is built on. The crate
//! provides:
//!
//! * [`model`] — model specification, validation, and structural
//!   classification (scalar / diagonal / similarity / ID-candidate),
//! * [`simulate`] — path generation in both representations and the
//!   multiplicative tail chain,
//! * [`stationarity`] — Monte-Carlo top Lyapunov exponent, the closed-form
//!   single-term spectral-radius gate, and Kronecker moment conditions,
//! * [`tails`] — marginal tail indices from the Gaussian moment equation,
//!   tail-scale constants, Hill estimation, and cross-product indices,
//! * [`extremes`] — the componentwise-scaled pseudo-norm, a bivariate
//!   rank-based spectral-measure estimator, and extremal-index estimators,
//! * [`covariance`] — sample covariance matrices and their heavy-tail
//!   fluctuation diagnostics.
//!
//! All randomized routines take explicit seeds and derive independent
//! replicate streams from them, so every result is reproducible bit-for-bit
//! regardless of thread scheduling.

pub mod covariance;
pub mod extremes;
pub mod model;
pub mod numerics;
pub mod simulate;
pub mod stationarity;
pub mod tails;

pub use covariance::{sample_cov, CovReport, CrossTailEntry, FluctuationScan};
pub use extremes::{
    cluster_sizes, extremal_index_blocks, extremal_index_mc, spectral_estimate, spectral_measure,
    vsrv_norm, ExtremalReport, SpectralEstimate, VsrvScale,
};
pub use model::{classify, draw_coefficient, ClassLabel, CoefficientDraw, ModelSpec, ParamClass};
pub use numerics::{cholesky, kron, spectral_radius, Matrix};
pub use simulate::{simulate_h_form, simulate_sre, simulate_tail_chain, PathSample, TailChainSample};
pub use stationarity::{
    gate_l1, lyapunov_mc, moment_condition, stationarity_report, threshold_constant, GateL1,
    StationarityConfig, StationarityReport,
};
pub use tails::{
    alpha_cross, gaussian_abs_moment, goldie_constant_mc, hill, hill_plateau, solve_alpha,
    solve_coeff, GoldieEstimate, HillPlateau, TailProfile,
};
