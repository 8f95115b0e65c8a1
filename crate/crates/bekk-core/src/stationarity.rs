//! Geometric-ergodicity and moment-existence diagnostics.
//!
//! Stationarity of the random-coefficient recursion is governed by the top
//! Lyapunov exponent of the coefficient matrices: a negative exponent yields
//! geometric ergodicity. Three tools are provided:
//!
//! * a Monte-Carlo estimator of the exponent (vector iteration with per-step
//!   renormalization, replicated for a standard error),
//! * a closed-form gate for the single-term model, where the exponent is
//!   `log rho(A) - (gamma + log 2)/2` and negativity reduces to
//!   `rho(A) < exp((gamma + log 2)/2) = 1.88736...`,
//! * Kronecker-power moment conditions: `rho(E[M^{(x)2n}]) < 1` implies a
//!   finite `2n`-th moment of the stationary law. The `n = 1` expectation is
//!   available exactly as `sum_i A_i^{(x)2}` (cross terms vanish because the
//!   coefficient scalars are independent with mean zero); higher orders are
//!   estimated by Monte Carlo.
//!
//! The Lyapunov criterion is an infimum over horizon length; by
//! subadditivity the infimum equals the long-horizon limit, which is what
//! the Monte-Carlo estimator targets.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::model::{CoefficientSampler, ModelSpec};
use crate::numerics::special::EULER_GAMMA;
use crate::numerics::{kron, norm2, spectral_radius, Matrix};

/// Steps of vector iteration discarded before log-growth accumulation starts,
/// removing the transient while the vector aligns with the top direction.
const LYAPUNOV_WARMUP: usize = 100;

/// Kronecker-power dimension limit for the moment condition.
pub const MOMENT_DIM_LIMIT: usize = 4096;

#[derive(Debug, Error)]
pub enum StationarityError {
    #[error("closed-form gate requires a single coefficient matrix and no autoregressive term")]
    InapplicableGate,
    #[error("moment order {n} needs a {dim}-dimensional Kronecker power, above the limit {limit}")]
    SizeLimit { n: u32, dim: usize, limit: usize },
    #[error("moment order must be at least 1")]
    ZeroOrder,
}

/// Stationarity threshold for the spectral radius of a single coefficient
/// matrix: `exp((gamma + log 2)/2) = 1.88736...`, the point where the
/// per-step log growth `log rho(A) + E[log|m|]` changes sign for a standard
/// normal scalar `m`.
pub fn threshold_constant() -> f64 {
    ((EULER_GAMMA + std::f64::consts::LN_2) / 2.0).exp()
}

/// Mean of `log|m|` for standard normal `m`: `-(gamma + log 2)/2`.
pub fn mean_log_abs_normal() -> f64 {
    -(EULER_GAMMA + std::f64::consts::LN_2) / 2.0
}

/// Result of the single-term spectral-radius gate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GateL1 {
    pub rho: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Closed-form geometric-ergodicity gate for `l = 1` specs without an
/// autoregressive term.
pub fn gate_l1(spec: &ModelSpec) -> Result<GateL1, StationarityError> {
    if spec.l() != 1 || spec.a0().is_some() {
        return Err(StationarityError::InapplicableGate);
    }
    let rho = spectral_radius(&spec.a()[0]);
    let threshold = threshold_constant();
    Ok(GateL1 {
        rho,
        threshold,
        pass: rho < threshold,
    })
}

/// Monte-Carlo estimate of the top Lyapunov exponent.
///
/// Each replicate iterates `v <- M v` from a random unit vector,
/// renormalizing every step and accumulating the log norm growth over
/// `n_steps` steps (after a short alignment warm-up). Returns the mean
/// per-step growth over replicates and its standard error.
pub fn lyapunov_mc(spec: &ModelSpec, n_steps: usize, n_reps: usize, seed: u64) -> (f64, f64) {
    assert!(n_steps >= 100, "n_steps must be at least 100");
    assert!(n_reps >= 2, "n_reps must be at least 2 for a standard error");
    let sampler = CoefficientSampler::new(spec);
    let d = spec.d();

    let estimates: Vec<f64> = (0..n_reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(rep as u64);
            let mut v: Vec<f64> = (0..d)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect();
            normalize(&mut v);
            for _ in 0..LYAPUNOV_WARMUP {
                v = sampler.draw_mtilde(&mut rng).mul_vec(&v);
                normalize(&mut v);
            }
            let mut log_growth = 0.0;
            for _ in 0..n_steps {
                let mut w = sampler.draw_mtilde(&mut rng).mul_vec(&v);
                let norm = norm2(&w).max(f64::MIN_POSITIVE);
                log_growth += norm.ln();
                for x in w.iter_mut() {
                    *x /= norm;
                }
                v = w;
            }
            log_growth / n_steps as f64
        })
        .collect();

    let mean = estimates.iter().sum::<f64>() / n_reps as f64;
    let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n_reps - 1) as f64;
    (mean, (var / n_reps as f64).sqrt())
}

fn normalize(v: &mut [f64]) {
    let n = norm2(v).max(f64::MIN_POSITIVE);
    for x in v.iter_mut() {
        *x /= n;
    }
}

/// How a moment-condition spectral radius was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MomentMethod {
    Exact,
    MonteCarlo,
}

/// Moment-condition result for one order `n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentCondition {
    pub n: u32,
    pub rho: f64,
    pub pass: bool,
    pub method: MomentMethod,
}

fn kron_dim(d: usize, n: u32) -> Result<usize, StationarityError> {
    let mut dim = 1usize;
    for _ in 0..(2 * n) {
        dim = dim
            .checked_mul(d)
            .filter(|&v| v <= MOMENT_DIM_LIMIT)
            .ok_or(StationarityError::SizeLimit {
                n,
                dim: usize::MAX,
                limit: MOMENT_DIM_LIMIT,
            })?;
    }
    Ok(dim)
}

/// Checks `rho(E[M^{(x)2n}]) < 1`, a sufficient condition for the stationary
/// law to have a finite `2n`-th moment. The order-1 expectation is exact;
/// higher orders average `mc_samples` Monte-Carlo draws of the Kronecker
/// power.
pub fn moment_condition(
    spec: &ModelSpec,
    n: u32,
    mc_samples: usize,
    seed: u64,
) -> Result<MomentCondition, StationarityError> {
    if n == 0 {
        return Err(StationarityError::ZeroOrder);
    }
    let dim = kron_dim(spec.d(), n).map_err(|_| StationarityError::SizeLimit {
        n,
        dim: spec.d().pow(2 * n.min(16)),
        limit: MOMENT_DIM_LIMIT,
    })?;
    let _ = dim;
    if n == 1 {
        let mut expectation = match spec.a0() {
            Some(a0) => kron(a0, a0),
            None => Matrix::zeros(spec.d() * spec.d(), spec.d() * spec.d()),
        };
        for a in spec.a() {
            expectation.add_assign(&kron(a, a));
        }
        let rho = spectral_radius(&expectation);
        Ok(MomentCondition {
            n,
            rho,
            pass: rho < 1.0,
            method: MomentMethod::Exact,
        })
    } else {
        let rho = moment_condition_mc(spec, n, mc_samples, seed)?.rho;
        Ok(MomentCondition {
            n,
            rho,
            pass: rho < 1.0,
            method: MomentMethod::MonteCarlo,
        })
    }
}

/// Monte-Carlo estimate of `rho(E[M^{(x)2n}])` for any order, including
/// `n = 1` (used to cross-validate the exact order-1 expectation).
pub fn moment_condition_mc(
    spec: &ModelSpec,
    n: u32,
    mc_samples: usize,
    seed: u64,
) -> Result<MomentCondition, StationarityError> {
    if n == 0 {
        return Err(StationarityError::ZeroOrder);
    }
    let dim = kron_dim(spec.d(), n)?;
    assert!(mc_samples >= 2, "mc_samples must be at least 2");
    let sampler = CoefficientSampler::new(spec);

    let chunks = rayon::current_num_threads().max(1);
    let per_chunk = mc_samples.div_ceil(chunks);
    let sums: Vec<Matrix> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk as u64);
            let lo = chunk * per_chunk;
            let hi = ((chunk + 1) * per_chunk).min(mc_samples);
            let mut acc = Matrix::zeros(dim, dim);
            for _ in lo..hi {
                let m = sampler.draw_mtilde(&mut rng);
                let mut power = kron(&m, &m);
                for _ in 1..n {
                    power = kron(&power, &kron(&m, &m));
                }
                acc.add_assign(&power);
            }
            acc
        })
        .collect();

    let mut total = Matrix::zeros(dim, dim);
    for s in &sums {
        total.add_assign(s);
    }
    let mean = total.scaled(1.0 / mc_samples as f64);
    let rho = spectral_radius(&mean);
    Ok(MomentCondition {
        n,
        rho,
        pass: rho < 1.0,
        method: MomentMethod::MonteCarlo,
    })
}

/// Settings for assembling a [`StationarityReport`].
#[derive(Debug, Clone)]
pub struct StationarityConfig {
    pub n_steps: usize,
    pub n_reps: usize,
    pub moment_orders: Vec<u32>,
    pub mc_samples: usize,
}

impl Default for StationarityConfig {
    fn default() -> Self {
        Self {
            n_steps: 100_000,
            n_reps: 20,
            moment_orders: vec![1],
            mc_samples: 10_000,
        }
    }
}

/// Combined stationarity diagnostics for a spec.
#[derive(Debug, Clone, Serialize)]
pub struct StationarityReport {
    pub lyapunov_estimate: f64,
    pub lyapunov_stderr: f64,
    pub n_steps: usize,
    pub n_reps: usize,
    /// Present exactly when the spec has a single coefficient matrix and no
    /// autoregressive term.
    pub gate_l1: Option<GateL1>,
    pub moment_orders: BTreeMap<u32, MomentCondition>,
}

/// Runs the full stationarity analysis: Monte-Carlo Lyapunov exponent, the
/// closed-form gate when applicable, and the requested moment orders.
pub fn stationarity_report(
    spec: &ModelSpec,
    config: &StationarityConfig,
    seed: u64,
) -> Result<StationarityReport, StationarityError> {
    let (estimate, stderr) = lyapunov_mc(spec, config.n_steps, config.n_reps, seed);
    let gate = match gate_l1(spec) {
        Ok(g) => Some(g),
        Err(StationarityError::InapplicableGate) => None,
        Err(e) => return Err(e),
    };
    let mut moments = BTreeMap::new();
    for &n in &config.moment_orders {
        moments.insert(n, moment_condition(spec, n, config.mc_samples, seed)?);
    }
    Ok(StationarityReport {
        lyapunov_estimate: estimate,
        lyapunov_stderr: stderr,
        n_steps: config.n_steps,
        n_reps: config.n_reps,
        gate_l1: gate,
        moment_orders: moments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Matrix;

    fn diag_spec(entries: &[f64]) -> ModelSpec {
        ModelSpec::new(
            vec![Matrix::from_diag(entries)],
            Matrix::identity(entries.len()),
            None,
        )
        .unwrap()
    }

    #[test]
    fn threshold_constant_value() {
        let t = threshold_constant();
        assert!((t - 1.88736).abs() < 1e-5, "threshold {t}");
        assert!((t * t - 3.56).abs() < 5e-3, "square {}", t * t);
        assert!((t.ln() - 0.635181).abs() < 5e-7, "log {}", t.ln());
    }

    #[test]
    fn lyapunov_identity_coefficient() {
        // A = I: exponent is E[log|m|] = -0.6351814...
        let spec = diag_spec(&[1.0, 1.0]);
        let (est, se) = lyapunov_mc(&spec, 100_000, 20, 1);
        let expect = mean_log_abs_normal();
        assert!(
            (est - expect).abs() < 3.0 * se,
            "estimate {est} +- {se} vs {expect}"
        );
    }

    #[test]
    fn lyapunov_critical_coefficient_is_near_zero() {
        let t = threshold_constant();
        let spec = diag_spec(&[t, t]);
        let (est, se) = lyapunov_mc(&spec, 100_000, 20, 2);
        assert!(est.abs() < 3.0 * se, "estimate {est} +- {se} should straddle 0");
    }

    #[test]
    fn lyapunov_dominated_by_spectral_radius() {
        // exponent = log rho(A) + E log|m|; rho = 1.0 here
        let spec = diag_spec(&[0.5, 1.0]);
        let (est, se) = lyapunov_mc(&spec, 100_000, 20, 3);
        let expect = mean_log_abs_normal();
        assert!((est - expect).abs() < 3.0 * se, "estimate {est} +- {se}");
    }

    #[test]
    fn lyapunov_identity_for_non_diagonal_matrix() {
        // symmetric with eigenvalues 1.5 and 0.5: exponent = log 1.5 - 0.6351814
        let a = Matrix::from_rows(vec![vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let spec = ModelSpec::new(vec![a], Matrix::identity(2), None).unwrap();
        let (est, se) = lyapunov_mc(&spec, 100_000, 20, 4);
        let expect = 1.5f64.ln() + mean_log_abs_normal();
        assert!((est - expect).abs() < 3.0 * se, "estimate {est} +- {se} vs {expect}");
    }

    #[test]
    fn gate_examples() {
        let g = gate_l1(&diag_spec(&[1.8, 0.1])).unwrap();
        assert!(g.pass);
        assert!((g.threshold - 1.88736).abs() < 1e-5);

        let g = gate_l1(&diag_spec(&[2.0, 2.0])).unwrap();
        assert!(!g.pass);
    }

    #[test]
    fn gate_rejects_multi_term_spec() {
        let spec = ModelSpec::new(
            vec![Matrix::from_diag(&[0.5, 0.5]), Matrix::from_diag(&[0.1, 0.1])],
            Matrix::identity(2),
            None,
        )
        .unwrap();
        assert!(matches!(
            gate_l1(&spec),
            Err(StationarityError::InapplicableGate)
        ));
    }

    #[test]
    fn gate_rejects_autoregressive_spec() {
        let spec = ModelSpec::new(
            vec![Matrix::from_diag(&[0.5, 0.5])],
            Matrix::identity(2),
            Some(Matrix::from_diag(&[0.1, 0.1])),
        )
        .unwrap();
        assert!(matches!(
            gate_l1(&spec),
            Err(StationarityError::InapplicableGate)
        ));
    }

    #[test]
    fn moment_condition_scalar_exact() {
        let spec = ModelSpec::new(
            vec![Matrix::identity(2).scaled(0.5)],
            Matrix::identity(2),
            None,
        )
        .unwrap();
        let mc = moment_condition(&spec, 1, 0, 0).unwrap();
        assert!((mc.rho - 0.25).abs() < 1e-10);
        assert!(mc.pass);
        assert_eq!(mc.method, MomentMethod::Exact);
    }

    #[test]
    fn moment_condition_boundary_fails() {
        let mc = moment_condition(&diag_spec(&[1.0, 0.9]), 1, 0, 0).unwrap();
        assert!((mc.rho - 1.0).abs() < 1e-10);
        assert!(!mc.pass);
    }

    #[test]
    fn gate_region_strictly_larger_than_moment_region() {
        // rho(A) just under the gate threshold: geometrically ergodic, but
        // rho(A^{(x)2}) = 3.56... > 1, so no finite second moment.
        let c = 3.56f64.sqrt();
        let spec = ModelSpec::new(
            vec![Matrix::identity(2).scaled(c)],
            Matrix::identity(2),
            None,
        )
        .unwrap();
        assert!(gate_l1(&spec).unwrap().pass);
        let mc = moment_condition(&spec, 1, 0, 0).unwrap();
        assert!((mc.rho - 3.56).abs() < 1e-9);
        assert!(!mc.pass);
    }

    #[test]
    fn moment_condition_exact_matches_monte_carlo() {
        let spec = diag_spec(&[0.7, 0.4]);
        let exact = moment_condition(&spec, 1, 0, 0).unwrap();
        let mc = moment_condition_mc(&spec, 1, 200_000, 9).unwrap();
        // MC error on the averaged Kronecker entries propagates to the
        // radius; 2% is comfortable at this sample count.
        assert!(
            (exact.rho - mc.rho).abs() < 0.02,
            "exact {} vs mc {}",
            exact.rho,
            mc.rho
        );
    }

    #[test]
    fn moment_condition_order_two_scalar() {
        // scalar a I: E[M^{(x)4}] = a^4 E[m^4] I = 3 a^4 I
        let a = 0.6f64;
        let spec = ModelSpec::new(
            vec![Matrix::identity(2).scaled(a)],
            Matrix::identity(2),
            None,
        )
        .unwrap();
        let mc = moment_condition(&spec, 2, 100_000, 4).unwrap();
        let expect = 3.0 * a.powi(4);
        assert!(
            (mc.rho - expect).abs() / expect < 0.05,
            "rho {} vs {expect}",
            mc.rho
        );
        assert_eq!(mc.method, MomentMethod::MonteCarlo);
    }

    #[test]
    fn moment_condition_size_limit() {
        let spec = diag_spec(&[0.5, 0.5]);
        // 2^(2*7) = 16384 > 4096
        assert!(matches!(
            moment_condition(&spec, 7, 10, 0),
            Err(StationarityError::SizeLimit { .. })
        ));
    }

    #[test]
    fn gate_agrees_with_monte_carlo_for_diagonal_specs() {
        for (entries, seed) in [([1.7f64, 0.2], 5u64), ([1.95, 0.3], 6)] {
            let spec = diag_spec(&entries);
            let gate = gate_l1(&spec).unwrap();
            let (est, se) = lyapunov_mc(&spec, 100_000, 20, seed);
            if gate.pass {
                assert!(est < -3.0 * se, "gate pass but estimate {est} +- {se}");
            } else {
                assert!(est > 3.0 * se, "gate fail but estimate {est} +- {se}");
            }
        }
    }

    #[test]
    fn report_includes_gate_only_when_applicable() {
        let spec = diag_spec(&[0.5, 0.6]);
        let config = StationarityConfig {
            n_steps: 1000,
            n_reps: 4,
            moment_orders: vec![1],
            mc_samples: 100,
        };
        let report = stationarity_report(&spec, &config, 0).unwrap();
        assert!(report.gate_l1.is_some());
        assert!(report.moment_orders.contains_key(&1));

        let two_term = ModelSpec::new(
            vec![Matrix::from_diag(&[0.5, 0.5]), Matrix::from_diag(&[0.1, 0.1])],
            Matrix::identity(2),
            None,
        )
        .unwrap();
        let report = stationarity_report(&two_term, &config, 0).unwrap();
        assert!(report.gate_l1.is_none());
    }
}
