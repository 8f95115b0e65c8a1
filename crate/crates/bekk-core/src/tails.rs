//! Marginal tail indices, tail-scale constants, and empirical tail
//! estimation.
//!
//! For the single-term diagonal model each marginal satisfies a scalar
//! random-coefficient recursion `X_i = A_ii m X_i + Q_i`, and its tail index
//! is the unique positive root of
//!
//! ```text
//! E[|m|^alpha] = |A_ii|^{-alpha},   m ~ N(0,1),
//! ```
//!
//! so marginals with different coefficients have genuinely different tail
//! indices. The Gaussian absolute moment has the closed form
//! `E|m|^a = 2^{a/2} Gamma((a+1)/2) / sqrt(pi)`; the moment equation is
//! solved by bracketed bisection with a Newton polish. The tail-scale
//! constant in `P(+-X_i > x) ~ c_i x^{-alpha_i}` is the renewal-theory ratio
//!
//! ```text
//! c_i = E[|X_1|^a - |A m X_0|^a] / (2a E[|A m|^a log|A m|]),
//! ```
//!
//! estimated by Monte Carlo on stationary transition pairs (numerator) and
//! one-dimensional quadrature (denominator).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::model::{classify, ClassLabel, ModelSpec, ParamClass};
use crate::numerics::special::ln_gamma;
use crate::simulate::{PathSample, DEFAULT_BURNIN};

/// Bracket used by the moment-equation root finder.
const ALPHA_BRACKET: (f64, f64) = (1e-6, 64.0);

/// Smallest coefficient magnitude for which the tail-scale Monte Carlo is
/// attempted; below this the stationary law is essentially the noise and the
/// ratio estimator leaves its valid regime.
pub const GOLDIE_MIN_COEFF: f64 = 0.05;

#[derive(Debug, Error)]
pub enum TailError {
    #[error("alpha must be positive, got {0}")]
    NonPositiveAlpha(f64),
    #[error("coefficient {a} is outside the stationarity region (|a| must be in (0, {threshold:.5}))")]
    OutsideStationarityRegion { a: f64, threshold: f64 },
    #[error("no root of the moment equation in ({lo}, {hi}); coefficient {a} is too small")]
    NoRootInBracket { a: f64, lo: f64, hi: f64 },
    #[error("operation requires a diagonal spec")]
    NotDiagonal,
    #[error("coefficient magnitude {0} is below the Monte-Carlo regime limit {min}", min = GOLDIE_MIN_COEFF)]
    CoefficientTooSmall(f64),
    #[error("order-statistic count k={k} out of range (need 1 <= k <= {max})")]
    KOutOfRange { k: usize, max: usize },
    #[error("degenerate order statistics: |x|_(k+1) = {0}; tail ratios are undefined")]
    DegenerateTail(f64),
    #[error("marginal index {i} out of range for dimension {d}")]
    MarginalOutOfRange { i: usize, d: usize },
}

/// `E|m|^alpha` for standard normal `m`, via log-gamma:
/// `2^{alpha/2} Gamma((alpha+1)/2) / sqrt(pi)`.
pub fn gaussian_abs_moment(alpha: f64) -> Result<f64, TailError> {
    if alpha <= 0.0 {
        return Err(TailError::NonPositiveAlpha(alpha));
    }
    Ok(ln_gaussian_abs_moment(alpha).exp())
}

fn ln_gaussian_abs_moment(alpha: f64) -> f64 {
    0.5 * alpha * std::f64::consts::LN_2 + ln_gamma((alpha + 1.0) / 2.0)
        - 0.5 * std::f64::consts::PI.ln()
}

/// Solves `E|m|^alpha = |a|^{-alpha}` for the unique positive root.
///
/// In log form the objective `h(alpha) = log E|m|^alpha + alpha log|a|` is
/// convex with `h(0) = 0` and a negative initial slope inside the
/// stationarity region, so the positive root is unique. Bracketed bisection
/// (200 steps) followed by a Newton polish.
pub fn solve_alpha(a: f64) -> Result<f64, TailError> {
    let threshold = crate::stationarity::threshold_constant();
    let abs_a = a.abs();
    if abs_a == 0.0 || abs_a >= threshold {
        return Err(TailError::OutsideStationarityRegion { a, threshold });
    }
    let h = |alpha: f64| ln_gaussian_abs_moment(alpha) + alpha * abs_a.ln();

    let (mut lo, mut hi) = ALPHA_BRACKET;
    if h(hi) < 0.0 {
        return Err(TailError::NoRootInBracket {
            a,
            lo: ALPHA_BRACKET.0,
            hi: ALPHA_BRACKET.1,
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut root = 0.5 * (lo + hi);
    // Newton polish: h'(alpha) = d/dalpha log E|m|^alpha + log|a|, with the
    // derivative evaluated by a central difference (the objective is smooth).
    for _ in 0..4 {
        let eps = 1e-6;
        let deriv = (h(root + eps) - h(root - eps)) / (2.0 * eps);
        if deriv.abs() < 1e-12 {
            break;
        }
        let next = root - h(root) / deriv;
        if next.is_finite() && next > 0.0 {
            root = next;
        }
    }
    Ok(root)
}

/// The coefficient magnitude whose marginal tail index is `alpha`:
/// `a = (E|m|^alpha)^{-1/alpha}`, the exact inverse of [`solve_alpha`].
pub fn solve_coeff(alpha: f64) -> Result<f64, TailError> {
    if alpha <= 0.0 {
        return Err(TailError::NonPositiveAlpha(alpha));
    }
    Ok((-ln_gaussian_abs_moment(alpha) / alpha).exp())
}

/// Tail index of the cross product `X_i X_j`:
/// `alpha_i alpha_j / (alpha_i + alpha_j)`; in particular `alpha_{i,i} =
/// alpha_i / 2`.
pub fn alpha_cross(alpha_i: f64, alpha_j: f64) -> f64 {
    alpha_i * alpha_j / (alpha_i + alpha_j)
}

/// Monte-Carlo estimate of the tail-scale constant `c_i` with its standard
/// error and a burn-in sensitivity flag.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoldieEstimate {
    pub estimate: f64,
    pub stderr: f64,
    /// Denominator `2 alpha E[|a m|^alpha log|a m|]`, from quadrature.
    pub denominator: f64,
    /// Set when the first and second halves of the sampled transitions
    /// disagree beyond 3 combined standard errors, indicating the burn-in
    /// may have been too short.
    pub burnin_sensitive: bool,
}

/// Estimates the tail-scale constant of marginal `i` for a diagonal spec.
///
/// The numerator `E[|X_1|^a - |A m X_0|^a]` is averaged over stationary
/// transition pairs that share the actual coefficient draw (the coupled
/// difference has light tails, unlike either term alone); the denominator is
/// a one-dimensional Gaussian integral evaluated by adaptive quadrature.
pub fn goldie_constant_mc(
    spec: &ModelSpec,
    i: usize,
    alpha_i: f64,
    t_len: usize,
    reps: usize,
    seed: u64,
) -> Result<GoldieEstimate, TailError> {
    if !classify(spec).has(ClassLabel::Diagonal) {
        return Err(TailError::NotDiagonal);
    }
    if i >= spec.d() {
        return Err(TailError::MarginalOutOfRange { i, d: spec.d() });
    }
    if alpha_i <= 0.0 {
        return Err(TailError::NonPositiveAlpha(alpha_i));
    }
    let a = spec.a()[0].get(i, i);
    if a.abs() < GOLDIE_MIN_COEFF {
        return Err(TailError::CoefficientTooSmall(a));
    }
    assert!(t_len >= 2 && reps >= 2, "need t_len >= 2 and reps >= 2");

    // E[|a m|^alpha log|a m|] by quadrature; positive at the solving alpha.
    let abs_a = a.abs();
    let integrand = |m: f64| {
        let am = abs_a * m;
        if am == 0.0 {
            0.0
        } else {
            am.powf(alpha_i) * am.ln() * standard_normal_pdf(m)
        }
    };
    let integral = 2.0 * integrate_half_line(&integrand, 1e-13);
    let denominator = 2.0 * alpha_i * integral;

    // The marginal of a diagonal spec evolves autonomously as a scalar
    // recursion with noise scale sqrt(C_ii).
    let noise_sd = spec.c().get(i, i).sqrt();
    let halves: Vec<(f64, f64)> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(rep as u64);
            let normal = StandardNormal;
            let mut x: f64 = 0.0;
            for _ in 0..DEFAULT_BURNIN {
                let m: f64 = normal.sample(&mut rng);
                let q: f64 = normal.sample(&mut rng);
                x = a * m * x + noise_sd * q;
            }
            let mut sums = [0.0f64; 2];
            let half = t_len / 2;
            for t in 0..t_len {
                let m: f64 = normal.sample(&mut rng);
                let q: f64 = normal.sample(&mut rng);
                let prev = x;
                x = a * m * x + noise_sd * q;
                let term = x.abs().powf(alpha_i) - (a * m * prev).abs().powf(alpha_i);
                sums[usize::from(t >= half)] += term;
            }
            (sums[0] / half as f64, sums[1] / (t_len - half) as f64)
        })
        .collect();

    let per_rep: Vec<f64> = halves.iter().map(|(f, s)| 0.5 * (f + s)).collect();
    let mean = per_rep.iter().sum::<f64>() / reps as f64;
    let var = per_rep.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
    let numerator_stderr = (var / reps as f64).sqrt();

    let first: Vec<f64> = halves.iter().map(|(f, _)| *f).collect();
    let second: Vec<f64> = halves.iter().map(|(_, s)| *s).collect();
    let half_mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let half_var = |v: &[f64], m: f64| {
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
    };
    let (fm, sm) = (half_mean(&first), half_mean(&second));
    let gap_se =
        (half_var(&first, fm) / reps as f64 + half_var(&second, sm) / reps as f64).sqrt();
    let burnin_sensitive = (fm - sm).abs() > 3.0 * gap_se.max(f64::MIN_POSITIVE);

    Ok(GoldieEstimate {
        estimate: mean / denominator,
        stderr: numerator_stderr / denominator.abs(),
        denominator,
        burnin_sensitive,
    })
}

#[inline]
fn standard_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Integral over `[0, inf)` of a standard-normal-weighted integrand,
/// evaluated as adaptive Simpson over fixed panels. The panel edges seed the
/// subdivision so a sharply localized integrand cannot be missed by a coarse
/// first pass; mass beyond the last edge is below the tolerance for every
/// integrand in this crate.
pub(crate) fn integrate_half_line<F: Fn(f64) -> f64>(f: &F, tol: f64) -> f64 {
    const EDGES: [f64; 9] = [0.0, 0.5, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0];
    EDGES
        .windows(2)
        .map(|w| adaptive_simpson(f, w[0], w[1], tol, 50))
        .sum()
}

/// Adaptive Simpson quadrature with a recursion-depth cap.
pub(crate) fn adaptive_simpson<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    max_depth: u32,
) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, m: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))
    }
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let left = simpson(f, a, 0.5 * (a + m), m);
        let right = simpson(f, m, 0.5 * (m + b), b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, left, tol / 2.0, depth - 1)
                + recurse(f, m, b, right, tol / 2.0, depth - 1)
        }
    }
    let m = 0.5 * (a + b);
    recurse(f, a, b, simpson(f, a, m, b), tol, max_depth)
}

/// Hill estimator of the tail index from the top `k` order statistics of
/// `|values|`:
/// `alpha = [ (1/k) sum_{j<=k} log(|x|_(j) / |x|_(k+1)) ]^{-1}`.
pub fn hill_from_values(values: &[f64], k: usize) -> Result<f64, TailError> {
    let n = values.len();
    if k < 1 || k + 1 > n {
        return Err(TailError::KOutOfRange { k, max: n.saturating_sub(1) });
    }
    let mut abs: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    abs.sort_unstable_by(|a, b| b.partial_cmp(a).expect("non-finite value in tail sample"));
    let x_k1 = abs[k];
    if x_k1 <= 0.0 {
        return Err(TailError::DegenerateTail(x_k1));
    }
    let sum_log: f64 = abs[..k].iter().map(|x| (x / x_k1).ln()).sum();
    if sum_log <= 0.0 {
        return Err(TailError::DegenerateTail(x_k1));
    }
    Ok(k as f64 / sum_log)
}

/// Hill estimator on marginal `i` of a path.
pub fn hill(path: &PathSample, i: usize, k: usize) -> Result<f64, TailError> {
    if i >= path.dim() {
        return Err(TailError::MarginalOutOfRange { i, d: path.dim() });
    }
    hill_from_values(&path.marginal(i), k)
}

/// Hill estimates over a sweep of `k` values plus a plateau summary.
#[derive(Debug, Clone, Serialize)]
pub struct HillPlateau {
    /// Median of the sweep estimates: the plateau value.
    pub alpha: f64,
    /// The individual `(k, alpha_hat)` pairs.
    pub points: Vec<(usize, f64)>,
}

/// Sweeps the Hill estimator over a geometric grid of `k` between
/// `sqrt(T)/2` and `4 sqrt(T)` and reports the median as the plateau
/// estimate.
pub fn hill_plateau(values: &[f64]) -> Result<HillPlateau, TailError> {
    let n = values.len();
    let sqrt_t = (n as f64).sqrt();
    let lo = ((sqrt_t / 2.0).round() as usize).max(1);
    let hi = ((4.0 * sqrt_t).round() as usize).min(n.saturating_sub(2)).max(lo);
    let grid_points = 16usize;
    let mut ks: Vec<usize> = (0..grid_points)
        .map(|j| {
            let f = j as f64 / (grid_points - 1) as f64;
            ((lo as f64) * ((hi as f64) / (lo as f64)).powf(f)).round() as usize
        })
        .collect();
    ks.dedup();

    let mut points = Vec::with_capacity(ks.len());
    for k in ks {
        points.push((k, hill_from_values(values, k)?));
    }
    let mut sorted: Vec<f64> = points.iter().map(|(_, a)| *a).collect();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let alpha = if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2]
    } else {
        0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
    };
    Ok(HillPlateau { alpha, points })
}

/// Per-marginal tail profile of a model.
#[derive(Debug, Clone, Serialize)]
pub struct TailProfile {
    /// Per-marginal tail indices.
    pub alpha: Vec<f64>,
    /// Per-marginal tail-scale constants with standard errors, when
    /// estimated.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<GoldieEstimate>>,
    /// Structural class of the generating spec, when known.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class: Option<ParamClass>,
}

/// Analytic tail profile from the moment equation. Diagonal specs get one
/// index per marginal; similarity specs share a common index determined by
/// the scale factor.
pub fn analytic_tail_profile(spec: &ModelSpec) -> Result<TailProfile, TailError> {
    let class = classify(spec);
    if class.has(ClassLabel::Diagonal) {
        let a1 = &spec.a()[0];
        let alpha = (0..spec.d())
            .map(|i| solve_alpha(a1.get(i, i)))
            .collect::<Result<Vec<_>, _>>()?;
        return Ok(TailProfile {
            alpha,
            c: None,
            class: Some(class),
        });
    }
    if class.has(ClassLabel::Similarity) {
        let a1 = &spec.a()[0];
        let scale = a1.transpose().matmul(a1).get(0, 0).sqrt();
        let alpha = solve_alpha(scale)?;
        return Ok(TailProfile {
            alpha: vec![alpha; spec.d()],
            c: None,
            class: Some(class),
        });
    }
    Err(TailError::NotDiagonal)
}
