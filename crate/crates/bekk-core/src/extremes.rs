//! Componentwise-scaled extreme-value machinery: the pseudo-norm, a
//! bivariate rank-based spectral-measure estimator, extremal indices, and
//! cluster diagnostics.
//!
//! When marginals have different tail indices the natural radius is not a
//! norm but the marginally-homogeneous functional
//!
//! ```text
//! ||x||_alpha = max_i c_i^{-1} |x_i|^{alpha_i},
//! ```
//!
//! which scales linearly when each component is scaled by `t^{1/alpha_i}`.
//! The spectral-measure estimator works on marginal ranks, so it is
//! invariant under strictly increasing transformations of each marginal:
//!
//! ```text
//! Phi(theta) = (1/k) #{ t : R1 v R2 >= T+1-k,
//!                       arctan((T+1-R2)/(T+1-R1)) <= theta },
//! ```
//!
//! with `R_t` the descending rank (`1` = largest). The marginal extremal
//! index of the single-term diagonal model is
//!
//! ```text
//! theta_i = E[ max_{k>=0} (P_k)_+^{alpha_i} - max_{k>=1} (P_k)_+^{alpha_i} ],
//! P_k = A_ii^k prod_{j<=k} m_j,  P_0 = 1,
//! ```
//!
//! estimated by Monte Carlo with a drift-based truncation horizon, and
//! cross-checked by a blocks estimator on simulated paths.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::model::{classify, ClassLabel, ModelSpec};
use crate::simulate::PathSample;
use crate::stationarity::mean_log_abs_normal;

#[derive(Debug, Error)]
pub enum ExtremesError {
    #[error("spectral-measure estimator requires a bivariate path, got d={0}")]
    NotBivariate(usize),
    #[error("threshold count k={k} out of range (need 1 <= k < T={t})")]
    KOutOfRange { k: usize, t: usize },
    #[error("operation requires a diagonal spec")]
    NotDiagonal,
    #[error("quantile {0} outside the supported range (0.9, 1)")]
    QuantileOutOfRange(f64),
    #[error("block length must be at least 2, got {0}")]
    BlockTooShort(usize),
    #[error("no exceedances above the threshold {0}")]
    ZeroExceedances(f64),
    #[error("every one of the {blocks} blocks of length {block_len} contains an exceedance; raise the quantile or shorten the blocks")]
    SaturatedBlocks { blocks: usize, block_len: usize },
    #[error("marginal index {i} out of range for dimension {d}")]
    MarginalOutOfRange { i: usize, d: usize },
    #[error("dimension mismatch: vector has {got} entries, scale has {expect}")]
    ScaleMismatch { got: usize, expect: usize },
}

/// Per-marginal scaling for the pseudo-norm: tail indices and tail-scale
/// constants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VsrvScale {
    pub alpha: Vec<f64>,
    pub c: Vec<f64>,
}

impl VsrvScale {
    pub fn new(alpha: Vec<f64>, c: Vec<f64>) -> Self {
        assert_eq!(alpha.len(), c.len(), "alpha and c must have equal length");
        assert!(alpha.iter().all(|&a| a > 0.0), "tail indices must be positive");
        assert!(c.iter().all(|&v| v > 0.0), "scale constants must be positive");
        Self { alpha, c }
    }

    /// Unit constants: `c_i = 1` for all marginals.
    pub fn with_unit_constants(alpha: Vec<f64>) -> Self {
        let c = vec![1.0; alpha.len()];
        Self::new(alpha, c)
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }
}

/// The componentwise-scaled pseudo-norm `max_i c_i^{-1} |x_i|^{alpha_i}`.
pub fn vsrv_norm(x: &[f64], scale: &VsrvScale) -> Result<f64, ExtremesError> {
    if x.len() != scale.dim() {
        return Err(ExtremesError::ScaleMismatch {
            got: x.len(),
            expect: scale.dim(),
        });
    }
    let mut best = 0.0f64;
    for ((xi, ai), ci) in x.iter().zip(&scale.alpha).zip(&scale.c) {
        best = best.max(xi.abs().powf(*ai) / ci);
    }
    Ok(best)
}

/// Spectral-measure estimates on a grid of angles for one or more threshold
/// counts.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralEstimate {
    /// Ascending angles in `[0, pi/2]`.
    pub theta_grid: Vec<f64>,
    /// Estimated curve per threshold count, aligned with `theta_grid`.
    pub phi: BTreeMap<usize, Vec<f64>>,
    /// Path length the ranks were computed on.
    pub t_len: usize,
    pub k_values: Vec<usize>,
}

/// Uniform grid of `n` angles spanning `[0, pi/2]` inclusive.
pub fn uniform_angle_grid(n: usize) -> Vec<f64> {
    assert!(n >= 2, "angle grid needs at least two points");
    let h = std::f64::consts::FRAC_PI_2 / (n - 1) as f64;
    (0..n).map(|j| j as f64 * h).collect()
}

/// Descending ranks (`1` = largest); exact ties are broken by time index.
fn ranks_desc(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_unstable_by(|&p, &q| {
        values[q]
            .partial_cmp(&values[p])
            .expect("non-finite value in rank computation")
            .then(p.cmp(&q))
    });
    let mut ranks = vec![0usize; values.len()];
    for (pos, &idx) in order.iter().enumerate() {
        ranks[idx] = pos + 1;
    }
    ranks
}

/// Angles of the rank-selected extreme points for one threshold count `k`.
fn selected_angles(r1: &[usize], r2: &[usize], t_len: usize, k: usize) -> Vec<f64> {
    let cut = t_len + 1 - k;
    let mut angles = Vec::new();
    for t in 0..t_len {
        if r1[t].max(r2[t]) >= cut {
            let num = (t_len + 1 - r2[t]) as f64;
            let den = (t_len + 1 - r1[t]) as f64;
            angles.push((num / den).atan());
        }
    }
    angles.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    angles
}

/// Rank-based spectral-measure estimate for a bivariate path at one
/// threshold count, evaluated on the given angle grid.
pub fn spectral_measure(
    path: &PathSample,
    k: usize,
    theta_grid: &[f64],
) -> Result<Vec<f64>, ExtremesError> {
    spectral_estimate(path, &[k], theta_grid).map(|est| est.phi[&k].clone())
}

/// Like [`spectral_measure`] but shares the rank computation across several
/// threshold counts.
pub fn spectral_estimate(
    path: &PathSample,
    k_values: &[usize],
    theta_grid: &[f64],
) -> Result<SpectralEstimate, ExtremesError> {
    if path.dim() != 2 {
        return Err(ExtremesError::NotBivariate(path.dim()));
    }
    let t_len = path.len();
    for &k in k_values {
        if k < 1 || k >= t_len {
            return Err(ExtremesError::KOutOfRange { k, t: t_len });
        }
    }
    debug_assert!(theta_grid.windows(2).all(|w| w[0] <= w[1]));

    let r1 = ranks_desc(&path.marginal(0));
    let r2 = ranks_desc(&path.marginal(1));

    let mut phi = BTreeMap::new();
    for &k in k_values {
        let angles = selected_angles(&r1, &r2, t_len, k);
        let curve: Vec<f64> = theta_grid
            .iter()
            .map(|&theta| angles.partition_point(|&a| a <= theta) as f64 / k as f64)
            .collect();
        phi.insert(k, curve);
    }
    Ok(SpectralEstimate {
        theta_grid: theta_grid.to_vec(),
        phi,
        t_len,
        k_values: k_values.to_vec(),
    })
}

/// Default truncation horizon for the extremal-index Monte Carlo: the
/// running maximum is settled once the random walk `sum log|a m_j|` has
/// drifted far negative, which happens on the scale of `1/|E log|a m||`.
pub fn default_horizon(a: f64) -> usize {
    let drift = (a.abs().ln() + mean_log_abs_normal()).abs().max(1e-3);
    (50.0 / drift).ceil() as usize
}

/// Monte-Carlo estimate of the marginal extremal index of a diagonal spec.
///
/// Per replicate, draws `m_1..m_K` and forms the products
/// `P_k = A_ii^k prod m_j` (`P_0 = 1`), returning the mean of
/// `max_{k>=0}(P_k)_+^alpha - max_{k>=1}(P_k)_+^alpha`, which collapses to
/// `(1 - max_{k>=1}(P_k)_+^alpha)_+`. Signs and magnitudes are tracked in
/// log space so long products neither overflow nor lose the sign.
pub fn extremal_index_mc(
    spec: &ModelSpec,
    i: usize,
    alpha_i: f64,
    horizon: usize,
    reps: usize,
    seed: u64,
) -> Result<(f64, f64), ExtremesError> {
    if !classify(spec).has(ClassLabel::Diagonal) {
        return Err(ExtremesError::NotDiagonal);
    }
    if i >= spec.d() {
        return Err(ExtremesError::MarginalOutOfRange { i, d: spec.d() });
    }
    assert!(horizon >= 1, "horizon must be at least 1");
    assert!(reps >= 2, "need at least two replicates");
    let a = spec.a()[0].get(i, i);
    let ln_abs_a = a.abs().ln();
    let a_negative = a < 0.0;

    let chunk_count = (rayon::current_num_threads() * 4).max(1);
    let per_chunk = reps.div_ceil(chunk_count);
    let partials: Vec<(f64, f64, usize)> = (0..chunk_count)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk as u64);
            let lo = chunk * per_chunk;
            let hi = ((chunk + 1) * per_chunk).min(reps);
            let normal = StandardNormal;
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for _ in lo..hi {
                let mut log_p = 0.0f64;
                let mut negative = false;
                let mut best = 0.0f64; // max over k >= 1 of (P_k)_+^alpha
                for _ in 0..horizon {
                    let m: f64 = normal.sample(&mut rng);
                    log_p += ln_abs_a + m.abs().ln();
                    negative ^= (m < 0.0) ^ a_negative;
                    if !negative {
                        best = best.max((alpha_i * log_p).exp());
                    }
                }
                let stat = (1.0 - best).max(0.0);
                sum += stat;
                sumsq += stat * stat;
            }
            (sum, sumsq, hi - lo)
        })
        .collect();

    let n: usize = partials.iter().map(|p| p.2).sum();
    let sum: f64 = partials.iter().map(|p| p.0).sum();
    let sumsq: f64 = partials.iter().map(|p| p.1).sum();
    let mean = sum / n as f64;
    let var = (sumsq / n as f64 - mean * mean).max(0.0);
    Ok((mean, (var / n as f64).sqrt()))
}

/// Blocks estimator of the extremal index of marginal `i`.
///
/// With `k` complete blocks of length `b`, `N` exceedances of the marginal
/// quantile and `K` blocks containing at least one exceedance, the estimate
/// is
///
/// ```text
/// theta = log(1 - K/k) / (b log(1 - N/n)),
/// ```
///
/// clipped to `(0, 1]`. The log form removes the thinning bias of the raw
/// ratio `K/N`: for independent data the chance a block is hit is
/// `1 - (1-p)^b`, not `b p`, and the raw ratio is badly biased once the
/// expected exceedances per block approach one.
pub fn extremal_index_blocks(
    path: &PathSample,
    i: usize,
    quantile: f64,
    block_len: usize,
) -> Result<f64, ExtremesError> {
    if i >= path.dim() {
        return Err(ExtremesError::MarginalOutOfRange { i, d: path.dim() });
    }
    if !(0.9..1.0).contains(&quantile) {
        return Err(ExtremesError::QuantileOutOfRange(quantile));
    }
    if block_len < 2 {
        return Err(ExtremesError::BlockTooShort(block_len));
    }
    let series = path.marginal(i);
    let n_blocks = series.len() / block_len;
    let n_used = n_blocks * block_len;
    if n_blocks < 2 {
        return Err(ExtremesError::BlockTooShort(block_len));
    }
    let series = &series[..n_used];
    let threshold = empirical_quantile(series, quantile);
    let exceed: Vec<bool> = series.iter().map(|&x| x > threshold).collect();
    let n_exceed = exceed.iter().filter(|&&e| e).count();
    if n_exceed == 0 {
        return Err(ExtremesError::ZeroExceedances(threshold));
    }
    let blocks_hit = exceed
        .chunks_exact(block_len)
        .filter(|block| block.iter().any(|&e| e))
        .count();
    if blocks_hit == n_blocks {
        return Err(ExtremesError::SaturatedBlocks {
            blocks: n_blocks,
            block_len,
        });
    }
    let numer = (1.0 - blocks_hit as f64 / n_blocks as f64).ln();
    let denom = block_len as f64 * (1.0 - n_exceed as f64 / n_used as f64).ln();
    Ok((numer / denom).min(1.0))
}

/// Sizes of exceedance clusters of the pseudo-norm series: exceedances of
/// the `quantile`-level threshold belong to the same cluster while separated
/// by fewer than `gap` non-exceedances. Returns size -> frequency.
pub fn cluster_sizes(
    path: &PathSample,
    scale: &VsrvScale,
    quantile: f64,
    gap: usize,
) -> Result<BTreeMap<usize, usize>, ExtremesError> {
    if !(0.9..1.0).contains(&quantile) {
        return Err(ExtremesError::QuantileOutOfRange(quantile));
    }
    let radii: Vec<f64> = (0..path.len())
        .map(|t| vsrv_norm(path.row(t), scale))
        .collect::<Result<_, _>>()?;
    let threshold = empirical_quantile(&radii, quantile);
    let times: Vec<usize> = radii
        .iter()
        .enumerate()
        .filter_map(|(t, &r)| (r > threshold).then_some(t))
        .collect();
    if times.is_empty() {
        return Err(ExtremesError::ZeroExceedances(threshold));
    }

    let mut hist = BTreeMap::new();
    let mut size = 1usize;
    for w in times.windows(2) {
        // w[1]-w[0]-1 values sit between the exceedances
        if w[1] - w[0] - 1 < gap {
            size += 1;
        } else {
            *hist.entry(size).or_insert(0) += 1;
            size = 1;
        }
    }
    *hist.entry(size).or_insert(0) += 1;
    Ok(hist)
}

/// Type-7 (linear interpolation) empirical quantile.
pub(crate) fn empirical_quantile(values: &[f64], p: f64) -> f64 {
    assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("non-finite value"));
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

/// Extremal-index estimate for one marginal.
#[derive(Debug, Clone, Serialize)]
pub struct MarginalTheta {
    pub marginal: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc: Option<MeanStderr>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blocks: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStderr {
    pub estimate: f64,
    pub stderr: f64,
}

/// Extremal diagnostics report.
#[derive(Debug, Clone, Serialize)]
pub struct ExtremalReport {
    pub theta_marginal: Vec<MarginalTheta>,
    /// Which estimators contributed ("mc-formula", "blocks", or both).
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cluster_size_hist: Option<BTreeMap<usize, usize>>,
    /// Extremal outputs for diagonal specs assume the existence of the
    /// limiting tail process, which is supported by simulation but not
    /// proved; such reports carry this flag.
    pub conjecture_conditional: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Matrix;
    use crate::simulate::{simulate_sre, DEFAULT_BURNIN};
    use crate::tails::solve_coeff;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn diag_spec(entries: &[f64]) -> ModelSpec {
        ModelSpec::new(
            vec![Matrix::from_diag(entries)],
            Matrix::identity(entries.len()),
            None,
        )
        .unwrap()
    }

    #[test]
    fn vsrv_norm_examples() {
        let scale = VsrvScale::new(vec![2.0, 2.0], vec![1.0, 1.0]);
        assert_eq!(vsrv_norm(&[2.0, 0.0], &scale).unwrap(), 4.0);
        assert_eq!(vsrv_norm(&[0.0, 0.0], &scale).unwrap(), 0.0);
    }

    #[test]
    fn vsrv_norm_marginal_homogeneity() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let t = 7.0f64;
        for _ in 0..100 {
            let alpha: Vec<f64> = (0..3).map(|_| rng.random_range(0.3..5.0)).collect();
            let c: Vec<f64> = (0..3).map(|_| rng.random_range(0.2..3.0)).collect();
            let scale = VsrvScale::new(alpha.clone(), c);
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-4.0..4.0)).collect();
            let scaled: Vec<f64> = x
                .iter()
                .zip(&alpha)
                .map(|(xi, ai)| t.powf(1.0 / ai) * xi)
                .collect();
            let lhs = vsrv_norm(&scaled, &scale).unwrap();
            let rhs = t * vsrv_norm(&x, &scale).unwrap();
            assert!(
                (lhs - rhs).abs() <= 1e-12 * rhs.max(1e-12),
                "homogeneity violated: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn vsrv_norm_dimension_mismatch() {
        let scale = VsrvScale::new(vec![2.0], vec![1.0]);
        assert!(matches!(
            vsrv_norm(&[1.0, 2.0], &scale),
            Err(ExtremesError::ScaleMismatch { .. })
        ));
    }

    #[test]
    fn spectral_comonotone_steps_at_quarter_pi() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let rows: Vec<Vec<f64>> = (0..2000)
            .map(|_| {
                let x: f64 = rng.random_range(-1.0..1.0);
                vec![x, x]
            })
            .collect();
        let path = PathSample::from_rows(rows);
        let grid = uniform_angle_grid(101); // includes pi/4 exactly
        let phi = spectral_measure(&path, 200, &grid).unwrap();
        for (theta, value) in grid.iter().zip(&phi) {
            if *theta < std::f64::consts::FRAC_PI_4 {
                assert_eq!(*value, 0.0, "expected 0 below pi/4 at theta={theta}");
            } else {
                assert_eq!(*value, 1.0, "expected 1 from pi/4 on at theta={theta}");
            }
        }
    }

    #[test]
    fn spectral_antimonotone_splits_mass() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let rows: Vec<Vec<f64>> = (0..2000)
            .map(|_| {
                let x: f64 = rng.random_range(-1.0..1.0);
                vec![x, -x]
            })
            .collect();
        let path = PathSample::from_rows(rows);
        let grid = uniform_angle_grid(101);
        let k = 100; // well below T/2 so the two marginal extreme sets are disjoint
        let phi = spectral_measure(&path, k, &grid).unwrap();
        assert!((phi.last().unwrap() - 2.0).abs() < 1e-12);
        // mass concentrates near the axes: nothing in the middle band
        let mid = phi[40..60].to_vec();
        assert!(mid.windows(2).all(|w| w[0] == w[1]), "mass in the middle band");
    }

    #[test]
    fn spectral_monotone_and_bounded_on_simulated_path() {
        let spec = diag_spec(&[solve_coeff(3.0).unwrap(), solve_coeff(4.0).unwrap()]);
        let path = simulate_sre(&spec, 2000, DEFAULT_BURNIN, 34);
        let grid = uniform_angle_grid(100);
        let ks = [100, 200, 300, 400, 500];
        let est = spectral_estimate(&path, &ks, &grid).unwrap();
        for &k in &ks {
            let curve = &est.phi[&k];
            assert!(
                curve.windows(2).all(|w| w[0] <= w[1]),
                "curve not monotone at k={k}"
            );
            let last = *curve.last().unwrap();
            assert!((1.0..=2.0).contains(&last), "Phi(pi/2)={last} at k={k}");
            // the selected-point count is k * Phi(pi/2), between k and 2k
            let count = (last * k as f64).round() as usize;
            assert!((k..=2 * k).contains(&count));
        }
    }

    #[test]
    fn spectral_invariant_under_monotone_marginal_transforms() {
        let spec = diag_spec(&[0.8, 0.5]);
        let path = simulate_sre(&spec, 1500, 1000, 35);
        let grid = uniform_angle_grid(64);
        let base = spectral_measure(&path, 150, &grid).unwrap();

        let rows: Vec<Vec<f64>> = (0..path.len())
            .map(|t| {
                let r = path.row(t);
                // strictly increasing transforms, different per marginal
                vec![r[0].exp(), r[1].powi(3) + 0.1 * r[1]]
            })
            .collect();
        let transformed = PathSample::from_rows(rows);
        let phi = spectral_measure(&transformed, 150, &grid).unwrap();
        assert_eq!(base, phi);
    }

    #[test]
    fn spectral_rejects_non_bivariate() {
        let path = PathSample::from_rows(vec![vec![1.0, 2.0, 3.0]; 10]);
        assert!(matches!(
            spectral_measure(&path, 2, &uniform_angle_grid(4)),
            Err(ExtremesError::NotBivariate(3))
        ));
    }

    #[test]
    fn extremal_mc_near_one_for_tiny_coefficient() {
        let spec = diag_spec(&[0.01, 0.01]);
        // fixed alpha; the estimator itself needs no moment equation
        let (theta, se) = extremal_index_mc(&spec, 0, 3.0, 50, 20_000, 36).unwrap();
        assert!(theta > 0.99, "theta {theta} +- {se}");
        assert!(theta <= 1.0 + 1e-12);
    }

    #[test]
    fn extremal_mc_in_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..5 {
            let a = rng.random_range(0.1..1.4);
            let alpha = rng.random_range(0.5..5.0);
            let spec = diag_spec(&[a, a]);
            let (theta, _) =
                extremal_index_mc(&spec, 0, alpha, default_horizon(a), 20_000, 38).unwrap();
            assert!(theta > 0.0 && theta <= 1.0, "theta {theta} for a={a}, alpha={alpha}");
        }
    }

    #[test]
    fn extremal_mc_monotone_in_coefficient() {
        let alpha = 3.0;
        let mut prev = (f64::INFINITY, 0.0);
        for &a in &[0.1, 0.3, 0.5] {
            let spec = diag_spec(&[a, a]);
            let (theta, se) =
                extremal_index_mc(&spec, 0, alpha, default_horizon(a), 400_000, 39).unwrap();
            assert!(
                theta < prev.0 - 3.0 * (se + prev.1),
                "not monotone at a={a}: {theta} vs {}",
                prev.0
            );
            prev = (theta, se);
        }
    }

    #[test]
    fn extremal_mc_rejects_non_diagonal() {
        let a = Matrix::from_rows(vec![vec![0.5, 0.2], vec![0.0, 0.4]]).unwrap();
        let spec = ModelSpec::new(vec![a], Matrix::identity(2), None).unwrap();
        assert!(matches!(
            extremal_index_mc(&spec, 0, 3.0, 10, 10, 0),
            Err(ExtremesError::NotDiagonal)
        ));
    }

    #[test]
    fn blocks_estimator_near_one_for_iid() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let rows: Vec<Vec<f64>> = (0..200_000)
            .map(|_| vec![rng.sample::<f64, _>(StandardNormal)])
            .collect();
        let path = PathSample::from_rows(rows);
        let theta = extremal_index_blocks(&path, 0, 0.99, 100).unwrap();
        assert!((theta - 1.0).abs() < 0.1, "iid theta {theta}");
    }

    #[test]
    fn blocks_estimator_on_constant_clusters() {
        // every exceedance arrives as a run of length r, runs well separated:
        // theta = 1/r
        let r = 4;
        let block = 100;
        let blocks = 2000;
        let mut rows = vec![vec![0.0]; block * blocks];
        for b in (0..blocks).step_by(20) {
            for j in 0..r {
                rows[b * block + 10 + j][0] = 100.0 + b as f64;
            }
        }
        let path = PathSample::from_rows(rows);
        // 400 spikes in 200_000 points sit far above the 0.99 quantile
        let theta = extremal_index_blocks(&path, 0, 0.99, block).unwrap();
        assert!(
            (theta - 1.0 / r as f64).abs() < 0.02,
            "theta {theta} vs {}",
            1.0 / r as f64
        );
    }

    #[test]
    fn blocks_agrees_with_mc_formula() {
        let alpha = 3.0;
        let a = solve_coeff(alpha).unwrap();
        let spec = diag_spec(&[a, a]);
        let (mc, _) =
            extremal_index_mc(&spec, 0, alpha, default_horizon(a), 400_000, 41).unwrap();
        let path = simulate_sre(&spec, 400_000, DEFAULT_BURNIN, 42);
        let blocks = extremal_index_blocks(&path, 0, 0.995, 200).unwrap();
        assert!(
            (mc - blocks).abs() < 0.1,
            "mc {mc} vs blocks {blocks} disagree beyond 0.1"
        );
    }

    #[test]
    fn blocks_validates_inputs() {
        let path = PathSample::from_rows(vec![vec![1.0]; 100]);
        assert!(matches!(
            extremal_index_blocks(&path, 0, 0.5, 10),
            Err(ExtremesError::QuantileOutOfRange(_))
        ));
        assert!(matches!(
            extremal_index_blocks(&path, 0, 0.95, 1),
            Err(ExtremesError::BlockTooShort(_))
        ));
        // constant series: nothing exceeds the quantile strictly
        assert!(matches!(
            extremal_index_blocks(&path, 0, 0.95, 10),
            Err(ExtremesError::ZeroExceedances(_))
        ));
    }

    #[test]
    fn cluster_sizes_iid_mean_near_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let rows: Vec<Vec<f64>> = (0..100_000)
            .map(|_| vec![rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)])
            .collect();
        let path = PathSample::from_rows(rows);
        let scale = VsrvScale::with_unit_constants(vec![1.0, 1.0]);
        let hist = cluster_sizes(&path, &scale, 0.995, 1).unwrap();
        let total: usize = hist.iter().map(|(s, n)| s * n).sum();
        let clusters: usize = hist.values().sum();
        let mean_size = total as f64 / clusters as f64;
        assert!((mean_size - 1.0).abs() < 0.1, "mean cluster size {mean_size}");
    }

    #[test]
    fn cluster_sizes_duality_with_blocks_estimator() {
        let a = solve_coeff(3.0).unwrap();
        let spec = diag_spec(&[a, a]);
        let path = simulate_sre(&spec, 400_000, DEFAULT_BURNIN, 44);
        let scale = VsrvScale::with_unit_constants(vec![3.0, 3.0]);

        let hist = cluster_sizes(&path, &scale, 0.995, 2).unwrap();
        let total: usize = hist.iter().map(|(s, n)| s * n).sum();
        let clusters: usize = hist.values().sum();
        let mean_size = total as f64 / clusters as f64;

        // mean cluster size ~ 1/theta, with theta estimated on the norm
        // series itself by the blocks method
        let radii: Vec<Vec<f64>> = (0..path.len())
            .map(|t| vec![vsrv_norm(path.row(t), &scale).unwrap()])
            .collect();
        let norm_path = PathSample::from_rows(radii);
        let theta = extremal_index_blocks(&norm_path, 0, 0.995, 200).unwrap();
        let ratio = mean_size * theta;
        assert!(
            (0.8..=1.2).contains(&ratio),
            "duality violated: mean size {mean_size}, theta {theta}"
        );
    }

    #[test]
    fn cluster_sizes_errors_without_exceedances() {
        let path = PathSample::from_rows(vec![vec![1.0, 1.0]; 50]);
        let scale = VsrvScale::with_unit_constants(vec![1.0, 1.0]);
        assert!(matches!(
            cluster_sizes(&path, &scale, 0.95, 2),
            Err(ExtremesError::ZeroExceedances(_))
        ));
    }
}
