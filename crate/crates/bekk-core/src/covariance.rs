//! Sample covariance matrices and heavy-tail diagnostics for their entries.
//!
//! The uncentered sample covariance `(1/T) sum X_t X_t'` of a heavy-tailed
//! path converges, but its fluctuations around the limit scale like
//! `n^{-min(1/2, 1 - 1/alpha_ij)}`, where `alpha_ij = alpha_i alpha_j /
//! (alpha_i + alpha_j)` is the tail index of the cross product `X_i X_j`.
//! Entries with `alpha_ij < 2` have infinite-variance fluctuations, so the
//! spread across replicates is measured by the interquartile range rather
//! than a variance, and the decay exponent is recovered by regressing
//! `log IQR` on `log n`.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::extremes::empirical_quantile;
use crate::model::ModelSpec;
use crate::numerics::Matrix;
use crate::simulate::{PathSample, SreStepper};
use crate::tails::{alpha_cross, hill_from_values, TailError, TailProfile};

#[derive(Debug, Error)]
pub enum CovarianceError {
    #[error("fluctuation scan needs at least two grid points for a regression")]
    RegressionImpossible,
    #[error("grid length {0} is below the minimum 1000")]
    GridTooSmall(usize),
    #[error("fluctuation scan needs at least 50 replicates, got {0}")]
    TooFewReplicates(usize),
    #[error("replicate spread is degenerate for entry ({i},{j}) at n={n}")]
    DegenerateSpread { i: usize, j: usize, n: usize },
    #[error("tail profile has {got} indices but the path dimension is {expect}")]
    ProfileMismatch { got: usize, expect: usize },
    #[error(transparent)]
    Tail(#[from] TailError),
}

/// Uncentered sample covariance `(1/T) sum X_t X_t'` (the process has mean
/// zero, so no centering term).
pub fn sample_cov(path: &PathSample) -> Matrix {
    assert!(path.len() >= 1, "sample covariance needs at least one row");
    let d = path.dim();
    let mut acc = Matrix::zeros(d, d);
    for t in 0..path.len() {
        let row = path.row(t);
        for i in 0..d {
            for j in 0..d {
                acc.set(i, j, acc.get(i, j) + row[i] * row[j]);
            }
        }
    }
    acc.scaled(1.0 / path.len() as f64)
}

/// One cross-product tail comparison: predicted index vs Hill estimate on
/// `|X_i X_j|`.
#[derive(Debug, Clone, Serialize)]
pub struct CrossTailEntry {
    pub i: usize,
    pub j: usize,
    pub predicted: f64,
    pub empirical: f64,
    pub within_band: bool,
}

/// Cross-product tail report for all pairs `i <= j`.
#[derive(Debug, Clone, Serialize)]
pub struct CrossTailReport {
    pub entries: Vec<CrossTailEntry>,
    pub k: usize,
    pub band: f64,
}

/// Hill-estimates the tail index of every cross product `|X_i X_j|` and
/// compares it to the predicted `alpha_i alpha_j / (alpha_i + alpha_j)`.
pub fn cross_tail_check(
    path: &PathSample,
    profile: &TailProfile,
    k: usize,
    band: f64,
) -> Result<CrossTailReport, CovarianceError> {
    let d = path.dim();
    if profile.alpha.len() != d {
        return Err(CovarianceError::ProfileMismatch {
            got: profile.alpha.len(),
            expect: d,
        });
    }
    let mut entries = Vec::new();
    for i in 0..d {
        for j in i..d {
            let predicted = alpha_cross(profile.alpha[i], profile.alpha[j]);
            let products: Vec<f64> = (0..path.len())
                .map(|t| path.value(t, i) * path.value(t, j))
                .collect();
            let empirical = hill_from_values(&products, k)?;
            entries.push(CrossTailEntry {
                i,
                j,
                predicted,
                empirical,
                within_band: (empirical - predicted).abs() <= band,
            });
        }
    }
    Ok(CrossTailReport { entries, k, band })
}

/// Fluctuation measurement at one path length: per-pair interquartile range
/// across replicates.
#[derive(Debug, Clone, Serialize)]
pub struct FluctuationPoint {
    pub n: usize,
    /// Row-major `d x d` IQR values (symmetric).
    pub iqr: Vec<f64>,
}

/// Per-pair regression slope with the rate predicted from the tail profile.
#[derive(Debug, Clone, Serialize)]
pub struct PairSlope {
    pub i: usize,
    pub j: usize,
    pub slope: f64,
    /// `-min(1/2, 1 - 1/alpha_ij)`: the tail-driven decay exponent of the
    /// covariance-entry spread (negative of a growth exponent when
    /// `alpha_ij < 1`).
    pub predicted: f64,
}

/// Fluctuation-scan result.
#[derive(Debug, Clone, Serialize)]
pub struct FluctuationScan {
    pub slopes: Vec<PairSlope>,
    pub points: Vec<FluctuationPoint>,
    pub reps: usize,
}

/// Measures how the spread of sample-covariance entries decays with the path
/// length and compares the decay exponent to the tail-index prediction.
///
/// For each `n` in the grid, simulates `reps` independent paths, computes the
/// IQR of each covariance entry across replicates, and regresses `log IQR`
/// on `log n`.
pub fn fluctuation_scan(
    spec: &ModelSpec,
    profile: &TailProfile,
    n_grid: &[usize],
    reps: usize,
    burnin: usize,
    seed: u64,
) -> Result<FluctuationScan, CovarianceError> {
    if n_grid.len() < 2 {
        return Err(CovarianceError::RegressionImpossible);
    }
    if let Some(&n) = n_grid.iter().find(|&&n| n < 1000) {
        return Err(CovarianceError::GridTooSmall(n));
    }
    if reps < 50 {
        return Err(CovarianceError::TooFewReplicates(reps));
    }
    let d = spec.d();
    if profile.alpha.len() != d {
        return Err(CovarianceError::ProfileMismatch {
            got: profile.alpha.len(),
            expect: d,
        });
    }

    let mut points = Vec::with_capacity(n_grid.len());
    for (n_idx, &n) in n_grid.iter().enumerate() {
        // replicate streams derive from a global counter so scheduling
        // cannot change results
        let gammas: Vec<Matrix> = (0..reps)
            .into_par_iter()
            .map(|rep| {
                let stream = (n_idx * reps + rep) as u64;
                streamed_sample_cov(spec, n, burnin, seed, stream)
            })
            .collect();

        let mut iqr = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let values: Vec<f64> = gammas.iter().map(|g| g.get(i, j)).collect();
                let spread =
                    empirical_quantile(&values, 0.75) - empirical_quantile(&values, 0.25);
                if spread <= 0.0 {
                    return Err(CovarianceError::DegenerateSpread { i, j, n });
                }
                iqr[i * d + j] = spread;
            }
        }
        points.push(FluctuationPoint { n, iqr });
    }

    let mut slopes = Vec::new();
    for i in 0..d {
        for j in i..d {
            let xs: Vec<f64> = points.iter().map(|p| (p.n as f64).ln()).collect();
            let ys: Vec<f64> = points.iter().map(|p| p.iqr[i * d + j].ln()).collect();
            let slope = least_squares_slope(&xs, &ys);
            let aij = alpha_cross(profile.alpha[i], profile.alpha[j]);
            let predicted = -(0.5f64).min(1.0 - 1.0 / aij);
            slopes.push(PairSlope {
                i,
                j,
                slope,
                predicted,
            });
        }
    }
    Ok(FluctuationScan {
        slopes,
        points,
        reps,
    })
}

/// Simulates one path and accumulates its covariance without materializing
/// the path.
fn streamed_sample_cov(
    spec: &ModelSpec,
    n: usize,
    burnin: usize,
    seed: u64,
    stream: u64,
) -> Matrix {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut stepper = SreStepper::new(spec);
    let d = spec.d();
    for _ in 0..burnin {
        stepper.step(&mut rng);
    }
    let mut acc = Matrix::zeros(d, d);
    for _ in 0..n {
        stepper.step(&mut rng);
        let x = stepper.state();
        for i in 0..d {
            for j in 0..d {
                acc.set(i, j, acc.get(i, j) + x[i] * x[j]);
            }
        }
    }
    acc.scaled(1.0 / n as f64)
}

pub(crate) fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

/// Full covariance diagnostics for a path and tail profile.
#[derive(Debug, Clone, Serialize)]
pub struct CovReport {
    pub gamma: Matrix,
    /// `d x d` predicted cross-product tail indices (diagonal is
    /// `alpha_i / 2`).
    pub alpha_cross_pred: Matrix,
    /// `d x d` Hill estimates on `|X_i X_j|`.
    pub alpha_cross_emp: Matrix,
    pub hill_k: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fluctuation: Option<FluctuationScan>,
}

/// Assembles the covariance report: sample covariance, predicted and
/// empirical cross-product tail indices, and optionally the fluctuation
/// scan.
pub fn cov_report(
    path: &PathSample,
    profile: &TailProfile,
    k: usize,
    band: f64,
    fluctuation: Option<FluctuationScan>,
) -> Result<CovReport, CovarianceError> {
    let d = path.dim();
    let cross = cross_tail_check(path, profile, k, band)?;
    let mut pred = Matrix::zeros(d, d);
    let mut emp = Matrix::zeros(d, d);
    for e in &cross.entries {
        pred.set(e.i, e.j, e.predicted);
        pred.set(e.j, e.i, e.predicted);
        emp.set(e.i, e.j, e.empirical);
        emp.set(e.j, e.i, e.empirical);
    }
    Ok(CovReport {
        gamma: sample_cov(path),
        alpha_cross_pred: pred,
        alpha_cross_emp: emp,
        hill_k: k,
        fluctuation,
    })
}
