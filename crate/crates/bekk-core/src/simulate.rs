//! Path generation in both model representations, plus the multiplicative
//! tail chain.
//!
//! Both simulators start from `X_0 = 0` and discard a burn-in segment; the
//! chain forgets its initial point at a geometric rate, so the retained
//! segment is approximately stationary. Supercritical specs blow up instead
//! of mixing — that outcome is reported through a divergence flag rather than
//! an error, with the step at which the overflow guard tripped.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CoefficientSampler, ModelSpec};
use crate::numerics::{cholesky, norm_inf};

/// Max-norm threshold beyond which a path is declared divergent. Triggers
/// well before floating-point overflow can corrupt downstream arithmetic.
pub const DIVERGENCE_THRESHOLD: f64 = 1e300;

/// Default number of warm-up steps discarded before the retained segment.
pub const DEFAULT_BURNIN: usize = 10_000;

#[derive(Debug, Error)]
pub enum SimulateError {
    #[error("autoregressive term is not supported by this operation")]
    AutoregressiveUnsupported,
    #[error("conditional covariance failed to factor at step {step}: {source}")]
    ConditionalFactorization {
        step: usize,
        #[source]
        source: crate::numerics::NumericsError,
    },
    #[error("path must contain at least one step")]
    EmptyPath,
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Csv {
        path: String,
        line: usize,
        message: String,
    },
}

/// A realized `T x d` path plus the metadata that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    data: Vec<f64>,
    d: usize,
    pub seed: u64,
    pub burnin: usize,
    pub spec_digest: String,
    pub diverged: bool,
    /// Global step index (burn-in included) at which the divergence guard
    /// tripped, when it did.
    pub divergence_step: Option<usize>,
}

/// Sidecar metadata written next to a path CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathMetadata {
    pub seed: u64,
    pub burnin: usize,
    pub spec_digest: String,
    pub diverged: bool,
    pub divergence_step: Option<usize>,
    pub t_retained: usize,
    pub dim: usize,
}

impl PathSample {
    /// Number of retained steps.
    #[inline]
    pub fn len(&self) -> usize {
        if self.d == 0 {
            0
        } else {
            self.data.len() / self.d
        }
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.d..(t + 1) * self.d]
    }

    #[inline]
    pub fn value(&self, t: usize, i: usize) -> f64 {
        self.data[t * self.d + i]
    }

    /// Copy of marginal `i`.
    pub fn marginal(&self, i: usize) -> Vec<f64> {
        assert!(i < self.d, "marginal index {i} out of range for d={}", self.d);
        (0..self.len()).map(|t| self.value(t, i)).collect()
    }

    pub fn metadata(&self) -> PathMetadata {
        PathMetadata {
            seed: self.seed,
            burnin: self.burnin,
            spec_digest: self.spec_digest.clone(),
            diverged: self.diverged,
            divergence_step: self.divergence_step,
            t_retained: self.len(),
            dim: self.d,
        }
    }

    /// Writes the path as CSV (`t,x1,...,xd`) and a JSON metadata sidecar at
    /// `<path>.meta.json`. Values use the shortest round-trip formatting, so
    /// a rerun with the same inputs is byte-identical.
    pub fn write_csv(&self, path: &Path) -> Result<(), SimulateError> {
        let io_err = |source| SimulateError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut out = Vec::with_capacity(self.data.len() * 20);
        write!(out, "t").map_err(io_err)?;
        for i in 1..=self.d {
            write!(out, ",x{i}").map_err(io_err)?;
        }
        writeln!(out).map_err(io_err)?;
        for t in 0..self.len() {
            write!(out, "{t}").map_err(io_err)?;
            for v in self.row(t) {
                write!(out, ",{v}").map_err(io_err)?;
            }
            writeln!(out).map_err(io_err)?;
        }
        std::fs::write(path, out).map_err(io_err)?;

        let mut meta = serde_json::to_string_pretty(&self.metadata())
            .expect("metadata serialization cannot fail");
        meta.push('\n');
        std::fs::write(sidecar_path(path), meta).map_err(io_err)
    }

    /// Reads a path CSV written by [`PathSample::write_csv`] (or any CSV with
    /// a `t,x1,...,xd` header). The sidecar is used when present; otherwise
    /// the metadata fields are defaulted.
    pub fn read_csv(path: &Path) -> Result<Self, SimulateError> {
        let file = std::fs::File::open(path).map_err(|source| SimulateError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let reader = BufReader::new(file);
        let mut lines = reader.lines().enumerate();

        let header = match lines.next() {
            Some((_, Ok(line))) => line,
            Some((_, Err(source))) => {
                return Err(SimulateError::Io {
                    path: path.display().to_string(),
                    source,
                })
            }
            None => {
                return Err(SimulateError::Csv {
                    path: path.display().to_string(),
                    line: 1,
                    message: "empty file".into(),
                })
            }
        };
        let cols: Vec<&str> = header.split(',').collect();
        if cols.first() != Some(&"t") || cols.len() < 2 {
            return Err(SimulateError::Csv {
                path: path.display().to_string(),
                line: 1,
                message: format!("expected header t,x1,...,xd, got {header:?}"),
            });
        }
        let d = cols.len() - 1;

        let mut data = Vec::new();
        for (idx, line) in lines {
            let line = line.map_err(|source| SimulateError::Io {
                path: path.display().to_string(),
                source,
            })?;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != d + 1 {
                return Err(SimulateError::Csv {
                    path: path.display().to_string(),
                    line: idx + 1,
                    message: format!("expected {} fields, got {}", d + 1, fields.len()),
                });
            }
            for field in &fields[1..] {
                let v: f64 = field.parse().map_err(|e| SimulateError::Csv {
                    path: path.display().to_string(),
                    line: idx + 1,
                    message: format!("bad number {field:?}: {e}"),
                })?;
                data.push(v);
            }
        }
        if data.is_empty() {
            return Err(SimulateError::EmptyPath);
        }

        let meta: Option<PathMetadata> = std::fs::read_to_string(sidecar_path(path))
            .ok()
            .and_then(|text| serde_json::from_str(&text).ok());
        let meta = meta.unwrap_or(PathMetadata {
            seed: 0,
            burnin: 0,
            spec_digest: String::new(),
            diverged: false,
            divergence_step: None,
            t_retained: data.len() / d,
            dim: d,
        });
        Ok(PathSample {
            data,
            d,
            seed: meta.seed,
            burnin: meta.burnin,
            spec_digest: meta.spec_digest,
            diverged: meta.diverged,
            divergence_step: meta.divergence_step,
        })
    }

    /// Builds a sample from raw rows; test and synthetic-data helper.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let d = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * d);
        for row in rows {
            assert_eq!(row.len(), d, "ragged rows");
            data.extend_from_slice(&row);
        }
        PathSample {
            data,
            d,
            seed: 0,
            burnin: 0,
            spec_digest: String::new(),
            diverged: false,
            divergence_step: None,
        }
    }
}

pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    path.with_file_name(name)
}

/// Streaming stepper for the random-coefficient recursion
/// `X_t = M_t X_{t-1} + Q_t`.
pub(crate) struct SreStepper {
    sampler: CoefficientSampler,
    x: Vec<f64>,
    /// Last coefficient scalars, for routines that need the transition.
    pub last_m: Vec<f64>,
}

impl SreStepper {
    pub fn new(spec: &ModelSpec) -> Self {
        Self {
            sampler: CoefficientSampler::new(spec),
            x: vec![0.0; spec.d()],
            last_m: Vec::new(),
        }
    }

    #[inline]
    pub fn state(&self) -> &[f64] {
        &self.x
    }

    /// Advances one step; returns `false` when the divergence guard trips.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        let draw = self.sampler.draw(rng);
        let mut next = draw.mtilde.mul_vec(&self.x);
        for (n, q) in next.iter_mut().zip(&draw.q) {
            *n += q;
        }
        self.last_m = draw.m;
        self.x = next;
        norm_inf(&self.x) <= DIVERGENCE_THRESHOLD
    }
}

/// Simulates the recursion `X_t = M_t X_{t-1} + Q_t` from `X_0 = 0`,
/// discarding `burnin` steps and retaining `t_len` steps.
pub fn simulate_sre(spec: &ModelSpec, t_len: usize, burnin: usize, seed: u64) -> PathSample {
    assert!(t_len >= 1, "t_len must be at least 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stepper = SreStepper::new(spec);
    let d = spec.d();
    let mut data = Vec::with_capacity(t_len * d);
    let mut diverged = false;
    let mut divergence_step = None;

    'run: {
        for step in 0..burnin {
            if !stepper.step(&mut rng) {
                diverged = true;
                divergence_step = Some(step + 1);
                break 'run;
            }
        }
        for step in 0..t_len {
            if !stepper.step(&mut rng) {
                diverged = true;
                divergence_step = Some(burnin + step + 1);
                break 'run;
            }
            data.extend_from_slice(stepper.state());
        }
    }

    PathSample {
        data,
        d,
        seed,
        burnin,
        spec_digest: spec.digest(),
        diverged,
        divergence_step,
    }
}

/// Simulates through the conditional-covariance representation: assembles
/// `H_t = C + sum_i A_i X_{t-1} X_{t-1}' A_i'`, factors it, and sets
/// `X_t = L_t Z_t` with `Z_t` standard normal. Distributionally equivalent to
/// [`simulate_sre`]; used as the independent cross-check.
pub fn simulate_h_form(
    spec: &ModelSpec,
    t_len: usize,
    burnin: usize,
    seed: u64,
) -> Result<PathSample, SimulateError> {
    assert!(t_len >= 1, "t_len must be at least 1");
    if spec.a0().is_some() {
        return Err(SimulateError::AutoregressiveUnsupported);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = spec.d();
    let mut x = vec![0.0; d];
    let mut data = Vec::with_capacity(t_len * d);
    let mut diverged = false;
    let mut divergence_step = None;

    let step_once = |x: &mut Vec<f64>, rng: &mut ChaCha8Rng, step: usize| {
        let mut h = spec.c().clone();
        for a in spec.a() {
            let w = a.mul_vec(x);
            for i in 0..d {
                for j in 0..d {
                    h.set(i, j, h.get(i, j) + w[i] * w[j]);
                }
            }
        }
        let l = cholesky(&h)
            .map_err(|source| SimulateError::ConditionalFactorization { step, source })?;
        let z: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        *x = l.mul_vec(&z);
        Ok::<bool, SimulateError>(norm_inf(x) <= DIVERGENCE_THRESHOLD)
    };

    'run: {
        for step in 0..burnin {
            if !step_once(&mut x, &mut rng, step + 1)? {
                diverged = true;
                divergence_step = Some(step + 1);
                break 'run;
            }
        }
        for step in 0..t_len {
            if !step_once(&mut x, &mut rng, burnin + step + 1)? {
                diverged = true;
                divergence_step = Some(burnin + step + 1);
                break 'run;
            }
            data.extend_from_slice(&x);
        }
    }

    Ok(PathSample {
        data,
        d,
        seed,
        burnin,
        spec_digest: spec.digest(),
        diverged,
        divergence_step,
    })
}

/// A simulated forward tail chain `Y_{k+1} = M_{k+1} Y_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TailChainSample {
    data: Vec<f64>,
    d: usize,
    pub y0: Vec<f64>,
}

impl TailChainSample {
    #[inline]
    pub fn len(&self) -> usize {
        if self.d == 0 {
            0
        } else {
            self.data.len() / self.d
        }
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.d..(k + 1) * self.d]
    }
}

/// Simulates `k_len` states of the multiplicative tail chain starting from
/// `y0` (row 0 is `y0` itself). The chain has no additive noise: each step is
/// one multiplication by a fresh random coefficient matrix.
pub fn simulate_tail_chain(
    spec: &ModelSpec,
    y0: &[f64],
    k_len: usize,
    seed: u64,
) -> Result<TailChainSample, SimulateError> {
    if spec.a0().is_some() {
        return Err(SimulateError::AutoregressiveUnsupported);
    }
    assert_eq!(y0.len(), spec.d(), "y0 dimension mismatch");
    assert!(k_len >= 1, "k_len must be at least 1");
    let sampler = CoefficientSampler::new(spec);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = spec.d();
    let mut data = Vec::with_capacity(k_len * d);
    let mut y = y0.to_vec();
    data.extend_from_slice(&y);
    for _ in 1..k_len {
        let m = sampler.draw_mtilde(&mut rng);
        y = m.mul_vec(&y);
        data.extend_from_slice(&y);
    }
    Ok(TailChainSample {
        data,
        d,
        y0: y0.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelSpec;
    use crate::numerics::Matrix;

    fn diag_spec(entries: &[f64]) -> ModelSpec {
        ModelSpec::new(
            vec![Matrix::from_diag(entries)],
            Matrix::identity(entries.len()),
            None,
        )
        .unwrap()
    }

    fn zero_spec(d: usize) -> ModelSpec {
        ModelSpec::new(vec![Matrix::zeros(d, d)], Matrix::identity(d), None).unwrap()
    }

    #[test]
    fn zero_coefficient_gives_iid_noise() {
        let spec = zero_spec(2);
        let t_len = 200_000;
        let path = simulate_sre(&spec, t_len, 100, 1);
        assert!(!path.diverged);
        for i in 0..2 {
            let xs = path.marginal(i);
            let mean = xs.iter().sum::<f64>() / t_len as f64;
            let bound = 4.0 / (t_len as f64).sqrt();
            assert!(mean.abs() < bound, "mean {mean} exceeds {bound}");
            let var = xs.iter().map(|x| x * x).sum::<f64>() / t_len as f64;
            assert!((var - 1.0).abs() < 0.05, "variance {var} not near 1");
        }
    }

    #[test]
    fn diagonal_spec_matches_fixed_point_variance() {
        let spec = diag_spec(&[0.5, 0.6]);
        let t_len = 200_000;
        let path = simulate_sre(&spec, t_len, DEFAULT_BURNIN, 2);
        assert!(!path.diverged);
        // Var(X_i) = C_ii / (1 - a_i^2) for the single-term diagonal model
        let expect = [1.0 / (1.0 - 0.25), 1.0 / (1.0 - 0.36)];
        for i in 0..2 {
            let xs = path.marginal(i);
            let var = xs.iter().map(|x| x * x).sum::<f64>() / t_len as f64;
            assert!(
                (var - expect[i]).abs() / expect[i] < 0.05,
                "marginal {i}: variance {var} vs expected {}",
                expect[i]
            );
        }
    }

    #[test]
    fn supercritical_spec_raises_divergence_flag() {
        // spectral radius 2.0 exceeds the stationarity gate
        let spec = diag_spec(&[2.0, 2.0]);
        let path = simulate_sre(&spec, 10_000, DEFAULT_BURNIN, 3);
        assert!(path.diverged);
        assert!(path.divergence_step.is_some());
    }

    #[test]
    fn determinism_bit_identical() {
        let spec = diag_spec(&[0.5, 0.6]);
        let a = simulate_sre(&spec, 1000, 100, 42);
        let b = simulate_sre(&spec, 1000, 100, 42);
        assert_eq!(a, b);
        let c = simulate_sre(&spec, 1000, 100, 43);
        assert_ne!(a, c);
    }

    #[test]
    fn h_form_zero_coefficient_gives_iid_noise() {
        let spec = zero_spec(2);
        let t_len = 100_000;
        let path = simulate_h_form(&spec, t_len, 10, 4).unwrap();
        for i in 0..2 {
            let xs = path.marginal(i);
            let var = xs.iter().map(|x| x * x).sum::<f64>() / t_len as f64;
            assert!((var - 1.0).abs() < 0.05);
        }
    }

    #[test]
    fn h_form_scalar_matches_fixed_point() {
        // A = 0.5 I so the squared coefficient is 0.25; Var = 1/(1-0.25)
        let spec = ModelSpec::new(
            vec![Matrix::identity(2).scaled(0.5)],
            Matrix::identity(2),
            None,
        )
        .unwrap();
        let t_len = 200_000;
        let path = simulate_h_form(&spec, t_len, DEFAULT_BURNIN, 5).unwrap();
        for i in 0..2 {
            let xs = path.marginal(i);
            let var = xs.iter().map(|x| x * x).sum::<f64>() / t_len as f64;
            let expect = 1.0 / (1.0 - 0.25);
            assert!(
                (var - expect).abs() / expect < 0.05,
                "variance {var} vs {expect}"
            );
        }
    }

    #[test]
    fn h_form_univariate_arch_moment() {
        // d = 1: H = C + a X^2 with a = A^2 = 0.5; E[X^2] = C/(1-a) = 2
        let spec = ModelSpec::new(
            vec![Matrix::new(1, 1, vec![0.5f64.sqrt()]).unwrap()],
            Matrix::new(1, 1, vec![1.0]).unwrap(),
            None,
        )
        .unwrap();
        let t_len = 200_000;
        let path = simulate_h_form(&spec, t_len, DEFAULT_BURNIN, 6).unwrap();
        let xs = path.marginal(0);
        let m2 = xs.iter().map(|x| x * x).sum::<f64>() / t_len as f64;
        assert!((m2 - 2.0).abs() / 2.0 < 0.05, "second moment {m2} vs 2.0");
    }

    #[test]
    fn h_form_rejects_autoregressive() {
        let spec = ModelSpec::new(
            vec![Matrix::from_diag(&[0.5, 0.5])],
            Matrix::identity(2),
            Some(Matrix::from_diag(&[0.1, 0.1])),
        )
        .unwrap();
        assert!(matches!(
            simulate_h_form(&spec, 10, 0, 0),
            Err(SimulateError::AutoregressiveUnsupported)
        ));
    }

    #[test]
    fn simulators_agree_on_first_two_moments() {
        let spec = diag_spec(&[0.5, 0.6]);
        let t_len = 200_000;
        let a = simulate_sre(&spec, t_len, DEFAULT_BURNIN, 7);
        let b = simulate_h_form(&spec, t_len, DEFAULT_BURNIN, 8).unwrap();
        for i in 0..2 {
            let (xa, xb) = (a.marginal(i), b.marginal(i));
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            let m2 = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64;
            // relative standard error of the second moment is a few tenths of
            // a percent at this length; 5 of them is a generous band
            let tol = 5.0 * 0.01;
            assert!((mean(&xa) - mean(&xb)).abs() < 0.05);
            assert!((m2(&xa) - m2(&xb)).abs() / m2(&xb) < tol);
        }
    }

    #[test]
    fn tail_chain_zero_start_stays_zero() {
        let spec = diag_spec(&[0.5, 0.6]);
        let chain = simulate_tail_chain(&spec, &[0.0, 0.0], 10, 1).unwrap();
        assert!(chain.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn tail_chain_diagonal_ratio_is_deterministic() {
        // common scalar draws cancel in the componentwise ratio
        let spec = diag_spec(&[0.8, 0.4]);
        let chain = simulate_tail_chain(&spec, &[1.0, 1.0], 12, 2).unwrap();
        for k in 0..chain.len() {
            let row = chain.row(k);
            let expect = (0.8f64 / 0.4).powi(k as i32);
            assert!(
                (row[0] / row[1] - expect).abs() < 1e-9 * expect.abs(),
                "ratio at step {k}"
            );
        }
    }

    #[test]
    fn tail_chain_scalar_norm_is_product_of_coefficients() {
        let a = 0.9;
        let spec = ModelSpec::new(
            vec![Matrix::identity(2).scaled(a)],
            Matrix::identity(2),
            None,
        )
        .unwrap();
        let y0 = [3.0, 4.0];
        let chain = simulate_tail_chain(&spec, &y0, 8, 3).unwrap();
        let norm = |v: &[f64]| (v[0] * v[0] + v[1] * v[1]).sqrt();
        // ||Y_k||/||y0|| equals the product of |a m_j| exactly; verify by
        // reconstructing the factors from consecutive norms.
        let mut product = 1.0;
        for k in 1..chain.len() {
            let ratio = norm(chain.row(k)) / norm(chain.row(k - 1));
            product *= ratio;
            let direct = norm(chain.row(k)) / norm(&y0);
            assert!((product - direct).abs() < 1e-12 * direct.max(1.0));
        }
    }

    #[test]
    fn tail_chain_diagonal_log_increments_share_common_factor() {
        let spec = diag_spec(&[0.7, 0.3]);
        let chain = simulate_tail_chain(&spec, &[1.0, -2.0], 15, 4).unwrap();
        let diag = [0.7f64, 0.3];
        for k in 1..chain.len() {
            let mut incs = Vec::new();
            for i in 0..2 {
                let inc = (chain.row(k)[i].abs().ln() - chain.row(k - 1)[i].abs().ln())
                    - diag[i].ln();
                incs.push(inc);
            }
            assert!(
                (incs[0] - incs[1]).abs() < 1e-9,
                "log increments differ at step {k}: {incs:?}"
            );
        }
    }

    #[test]
    fn csv_roundtrip() {
        let spec = diag_spec(&[0.5, 0.6]);
        let path = simulate_sre(&spec, 500, 100, 11);
        let dir = std::env::temp_dir().join("bekk_core_sim_test");
        std::fs::create_dir_all(&dir).unwrap();
        let file = dir.join("path.csv");
        path.write_csv(&file).unwrap();
        let back = PathSample::read_csv(&file).unwrap();
        assert_eq!(path, back);
        std::fs::remove_dir_all(&dir).ok();
    }
}
