//! Model specification, validation, structural classification, and sampling
//! of the random SRE coefficients.
//!
//! A model is the tuple `(A_1..A_l, C, A_0?)`: `l` coefficient matrices, a
//! positive-definite noise covariance, and an optional autoregressive term.
//! Construction validates everything once, so any `ModelSpec` in circulation
//! is internally consistent.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::numerics::{cholesky, Matrix, NumericsError};

/// Tolerance for the structural classification tests (diagonality,
/// orthogonality, scalar equality). Specs are user-authored exact values, so
/// this only absorbs parsing round-off.
pub const CLASSIFY_TOL: f64 = 1e-10;

/// Errors from spec construction, parsing, and validation.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model must have at least one coefficient matrix")]
    NoCoefficients,
    #[error("dimension mismatch: {what} is {got_rows}x{got_cols}, expected {expect}x{expect}")]
    DimensionMismatch {
        what: String,
        got_rows: usize,
        got_cols: usize,
        expect: usize,
    },
    #[error("declared {field} = {declared} does not match data ({actual})")]
    DeclaredMismatch {
        field: &'static str,
        declared: usize,
        actual: usize,
    },
    #[error("noise covariance C is not positive definite: {0}")]
    NotPositiveDefinite(NumericsError),
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

/// A validated BEKK-ARCH model specification.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSpec {
    d: usize,
    l: usize,
    #[serde(rename = "A")]
    a: Vec<Matrix>,
    #[serde(rename = "C")]
    c: Matrix,
    #[serde(rename = "A0", skip_serializing_if = "Option::is_none")]
    a0: Option<Matrix>,
}

/// Raw on-disk shape; cross-field validation happens in `TryFrom`.
#[derive(Deserialize)]
struct SpecFile {
    d: usize,
    l: usize,
    #[serde(rename = "A")]
    a: Vec<Matrix>,
    #[serde(rename = "C")]
    c: Matrix,
    #[serde(rename = "A0", default)]
    a0: Option<Matrix>,
}

impl ModelSpec {
    /// Validates and constructs a spec. The dimension is taken from `C`;
    /// every coefficient matrix must be square of the same size and `C` must
    /// pass a Cholesky factorization.
    pub fn new(a: Vec<Matrix>, c: Matrix, a0: Option<Matrix>) -> Result<Self, ModelError> {
        if a.is_empty() {
            return Err(ModelError::NoCoefficients);
        }
        let d = c.rows();
        if !c.is_square() {
            return Err(ModelError::DimensionMismatch {
                what: "C".into(),
                got_rows: c.rows(),
                got_cols: c.cols(),
                expect: d,
            });
        }
        for (i, m) in a.iter().enumerate() {
            if m.rows() != d || m.cols() != d {
                return Err(ModelError::DimensionMismatch {
                    what: format!("A{}", i + 1),
                    got_rows: m.rows(),
                    got_cols: m.cols(),
                    expect: d,
                });
            }
        }
        if let Some(m) = &a0 {
            if m.rows() != d || m.cols() != d {
                return Err(ModelError::DimensionMismatch {
                    what: "A0".into(),
                    got_rows: m.rows(),
                    got_cols: m.cols(),
                    expect: d,
                });
            }
        }
        cholesky(&c).map_err(ModelError::NotPositiveDefinite)?;
        let l = a.len();
        Ok(Self { d, l, a, c, a0 })
    }

    /// Parses and validates a spec from a JSON string. `origin` labels the
    /// source (a file path or `"<inline>"`) in error messages.
    pub fn from_json_str(json: &str, origin: &str) -> Result<Self, ModelError> {
        let raw: SpecFile = serde_json::from_str(json).map_err(|source| ModelError::Parse {
            path: origin.into(),
            source,
        })?;
        let spec = ModelSpec::new(raw.a, raw.c, raw.a0)?;
        if raw.d != spec.d {
            return Err(ModelError::DeclaredMismatch {
                field: "d",
                declared: raw.d,
                actual: spec.d,
            });
        }
        if raw.l != spec.l {
            return Err(ModelError::DeclaredMismatch {
                field: "l",
                declared: raw.l,
                actual: spec.l,
            });
        }
        Ok(spec)
    }

    pub fn from_path(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text, &path.display().to_string())
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serialization cannot fail")
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn l(&self) -> usize {
        self.l
    }

    pub fn a(&self) -> &[Matrix] {
        &self.a
    }

    pub fn c(&self) -> &Matrix {
        &self.c
    }

    pub fn a0(&self) -> Option<&Matrix> {
        self.a0.as_ref()
    }

    /// SHA-256 of the canonical JSON serialization; identifies the spec in
    /// output metadata.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(self).expect("spec serialization cannot fail");
        let hash = Sha256::digest(canonical.as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Structural classes a spec can belong to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClassLabel {
    /// `l = 1` and `A_1 = a I`.
    Scalar,
    /// `l = 1` and `A_1` diagonal.
    Diagonal,
    /// `l = 1` and `A_1` a positive scalar times an orthogonal matrix.
    Similarity,
    /// `l = d^2` with linearly independent coefficient matrices, so the
    /// random coefficient matrix has a density on the full matrix space.
    IdCandidate,
    /// None of the structured classes apply.
    General,
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ClassLabel::Scalar => "scalar",
            ClassLabel::Diagonal => "diagonal",
            ClassLabel::Similarity => "similarity",
            ClassLabel::IdCandidate => "id-candidate",
            ClassLabel::General => "general",
        };
        f.write_str(s)
    }
}

/// Classification result: the set of labels plus a short rationale per label.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamClass {
    pub labels: Vec<ClassLabel>,
    pub details: BTreeMap<ClassLabel, String>,
}

impl ParamClass {
    pub fn has(&self, label: ClassLabel) -> bool {
        self.labels.contains(&label)
    }

    pub fn is_diagonal(&self) -> bool {
        self.has(ClassLabel::Diagonal)
    }
}

/// Structurally classifies a validated spec.
///
/// All entry comparisons use [`CLASSIFY_TOL`]. The ID-candidate test is the
/// necessary structural condition only: `l = d^2` and the vectorized
/// coefficient matrices span the full matrix space.
pub fn classify(spec: &ModelSpec) -> ParamClass {
    let mut labels = Vec::new();
    let mut details = BTreeMap::new();
    let d = spec.d();

    if spec.l() == 1 {
        let a = &spec.a()[0];
        if is_diagonal(a) {
            labels.push(ClassLabel::Diagonal);
            details.insert(
                ClassLabel::Diagonal,
                format!("single coefficient matrix with diagonal {:?}", diag_of(a)),
            );
            if is_scalar(a) {
                labels.push(ClassLabel::Scalar);
                details.insert(
                    ClassLabel::Scalar,
                    format!("A1 = {} * I", a.get(0, 0)),
                );
            }
        }
        if let Some(scale) = similarity_scale(a) {
            labels.push(ClassLabel::Similarity);
            details.insert(
                ClassLabel::Similarity,
                format!("A1' A1 = {scale:.6e}^2 * I (scalar times orthogonal)"),
            );
        }
    } else if spec.l() == d * d {
        if coefficients_span_matrix_space(spec.a(), d) {
            labels.push(ClassLabel::IdCandidate);
            details.insert(
                ClassLabel::IdCandidate,
                format!(
                    "l = d^2 = {} and the vectorized coefficient matrices are linearly independent",
                    d * d
                ),
            );
        }
    }

    if labels.is_empty() {
        labels.push(ClassLabel::General);
        let note = if spec.l() > 1 && spec.l() < d * d {
            "no structured class applies; fewer than d^2 terms, so a full matrix-space density \
             cannot be established structurally"
        } else {
            "no structured class applies"
        };
        details.insert(ClassLabel::General, note.to_string());
    }

    labels.sort();
    ParamClass { labels, details }
}

fn is_diagonal(m: &Matrix) -> bool {
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            if i != j && m.get(i, j).abs() > CLASSIFY_TOL {
                return false;
            }
        }
    }
    true
}

fn diag_of(m: &Matrix) -> Vec<f64> {
    (0..m.rows()).map(|i| m.get(i, i)).collect()
}

fn is_scalar(m: &Matrix) -> bool {
    let a = m.get(0, 0);
    (0..m.rows()).all(|i| (m.get(i, i) - a).abs() <= CLASSIFY_TOL)
}

/// Returns `a >= 0` such that `m' m = a^2 I` within tolerance, if any.
fn similarity_scale(m: &Matrix) -> Option<f64> {
    let g = m.transpose().matmul(m);
    let a2 = g.get(0, 0);
    if a2 < 0.0 {
        return None;
    }
    for i in 0..g.rows() {
        for j in 0..g.cols() {
            let target = if i == j { a2 } else { 0.0 };
            if (g.get(i, j) - target).abs() > CLASSIFY_TOL {
                return None;
            }
        }
    }
    Some(a2.sqrt())
}

/// Rank test: do the `l = d^2` vectorized matrices span the matrix space?
fn coefficients_span_matrix_space(a: &[Matrix], d: usize) -> bool {
    let n = d * d;
    // Rows of the elimination tableau are the vectorized coefficient matrices.
    let mut rows: Vec<Vec<f64>> = a.iter().map(|m| m.data().to_vec()).collect();
    let scale = rows
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1.0);
    let tol = 1e-10 * scale;
    let mut rank = 0;
    for col in 0..n {
        let Some(pivot_row) = (rank..rows.len()).max_by(|&p, &q| {
            rows[p][col]
                .abs()
                .partial_cmp(&rows[q][col].abs())
                .unwrap()
        }) else {
            break;
        };
        if rows[pivot_row][col].abs() <= tol {
            continue;
        }
        rows.swap(rank, pivot_row);
        let pivot = rows[rank][col];
        for r in (rank + 1)..rows.len() {
            let factor = rows[r][col] / pivot;
            if factor != 0.0 {
                for c in col..n {
                    let sub = factor * rows[rank][c];
                    rows[r][c] -= sub;
                }
            }
        }
        rank += 1;
        if rank == n {
            return true;
        }
    }
    rank == n
}

/// One draw of the random SRE coefficients: the normal scalars, the assembled
/// coefficient matrix, and the noise vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientDraw {
    /// Standard-normal scalars `m_1 .. m_l`.
    pub m: Vec<f64>,
    /// `A_0? + sum_i m_i A_i`.
    pub mtilde: Matrix,
    /// `N(0, C)` noise, drawn through the Cholesky factor of `C`.
    pub q: Vec<f64>,
}

/// Prepared sampler for the random coefficients of a spec. Holds the Cholesky
/// factor of `C` so repeated draws are cheap.
#[derive(Debug, Clone)]
pub struct CoefficientSampler {
    a: Vec<Matrix>,
    a0: Option<Matrix>,
    chol_c: Matrix,
    d: usize,
}

impl CoefficientSampler {
    pub fn new(spec: &ModelSpec) -> Self {
        let chol_c = cholesky(spec.c()).expect("spec validation guarantees C is positive definite");
        Self {
            a: spec.a().to_vec(),
            a0: spec.a0().cloned(),
            chol_c,
            d: spec.d(),
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn chol_c(&self) -> &Matrix {
        &self.chol_c
    }

    /// Draws the `m_i` scalars and assembles `mtilde`; draw order is the
    /// `l` coefficient normals first, then the `d` noise normals.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> CoefficientDraw {
        let m: Vec<f64> = (0..self.a.len())
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let mtilde = self.assemble(&m);
        let z: Vec<f64> = (0..self.d)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let q = self.chol_c.mul_vec(&z);
        CoefficientDraw { m, mtilde, q }
    }

    /// Assembles `A_0? + sum_i m_i A_i` for given scalars.
    pub fn assemble(&self, m: &[f64]) -> Matrix {
        let mut out = match &self.a0 {
            Some(a0) => a0.clone(),
            None => Matrix::zeros(self.d, self.d),
        };
        for (mi, ai) in m.iter().zip(&self.a) {
            out.add_assign(&ai.scaled(*mi));
        }
        out
    }

    /// Draws only the coefficient matrix (no noise), for routines that study
    /// the matrix product alone.
    pub fn draw_mtilde<R: Rng + ?Sized>(&self, rng: &mut R) -> Matrix {
        let m: Vec<f64> = (0..self.a.len())
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        self.assemble(&m)
    }
}

/// Draws one set of SRE coefficients from the given stream.
pub fn draw_coefficient<R: Rng + ?Sized>(spec: &ModelSpec, rng: &mut R) -> CoefficientDraw {
    CoefficientSampler::new(spec).draw(rng)
}
