//! Shared fixtures for the benchmark suite.

use bekk_core::model::ModelSpec;
use bekk_core::numerics::Matrix;

/// Bivariate diagonal spec with marginal tail indices 3 and 4.
pub fn diagonal_spec() -> ModelSpec {
    let a1 = bekk_core::tails::solve_coeff(3.0).unwrap();
    let a2 = bekk_core::tails::solve_coeff(4.0).unwrap();
    ModelSpec::new(
        vec![Matrix::from_diag(&[a1, a2])],
        Matrix::identity(2),
        None,
    )
    .unwrap()
}

/// Bivariate scalar spec inside the second-moment region.
pub fn scalar_spec() -> ModelSpec {
    ModelSpec::new(
        vec![Matrix::identity(2).scaled(0.5)],
        Matrix::identity(2),
        None,
    )
    .unwrap()
}
