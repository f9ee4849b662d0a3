//! Stage-1 sparse regression.
//!
//! The Lasso objective `(1/2n)‖y − Xϑ‖² + λ‖ϑ‖₁` only depends on the data
//! through `XᵀX`, `Xᵀy`, `yᵀy` and `n`, so the solver works on a [`Gram`]
//! summary. That also lets simulations draw the summary of a very large
//! Gaussian sample directly ([`gaussian::sample_gram`]).

mod cv;
mod dataset;
pub mod gaussian;
mod lasso;
mod theory;

use thiserror::Error;

pub use cv::{cv_select_lambda, cv_select_lambda_folds, lambda_grid, CvResult};
pub use dataset::{Dataset, Gram, Provenance};
pub use lasso::{lasso_fit, lasso_gram, objective, soft_threshold, LassoOptions, SparseModel};
pub use theory::RecoveryParams;

#[derive(Debug, Error)]
pub enum SparseError {
    #[error("dataset is empty or has no features")]
    Empty,
    #[error("row {row} has {got} features, expected {expected}")]
    Ragged { row: usize, expected: usize, got: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("no column named \"y\" in CSV header")]
    MissingResponse,
    #[error("lambda must be non-negative and finite, got {0}")]
    BadLambda(f64),
    #[error("cross-validation needs at least 2 folds and n >= folds, got {folds} folds for n={n}")]
    BadFolds { folds: usize, n: usize },
    #[error("lambda grid is empty")]
    EmptyGrid,
    #[error("invalid recovery parameters: {0}")]
    BadParams(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
