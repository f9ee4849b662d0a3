//! Two-stage alignment: Lasso support recovery, then per-coordinate
//! refinement by comparisons. Also the sample-selection variant that
//! aligns predicted values on a spanning set of samples, and complexity
//! diagnostics for choosing the refinement width.

mod ass;
mod diagnostics;
mod plan;
mod two_stage;

use thiserror::Error;

pub use ass::{ass_align, simulated_value_responders, AssConfig, AssReport, OrthoBasis};
pub use diagnostics::{
    argmin_width, comparison_complexity, correct_probability, lnca_check, optimal_refinement_width, phi_bound, ComplexityModel,
    LncaVerdict, WidthChoice,
};
pub use plan::{AlignmentPlan, DimensionReport, MapbTemplate};
pub use two_stage::{
    pure_sl, refine, simulate_lasso, sl_lhf_run, LambdaRule, OracleSpec, SlLhfConfig, SlLhfReport, SparseProblem,
    SupportMismatch,
};

use crate::bisect::BisectError;
use crate::sparse::SparseError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("sample {index} is nearly a combination of the earlier ones (residual ratio {ratio:.3e})")]
    Dependent { index: usize, ratio: f64 },
    #[error("sample matrix condition number {condition:.3e} exceeds {limit:.3e}; weakest sample is {index}")]
    IllConditioned { condition: f64, limit: f64, index: usize },
    #[error("responder for coordinate {0} has no answer")]
    Pending(usize),
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error(transparent)]
    Bisect(#[from] BisectError),
}
