//! One-dimensional alignment engines.
//!
//! [`db_align`] is plain bisection for an error-free responder. [`MapbRun`]
//! is the noisy version: at each point it repeats the same comparison until
//! a power-one test ([`VerticalTest`]) is confident about the side, then
//! moves to the median of the updated posterior.

mod budget;
mod db;
mod mapb;
mod vertical;

use thiserror::Error;

pub use budget::{tau_horizontal, tau_vertical, vertical_constant, StoppingConstants, VerticalBudgetParams};
pub use db::{db_align, DbConfig, DbResult};
pub use mapb::{
    run_to_end, Budgets, Drive, HorizontalRule, MapbConfig, MapbOutcome, MapbRun, MoveEnd, MoveRecord, StepReport,
    Termination,
};
pub use vertical::{hbar, VerticalTest};

use crate::choice::ChoiceError;
use crate::density::DensityError;

#[derive(Debug, Error, PartialEq)]
pub enum BisectError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("deterministic bisection needs an error-free responder, got `{0}`")]
    NonDeterministic(String),
    #[error("responder has no answer for query {0}")]
    Pending(u64),
    #[error("vertical test already stopped")]
    TestStopped,
    #[error("answer for query {got} does not match outstanding query {expected:?}")]
    QueryMismatch { expected: Option<u64>, got: u64 },
    #[error("run already finished")]
    Finished,
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error(transparent)]
    Choice(#[from] ChoiceError),
}
