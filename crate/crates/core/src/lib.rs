//! Comparison-driven parameter alignment.
//!
//! Stage 1 recovers a sparse support from noisy labels with the Lasso
//! ([`sparse`]). Stage 2 refines each recovered coefficient by probabilistic
//! bisection driven by pairwise comparisons ([`bisect`]), answered by a
//! simulated random-utility responder or a human ([`choice`]). [`pipeline`]
//! wires the two stages together and [`calibrate`] fits the choice model to
//! recorded answers.

pub mod bisect;
pub mod calibrate;
pub mod choice;
pub mod density;
pub mod pipeline;
pub mod rng;
pub mod sparse;

pub use bisect::{
    db_align, hbar, tau_horizontal, tau_vertical, DbConfig, DbResult, HorizontalRule, MapbConfig,
    MapbOutcome, MapbRun, StoppingConstants, Termination, VerticalTest,
};
pub use choice::{
    choice_probability_plus, utility, Choice, ComparisonAnswer, ComparisonQuery, DeterministicResponder,
    DistanceSpec, OracleParams, QueuedResponder, Responder, Response, SimulatedResponder,
};
pub use density::PiecewiseDensity;
