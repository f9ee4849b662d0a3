//! Sweep configuration, read from TOML.

use std::path::PathBuf;

use pbalign::bisect::StoppingConstants;
use pbalign::pipeline::{LambdaRule, MapbTemplate};
use pbalign::HorizontalRule;
use serde::{Deserialize, Serialize};

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum OracleKind {
    /// Random-utility responder with logistic choice noise.
    #[default]
    Rum,
    /// Always picks the candidate nearer the truth.
    Deterministic,
}

/// A grid of matched-budget cells: every combination of `sigma`, `gamma`,
/// `s` and `kappa`, each repeated `repetitions` times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default = "default_s")]
    pub s: Vec<usize>,
    pub sigma: Vec<f64>,
    #[serde(default = "default_gamma")]
    pub gamma: Vec<f64>,
    pub kappa: Vec<f64>,
    /// Target precision; per coordinate it is `epsilon / s^(1/rho)`.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Norm order for splitting `epsilon` across coordinates. Infinite means
    /// every coordinate gets `epsilon`.
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_reps")]
    pub repetitions: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub oracle: OracleKind,
    /// Utility gap scale `λ_Δ` of the simulated responder.
    #[serde(default = "one")]
    pub utility_scale: f64,
    /// Magnitudes of the nonzero coefficients are uniform on this range,
    /// with random signs.
    #[serde(default = "default_truth_range")]
    pub truth_range: [f64; 2],
    /// Stage-1 size is `ceil(2 σ² ln d) · n1_multiplier`.
    #[serde(default = "default_mult")]
    pub n1_multiplier: f64,
    /// Fixed stage-1 size, replacing the formula above.
    #[serde(default)]
    pub stage1_labels: Option<usize>,
    /// Refinement half-width around the stage-1 estimate.
    #[serde(default = "one")]
    pub half_width: f64,
    #[serde(default)]
    pub lambda_rule: LambdaRule,
    #[serde(default = "sweep_template")]
    pub template: MapbTemplate,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

/// Refinement settings shared by the simulated experiments: a fixed
/// number of horizontal moves from the stopping-time formula, with
/// stopping constants that keep that number near 30.
pub fn sweep_template() -> MapbTemplate {
    MapbTemplate {
        horizontal_rule: HorizontalRule::TheoreticalTau,
        stopping: StoppingConstants { r1: 1.5, r2: 3.0, alpha: 2.0, r_r: 1.5, ..StoppingConstants::default() },
        ..MapbTemplate::default()
    }
}

fn default_d() -> usize {
    100
}
fn default_s() -> Vec<usize> {
    vec![10]
}
fn default_gamma() -> Vec<f64> {
    vec![1.0]
}
fn default_epsilon() -> f64 {
    0.1
}
fn default_delta() -> f64 {
    0.1
}
fn default_rho() -> f64 {
    f64::INFINITY
}
fn default_reps() -> usize {
    30
}
fn one() -> f64 {
    1.0
}
fn default_truth_range() -> [f64; 2] {
    [0.5, 1.5]
}
fn default_mult() -> f64 {
    10.0
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let c: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1".into());
        }
        if self.sigma.is_empty() || self.gamma.is_empty() || self.kappa.is_empty() || self.s.is_empty() {
            return bad("sigma, gamma, kappa and s grids must be non-empty".into());
        }
        if let Some(&s) = self.s.iter().find(|&&s| s == 0 || s > self.d) {
            return bad(format!("s = {s} must lie in 1..={}", self.d));
        }
        if self.sigma.iter().chain(&self.gamma).any(|v| !(*v > 0.0 && v.is_finite())) {
            return bad("sigma and gamma values must be positive".into());
        }
        if self.kappa.iter().any(|k| !(*k >= 0.0 && k.is_finite())) {
            return bad("kappa values must be non-negative".into());
        }
        if !(self.epsilon > 0.0) || !(self.delta > 0.0 && self.delta < 1.0) {
            return bad("need epsilon > 0 and delta in (0, 1)".into());
        }
        let [lo, hi] = self.truth_range;
        if !(lo > 0.0 && hi >= lo) {
            return bad(format!("truth_range [{lo}, {hi}] must be positive and ordered"));
        }
        if !(self.n1_multiplier > 0.0) || self.stage1_labels == Some(0) {
            return bad("stage-1 size must be positive".into());
        }
        Ok(())
    }

    /// `ceil(2 σ² ln d) · n1_multiplier` unless `stage1_labels` is set.
    pub fn n1(&self, sigma: f64) -> usize {
        if let Some(n) = self.stage1_labels {
            return n;
        }
        ((2.0 * sigma * sigma * (self.d as f64).ln()).ceil() * self.n1_multiplier).ceil() as usize
    }

    /// Assumptions not fixed by the method itself, written at the top of
    /// every CSV.
    pub fn header_notes(&self) -> Vec<String> {
        let stage1 = match self.stage1_labels {
            Some(n) => format!("stage-1 labels: {n}"),
            None => format!("stage-1 labels: ceil(2 sigma^2 ln d) * {}", self.n1_multiplier),
        };
        vec![
            stage1,
            format!(
                "nonzero coefficients: |theta_j| ~ U[{}, {}] with random sign",
                self.truth_range[0], self.truth_range[1]
            ),
            "pure SL budget: stage-1 labels + comparisons, one comparison counted as one label".into(),
        ]
    }
}
