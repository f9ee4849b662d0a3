//! Precision sweep with responder and label noise set from a calibration.

use std::io::Write;

use pbalign::calibrate::CalibrationResult;
use pbalign::pipeline::{LambdaRule, MapbTemplate};
use serde::{Deserialize, Serialize};

use crate::config::{sweep_template, ExperimentConfig, OracleKind};
use crate::matched::{rep_seed, run_matched_budget_cell, CellPoint, RepResult};
use crate::{median, par_map, HarnessError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibratedSweepConfig {
    pub epsilons: Vec<f64>,
    #[serde(default = "default_reps")]
    pub repetitions: usize,
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default = "default_s")]
    pub s: usize,
    /// `epsilon` bounds the ℓ₂ error when 2.
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_stage1")]
    pub stage1_labels: usize,
    /// Calibrated quantities are measured in units `unit_scale` times
    /// larger than the simulated coefficients.
    #[serde(default = "default_unit")]
    pub unit_scale: f64,
    #[serde(default = "default_truth_range")]
    pub truth_range: [f64; 2],
    #[serde(default = "one")]
    pub half_width: f64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub lambda_rule: LambdaRule,
    #[serde(default = "sweep_template")]
    pub template: MapbTemplate,
}

fn default_reps() -> usize {
    100
}
fn default_d() -> usize {
    100
}
fn default_s() -> usize {
    10
}
fn default_rho() -> f64 {
    2.0
}
fn default_delta() -> f64 {
    0.1
}
fn default_stage1() -> usize {
    1000
}
fn default_unit() -> f64 {
    10.0
}
fn default_truth_range() -> [f64; 2] {
    [0.5, 1.5]
}
fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedRow {
    pub epsilon: f64,
    pub median_error: f64,
    /// Share of repetitions with ℓ₂ error at most `epsilon`.
    pub within_epsilon: f64,
    pub median_samples: f64,
    pub median_comparisons: f64,
    pub median_ratio: f64,
    pub failures: usize,
    pub reps: Vec<RepResult>,
}

impl CalibratedSweepConfig {
    /// Label noise in simulation units.
    pub fn sigma(&self, calibration: &CalibrationResult) -> f64 {
        calibration.sigma_hat / self.unit_scale
    }

    /// `λ̃·|u·r|^κ = (λ̃·u^κ)·|r|^κ` for a coefficient gap `r`.
    pub fn utility_scale(&self, calibration: &CalibrationResult) -> f64 {
        calibration.lambda_tilde_hat * self.unit_scale.powf(calibration.kappa_hat)
    }

    fn experiment(&self, calibration: &CalibrationResult, epsilon: f64) -> ExperimentConfig {
        ExperimentConfig {
            d: self.d,
            s: vec![self.s],
            sigma: vec![self.sigma(calibration)],
            gamma: vec![1.0],
            kappa: vec![calibration.kappa_hat],
            epsilon,
            delta: self.delta,
            rho: self.rho,
            repetitions: self.repetitions,
            master_seed: self.master_seed,
            oracle: OracleKind::Rum,
            utility_scale: self.utility_scale(calibration),
            truth_range: self.truth_range,
            n1_multiplier: 1.0,
            stage1_labels: Some(self.stage1_labels),
            half_width: self.half_width,
            lambda_rule: self.lambda_rule.clone(),
            template: self.template.clone(),
            output: None,
        }
    }
}

/// For each `ε`: two-stage runs with `γ = 1`, `λ_Δ = λ̃̂`, `κ = κ̂` and label
/// noise `σ̂`, each against Lasso at the same label budget.
pub fn calibrated_precision_sweep(
    calibration: &CalibrationResult,
    cfg: &CalibratedSweepConfig,
) -> Result<Vec<CalibratedRow>, HarnessError> {
    if cfg.epsilons.is_empty() || cfg.repetitions == 0 {
        return Err(HarnessError::Config("need at least one epsilon and one repetition".into()));
    }
    if !(calibration.lambda_tilde_hat > 0.0) {
        return Err(HarnessError::Config("calibrated utility scale is zero; comparisons carry no signal".into()));
    }
    let mut eps = cfg.epsilons.clone();
    eps.sort_by(|a, b| a.total_cmp(b));
    let experiments: Vec<ExperimentConfig> = eps.iter().map(|&e| cfg.experiment(calibration, e)).collect();
    for e in &experiments {
        e.validate()?;
    }
    if !(cfg.unit_scale > 0.0) {
        return Err(HarnessError::Config("unit_scale must be positive".into()));
    }
    let point = CellPoint { sigma: cfg.sigma(calibration), gamma: 1.0, kappa: calibration.kappa_hat, s: cfg.s };
    let reps = cfg.repetitions;
    let seeds: Vec<u64> = (0..reps).map(|r| rep_seed(cfg.master_seed, r)).collect();
    let flat = par_map(eps.len() * reps, |i| run_matched_budget_cell(&experiments[i / reps], &point, i % reps, seeds[i % reps]));
    let mut it = flat.into_iter();
    Ok(eps
        .iter()
        .map(|&epsilon| {
            let reps: Vec<RepResult> = it.by_ref().take(reps).collect();
            let ok: Vec<&RepResult> = reps.iter().filter(|r| r.error.is_none()).collect();
            let col = |f: fn(&RepResult) -> f64| median(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
            CalibratedRow {
                epsilon,
                median_error: col(|r| r.err_two_stage),
                within_epsilon: ok.iter().filter(|r| r.err_two_stage <= epsilon).count() as f64 / reps.len() as f64,
                median_samples: col(|r| r.budget as f64),
                median_comparisons: col(|r| r.n2 as f64),
                median_ratio: col(|r| r.ratio),
                failures: reps.len() - ok.len(),
                reps,
            }
        })
        .collect())
}

/// Header: `epsilon,median_error,within_epsilon,median_samples,median_comparisons,median_ratio,failures`.
pub fn write_calibrated_csv<W: Write>(rows: &[CalibratedRow], notes: &[String], mut w: W) -> Result<(), HarnessError> {
    for n in notes {
        writeln!(w, "# {n}")?;
    }
    let mut c = csv::Writer::from_writer(w);
    c.write_record([
        "epsilon", "median_error", "within_epsilon", "median_samples", "median_comparisons", "median_ratio", "failures",
    ])?;
    for r in rows {
        c.write_record([
            r.epsilon.to_string(),
            r.median_error.to_string(),
            r.within_epsilon.to_string(),
            r.median_samples.to_string(),
            r.median_comparisons.to_string(),
            r.median_ratio.to_string(),
            r.failures.to_string(),
        ])?;
    }
    c.flush()?;
    Ok(())
}
