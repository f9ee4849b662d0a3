//! One repetition of the matched-budget comparison.

use pbalign::pipeline::{pure_sl, sl_lhf_run, OracleSpec, SlLhfConfig, SparseProblem};
use pbalign::rng::substream;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, OracleKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellPoint {
    pub sigma: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub s: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepResult {
    pub rep: usize,
    pub seed: u64,
    pub err_two_stage: f64,
    pub err_pure_sl: f64,
    pub ratio: f64,
    pub n1: usize,
    pub n2: u64,
    /// Labels given to pure SL: `n1 + n2`.
    pub budget: u64,
    pub support_recovered: bool,
    pub missed: usize,
    pub extra: usize,
    /// Set when the repetition could not run; the numbers are then NaN.
    pub error: Option<String>,
}

/// Seed of repetition `rep`. It does not depend on the cell, so every cell
/// sees the same truths and stage-1 data for a given repetition.
pub fn rep_seed(master: u64, rep: usize) -> u64 {
    substream(master, 4, rep as u64).random()
}

/// First `s` coordinates nonzero, magnitude uniform on `range`, random sign.
pub fn draw_truth<R: Rng + ?Sized>(d: usize, s: usize, range: [f64; 2], rng: &mut R) -> Vec<f64> {
    let mut t = vec![0.0; d];
    for v in t.iter_mut().take(s) {
        let m = if range[1] > range[0] { rng.random_range(range[0]..=range[1]) } else { range[0] };
        *v = if rng.random_bool(0.5) { m } else { -m };
    }
    t
}

pub fn two_stage_config(cfg: &ExperimentConfig, point: &CellPoint) -> SlLhfConfig {
    let mut template = cfg.template.clone();
    template.kappa = point.kappa;
    template.gamma = point.gamma;
    template.lambda_delta = cfg.utility_scale;
    let mut oracle = OracleSpec::kappa(point.gamma, cfg.utility_scale, point.kappa);
    oracle.deterministic = cfg.oracle == OracleKind::Deterministic;
    SlLhfConfig {
        epsilon: cfg.epsilon,
        delta: cfg.delta,
        rho: cfg.rho,
        half_width: cfg.half_width,
        n1: cfg.n1(point.sigma),
        lambda_rule: cfg.lambda_rule.clone(),
        lasso: Default::default(),
        template,
        oracle,
        forced: Vec::new(),
        oracle_support: false,
    }
}

/// Two-stage run on a fresh problem, then Lasso on `n1 + n2` labels of the
/// same problem. Errors are ℓ₂ distances to the truth.
pub fn run_matched_budget_cell(cfg: &ExperimentConfig, point: &CellPoint, rep: usize, seed: u64) -> RepResult {
    let truth = draw_truth(cfg.d, point.s, cfg.truth_range, &mut substream(seed, 2, 0));
    let problem = SparseProblem::new(truth.clone(), point.sigma);
    let sl_config = two_stage_config(cfg, point);
    let failed = |e: String| RepResult {
        rep,
        seed,
        err_two_stage: f64::NAN,
        err_pure_sl: f64::NAN,
        ratio: f64::NAN,
        n1: sl_config.n1,
        n2: 0,
        budget: 0,
        support_recovered: false,
        missed: 0,
        extra: 0,
        error: Some(e),
    };
    let report = match sl_lhf_run(&problem, &sl_config, seed) {
        Ok(r) => r,
        Err(e) => return failed(e.to_string()),
    };
    let budget = report.total_samples();
    let sl = match pure_sl(&problem, budget as usize, &cfg.lambda_rule, &mut substream(seed, 3, 0)) {
        Ok(m) => m,
        Err(e) => return failed(e.to_string()),
    };
    let err_pure_sl = sl.coefficients.iter().zip(&truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let (missed, extra) = report.support_mismatch.as_ref().map_or((0, 0), |m| (m.missed.len(), m.extra.len()));
    RepResult {
        rep,
        seed,
        err_two_stage: report.l2_error,
        err_pure_sl,
        ratio: report.l2_error / err_pure_sl,
        n1: report.n1,
        n2: report.n2,
        budget,
        support_recovered: missed == 0 && extra == 0,
        missed,
        extra,
        error: None,
    }
}
