//! Complexity bounds used to compare configurations. None of these feed
//! back into a run.

use serde::{Deserialize, Serialize};

use super::plan::{AlignmentPlan, MapbTemplate};
use super::two_stage::OracleSpec;
use super::PipelineError;
use crate::bisect::{tau_horizontal, tau_vertical, VerticalBudgetParams};
use crate::choice::{choice_probability_plus, ComparisonQuery, OracleParams};
use crate::sparse::RecoveryParams;

/// Expected vertical-test length bound at correct-answer probability `p̃`:
/// `c₁|2p̃−1|⁻² ln(|2p̃−1|⁻¹) + c₂`.
pub fn phi_bound(p_tilde: f64, c1: f64, c2: f64) -> Result<f64, PipelineError> {
    if !(p_tilde > 0.5 && p_tilde <= 1.0) {
        return Err(PipelineError::Config(format!("p~ must lie in (1/2, 1], got {p_tilde}")));
    }
    if p_tilde == 1.0 {
        return Ok(c2);
    }
    let x = (2.0 * p_tilde - 1.0).abs();
    Ok(c1 * (1.0 / x).ln() / (x * x) + c2)
}

/// Probability of the correct answer for a query `r` away from the truth.
pub fn correct_probability(params: &OracleParams, granularity: f64, r: f64) -> f64 {
    let q = ComparisonQuery::new(0, params.theta_star - r, granularity).expect("positive granularity");
    choice_probability_plus(&q, params).expect("validated oracle")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityModel {
    pub oracle: OracleSpec,
    pub template: MapbTemplate,
    pub c1: f64,
    pub c2: f64,
    /// Points used to scan distances in `[a, β̄]`.
    pub scan_points: usize,
}

impl ComplexityModel {
    pub fn new(oracle: OracleSpec, template: MapbTemplate) -> Self {
        Self { oracle, template, c1: 1.0, c2: 1.0, scan_points: 64 }
    }
}

/// Bound on the expected number of comparisons of one refinement over a
/// box of half-width `half_width`: a multiple of the worst `φ(p̃)` at
/// distances in `[a, β̄]` plus `τ→(δ/2, ε)·τ↑(δ/2, ε)`.
pub fn comparison_complexity(model: &ComplexityModel, delta: f64, epsilon: f64, half_width: f64) -> f64 {
    let t = &model.template;
    let st = &t.stopping;
    let a = t.a.unwrap_or((epsilon * half_width).sqrt());
    let bound = st.theta_star_bound.unwrap_or(half_width);
    let lead = 4.0 * bound / (st.r2 * st.alpha * a.powf(st.varsigma)) + 4.0 * st.beta1 / st.r1 + 2.0 * st.beta2 / st.r_r;

    let params = model.oracle.params(0.0);
    let granularity = t.granularity_ratio * epsilon;
    let lo = a.min(half_width);
    let n = model.scan_points.max(2);
    let mut worst = 0.0f64;
    for i in 0..n {
        let r = lo * (half_width / lo).powf(i as f64 / (n - 1) as f64);
        let p = correct_probability(&params, granularity, r);
        let phi = phi_bound(p, model.c1, model.c2).unwrap_or(f64::INFINITY);
        worst = worst.max(phi);
    }

    let vp = VerticalBudgetParams {
        kappa: t.kappa,
        lambda_delta: t.lambda_delta,
        gamma: t.gamma,
        a,
        eta: t.eta,
        kappa_zero_cap: t.kappa_zero_cap,
    };
    let horiz = tau_horizontal(delta / 2.0, epsilon, st, bound) as f64;
    let vert = tau_vertical(delta / 2.0, epsilon, &vp) as f64;
    lead * worst + horiz * vert
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthChoice {
    pub width: f64,
    /// `(β̄, H₀ + s·H)` for every grid point.
    pub objective: Vec<(f64, f64)>,
}

/// Smallest minimizer of `objective` over `grid`.
pub fn argmin_width(grid: &[f64], objective: impl Fn(f64) -> f64) -> Result<WidthChoice, PipelineError> {
    if grid.is_empty() {
        return Err(PipelineError::Config("width grid is empty".into()));
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let values: Vec<(f64, f64)> = sorted.iter().map(|&w| (w, objective(w))).collect();
    let mut best = 0;
    for k in 1..values.len() {
        if values[k].1 < values[best].1 {
            best = k;
        }
    }
    Ok(WidthChoice { width: values[best].0, objective: values })
}

/// Refinement width minimizing stage-1 labels plus `s` refinements at the
/// scaled targets. `recovery.theta_min` is the largest width allowed.
pub fn optimal_refinement_width(
    recovery: &RecoveryParams,
    model: &ComplexityModel,
    delta: f64,
    epsilon: f64,
    rho: f64,
    grid: &[f64],
) -> Result<WidthChoice, PipelineError> {
    recovery.validate()?;
    if let Some(&w) = grid.iter().find(|&&w| !(w > 0.0 && w <= recovery.theta_min)) {
        return Err(PipelineError::Config(format!("width {w} outside (0, {}]", recovery.theta_min)));
    }
    let s = recovery.s;
    let eps_j = AlignmentPlan::per_dimension_epsilon(epsilon, s, rho);
    argmin_width(grid, |w| {
        let stage1 = RecoveryParams { theta_min: w, ..recovery.clone() }.stage1_sample_size(delta) as f64;
        stage1 + s as f64 * comparison_complexity(model, delta / s as f64, eps_j, w)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LncaVerdict {
    /// `σ²/s^κ`.
    pub ratio: f64,
    /// `ε^{2−2κ}`.
    pub threshold: f64,
    pub favors_two_stage: bool,
}

/// Label noise against comparison accuracy: two stages pay off when
/// `σ²/s^κ ≥ ε^{2−2κ}`.
pub fn lnca_check(sigma: f64, s: usize, kappa: f64, epsilon: f64) -> LncaVerdict {
    let ratio = sigma * sigma / (s as f64).powf(kappa);
    let threshold = epsilon.powf(2.0 - 2.0 * kappa);
    LncaVerdict { ratio, threshold, favors_two_stage: ratio >= threshold }
}
