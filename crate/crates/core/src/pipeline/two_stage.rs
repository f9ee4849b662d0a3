use rand::Rng;
use serde::{Deserialize, Serialize};

use super::diagnostics::{lnca_check, LncaVerdict};
use super::plan::{AlignmentPlan, DimensionReport, MapbTemplate};
use super::PipelineError;
use crate::bisect::{Drive, MapbRun};
use crate::choice::{DeterministicResponder, DistanceSpec, OracleParams, Responder, SimulatedResponder};
use crate::rng::substream;
use crate::sparse::gaussian::{sample_fold_grams, sample_gram};
use crate::sparse::{
    cv_select_lambda_folds, lambda_grid, lasso_gram, Gram, LassoOptions, RecoveryParams, SparseModel,
};

/// Simulated regression problem: Gaussian design with column scale
/// `x_scale` and noise level `sigma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseProblem {
    pub truth: Vec<f64>,
    pub sigma: f64,
    #[serde(default = "one")]
    pub x_scale: f64,
}

fn one() -> f64 {
    1.0
}

impl SparseProblem {
    pub fn new(truth: Vec<f64>, sigma: f64) -> Self {
        Self { truth, sigma, x_scale: 1.0 }
    }

    pub fn d(&self) -> usize {
        self.truth.len()
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.d()).filter(|&j| self.truth[j] != 0.0).collect()
    }

    /// `X = c·X₀` with standard normal `X₀`, so `y = X₀(cϑ) + e`.
    fn scaled(&self, g: Gram) -> Gram {
        let c = self.x_scale;
        if c == 1.0 {
            return g;
        }
        let mut g = g;
        g.xtx.iter_mut().for_each(|v| *v *= c * c);
        g.xty.iter_mut().for_each(|v| *v *= c);
        g
    }

    fn unit_truth(&self) -> Vec<f64> {
        self.truth.iter().map(|t| t * self.x_scale).collect()
    }

    pub fn sample_gram<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Gram {
        self.scaled(sample_gram(&self.unit_truth(), n, self.sigma, rng))
    }

    pub fn sample_fold_grams<R: Rng + ?Sized>(&self, n: usize, folds: usize, rng: &mut R) -> Vec<Gram> {
        sample_fold_grams(&self.unit_truth(), n, folds, self.sigma, rng).into_iter().map(|g| self.scaled(g)).collect()
    }
}

/// How stage 1 picks its regularization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LambdaRule {
    Fixed { value: f64 },
    Theoretical { params: RecoveryParams },
    CrossValidated { folds: usize, grid_size: usize, min_ratio: f64 },
}

impl Default for LambdaRule {
    fn default() -> Self {
        LambdaRule::CrossValidated { folds: 5, grid_size: 40, min_ratio: 1e-5 }
    }
}

/// Lasso on `n` simulated labels.
pub fn simulate_lasso<R: Rng + ?Sized>(
    problem: &SparseProblem,
    n: usize,
    rule: &LambdaRule,
    opts: &LassoOptions,
    rng: &mut R,
) -> Result<SparseModel, PipelineError> {
    if n == 0 {
        return Err(PipelineError::Config("stage-1 sample size must be positive".into()));
    }
    match rule {
        LambdaRule::Fixed { value } => Ok(lasso_gram(&problem.sample_gram(n, rng), *value, opts, None)?),
        LambdaRule::Theoretical { params } => {
            Ok(lasso_gram(&problem.sample_gram(n, rng), params.theoretical_lambda(n), opts, None)?)
        }
        LambdaRule::CrossValidated { folds, grid_size, min_ratio } => {
            let folds = (*folds).min(n);
            if folds < 2 {
                return Err(PipelineError::Config("cross-validation needs at least 2 labels".into()));
            }
            let parts = problem.sample_fold_grams(n, folds, rng);
            let mut total = Gram::zeros(problem.d());
            for g in &parts {
                total.add(g);
            }
            // near-square designs make the tail of the path slow and close to interpolation
            let floor = if n <= 2 * problem.d() { min_ratio.max(1e-2) } else { *min_ratio };
            let grid = lambda_grid(&total, *grid_size, floor);
            let cv = cv_select_lambda_folds(&parts, &grid, opts)?;
            Ok(lasso_gram(&total, cv.lambda, opts, None)?)
        }
    }
}

/// Pure supervised learning on `n` labels.
pub fn pure_sl<R: Rng + ?Sized>(problem: &SparseProblem, n: usize, rule: &LambdaRule, rng: &mut R) -> Result<SparseModel, PipelineError> {
    simulate_lasso(problem, n, rule, &LassoOptions::default(), rng)
}

/// How simulated comparisons are answered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSpec {
    pub gamma: f64,
    pub distance: DistanceSpec,
    #[serde(default)]
    pub deterministic: bool,
}

impl OracleSpec {
    pub fn kappa(gamma: f64, lambda: f64, kappa: f64) -> Self {
        Self { gamma, distance: DistanceSpec::ParametricKappa { lambda, kappa }, deterministic: false }
    }

    pub fn params(&self, theta_star: f64) -> OracleParams {
        OracleParams { theta_star, gamma: self.gamma, distance: self.distance.clone() }
    }

    pub fn responder(&self, theta_star: f64, seed: u64, index: u64) -> Result<Box<dyn Responder>, PipelineError> {
        let params = self.params(theta_star);
        if self.deterministic {
            Ok(Box::new(DeterministicResponder::with_params(params)))
        } else {
            let r = SimulatedResponder::new(params, substream(seed, 1, index)).map_err(crate::bisect::BisectError::from)?;
            Ok(Box::new(r))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlLhfConfig {
    pub epsilon: f64,
    pub delta: f64,
    #[serde(default = "two")]
    pub rho: f64,
    /// Refinement box half-width `β̄`.
    pub half_width: f64,
    pub n1: usize,
    #[serde(default)]
    pub lambda_rule: LambdaRule,
    #[serde(default)]
    pub lasso: LassoOptions,
    #[serde(default)]
    pub template: MapbTemplate,
    pub oracle: OracleSpec,
    /// Coordinates refined whether or not stage 1 selects them.
    #[serde(default)]
    pub forced: Vec<usize>,
    /// Use the true support instead of the Lasso's (simulation only).
    #[serde(default)]
    pub oracle_support: bool,
}

fn two() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportMismatch {
    pub missed: Vec<usize>,
    pub extra: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlLhfReport {
    pub theta_hat: Vec<f64>,
    pub n1: usize,
    pub n2: u64,
    pub support: Vec<usize>,
    pub support_mismatch: Option<SupportMismatch>,
    pub stage1_lambda: f64,
    pub stage1_estimate: Vec<f64>,
    pub dims: Vec<DimensionReport>,
    pub l2_error: f64,
    pub linf_error: f64,
    pub stage1_l2_error: f64,
    pub lnca: Option<LncaVerdict>,
}

impl SlLhfReport {
    pub fn total_samples(&self) -> u64 {
        self.n1 as u64 + self.n2
    }
}

fn mismatch(found: &[usize], truth: &[usize]) -> Option<SupportMismatch> {
    let missed: Vec<usize> = truth.iter().copied().filter(|j| !found.contains(j)).collect();
    let extra: Vec<usize> = found.iter().copied().filter(|j| !truth.contains(j)).collect();
    (!missed.is_empty() || !extra.is_empty()).then_some(SupportMismatch { missed, extra })
}

/// Runs one refinement per planned coordinate. Coordinates outside the
/// support are zero.
pub fn refine<F>(plan: &AlignmentPlan, d: usize, mut make: F) -> Result<(Vec<f64>, Vec<DimensionReport>), PipelineError>
where
    F: FnMut(usize) -> Result<Box<dyn Responder>, PipelineError>,
{
    let mut theta = vec![0.0; d];
    let mut reports: Vec<Option<DimensionReport>> = vec![None; plan.support.len()];
    for &pos in &plan.order {
        let j = plan.support[pos];
        let config = plan.configs[pos].clone();
        let mut responder = make(j)?;
        let mut run = MapbRun::uniform(config.clone())?;
        let outcome = match run.drive(&mut responder)? {
            Drive::Finished(o) => o,
            Drive::Suspended => return Err(PipelineError::Pending(j)),
        };
        theta[j] = outcome.theta_hat;
        reports[pos] = Some(DimensionReport {
            coordinate: j,
            center: config.center,
            epsilon: config.epsilon,
            delta: config.delta,
            outcome,
            moves: run.moves().to_vec(),
        });
    }
    Ok((theta, reports.into_iter().map(|r| r.expect("every position refined")).collect()))
}

fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Simulated two-stage run: stage 1 on `n1` labels, then one comparison
/// refinement per selected coordinate. All randomness derives from `seed`.
pub fn sl_lhf_run(problem: &SparseProblem, config: &SlLhfConfig, seed: u64) -> Result<SlLhfReport, PipelineError> {
    let d = problem.d();
    let mut rng = substream(seed, 0, 0);
    let model = simulate_lasso(problem, config.n1, &config.lambda_rule, &config.lasso, &mut rng)?;
    let truth_support = problem.support();
    let mut support = if config.oracle_support { truth_support.clone() } else { model.support.clone() };
    for &j in &config.forced {
        if j >= d {
            return Err(PipelineError::Config(format!("forced coordinate {j} out of range for d={d}")));
        }
        if !support.contains(&j) {
            support.push(j);
        }
    }
    support.sort_unstable();
    let plan = AlignmentPlan::new(
        support.clone(),
        &model.coefficients,
        config.epsilon,
        config.delta,
        config.rho,
        config.half_width,
        &config.template,
    )?;
    let (theta_hat, dims) = refine(&plan, d, |j| config.oracle.responder(problem.truth[j], seed, j as u64))?;
    let n2 = dims.iter().map(|r| r.outcome.total_comparisons).sum();
    let linf_error = theta_hat.iter().zip(&problem.truth).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let lnca = (!support.is_empty()).then(|| lnca_check(problem.sigma, support.len(), config.template.kappa, config.epsilon));
    Ok(SlLhfReport {
        l2_error: l2(&theta_hat, &problem.truth),
        stage1_l2_error: l2(&model.coefficients, &problem.truth),
        linf_error,
        theta_hat,
        n1: config.n1,
        n2,
        support_mismatch: mismatch(&model.support, &truth_support),
        support,
        stage1_lambda: model.lambda_used,
        stage1_estimate: model.coefficients,
        dims,
        lnca,
    })
}
