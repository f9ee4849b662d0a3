//! Demand model where noisy labels can flip the sign of the price
//! coefficient.

use std::io::Write;

use pbalign::pipeline::{sl_lhf_run, LambdaRule, MapbTemplate, OracleSpec, SlLhfConfig, SparseProblem};
use serde::{Deserialize, Serialize};

use crate::config::sweep_template;
use crate::matched::rep_seed;
use crate::{par_map, HarnessError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PricingConfig {
    pub d: usize,
    pub n: usize,
    /// Standard deviation of every feature, price included.
    pub feature_sd: f64,
    pub price_coefficient: f64,
    pub second_coefficient: f64,
    pub sigma: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub half_width: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub repetitions: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub lambda_rule: LambdaRule,
    pub template: MapbTemplate,
}

impl Default for PricingConfig {
    fn default() -> Self {
        Self {
            d: 1000,
            n: 2000,
            feature_sd: 100.0,
            price_coefficient: -0.5,
            second_coefficient: 5.0,
            sigma: 200.0,
            epsilon: 0.1,
            delta: 0.1,
            half_width: 2.0,
            kappa: 0.5,
            gamma: 1.0,
            repetitions: 100,
            master_seed: 0,
            lambda_rule: LambdaRule::default(),
            template: sweep_template(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingRep {
    pub seed: u64,
    pub sl_price: f64,
    pub sl_second: f64,
    pub two_stage_price: f64,
    pub two_stage_second: f64,
    pub comparisons: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingSummary {
    pub reps: Vec<PricingRep>,
    /// Repetitions where plain Lasso does not report a negative price
    /// coefficient.
    pub sl_wrong_sign: usize,
    pub two_stage_negative: usize,
}

/// Lasso on `n` labels, then comparison refinement of its support plus the
/// price coordinate, which the analyst always refines.
pub fn run_pricing(cfg: &PricingConfig) -> Result<PricingSummary, HarnessError> {
    if cfg.d < 2 || cfg.repetitions == 0 {
        return Err(HarnessError::Config("need d >= 2 and at least one repetition".into()));
    }
    let mut truth = vec![0.0; cfg.d];
    truth[0] = cfg.price_coefficient;
    truth[1] = cfg.second_coefficient;
    let problem = SparseProblem { truth, sigma: cfg.sigma, x_scale: cfg.feature_sd };
    let mut template = cfg.template.clone();
    template.kappa = cfg.kappa;
    template.gamma = cfg.gamma;
    let config = SlLhfConfig {
        epsilon: cfg.epsilon,
        delta: cfg.delta,
        rho: f64::INFINITY,
        half_width: cfg.half_width,
        n1: cfg.n,
        lambda_rule: cfg.lambda_rule.clone(),
        lasso: Default::default(),
        template,
        oracle: OracleSpec::kappa(cfg.gamma, 1.0, cfg.kappa),
        forced: vec![0],
        oracle_support: false,
    };
    let runs = par_map(cfg.repetitions, |r| {
        let seed = rep_seed(cfg.master_seed, r);
        sl_lhf_run(&problem, &config, seed).map(|rep| PricingRep {
            seed,
            sl_price: rep.stage1_estimate[0],
            sl_second: rep.stage1_estimate[1],
            two_stage_price: rep.theta_hat[0],
            two_stage_second: rep.theta_hat[1],
            comparisons: rep.n2,
        })
    });
    let reps = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(PricingSummary {
        sl_wrong_sign: reps.iter().filter(|r| !(r.sl_price < 0.0)).count(),
        two_stage_negative: reps.iter().filter(|r| r.two_stage_price < 0.0).count(),
        reps,
    })
}

/// Header: `seed,sl_price,sl_second,two_stage_price,two_stage_second,comparisons`.
pub fn write_pricing_csv<W: Write>(summary: &PricingSummary, w: W) -> Result<(), HarnessError> {
    let mut c = csv::Writer::from_writer(w);
    c.write_record(["seed", "sl_price", "sl_second", "two_stage_price", "two_stage_second", "comparisons"])?;
    for r in &summary.reps {
        c.write_record([
            r.seed.to_string(),
            r.sl_price.to_string(),
            r.sl_second.to_string(),
            r.two_stage_price.to_string(),
            r.two_stage_second.to_string(),
            r.comparisons.to_string(),
        ])?;
    }
    c.flush()?;
    Ok(())
}
