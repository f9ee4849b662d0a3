//! Fitting the choice model to recorded answers.
//!
//! Correct-answer probability at distance `r` from the truth is modelled as
//! `1/(1 + exp(−λ̃·r^κ))`. Comparison data identifies only the ratio
//! `λ̃ = λ_Δ/γ`, so that is what gets estimated. The noise level of direct
//! estimates is fitted separately.

use std::collections::BTreeMap;
use std::io::Read;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::choice::pow_kappa;
use crate::rng::stream;

#[derive(Debug, Error)]
pub enum CalibrateError {
    #[error("no records")]
    Empty,
    #[error("grid is empty or has non-finite values")]
    BadGrid,
    #[error("need at least 2 estimate records, got {0}")]
    TooFew(usize),
    #[error("non-finite value in record {0}")]
    NonFinite(usize),
    #[error("n_resamples must be at least 1")]
    NoResamples,
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// One answered comparison: the query midpoint, the truth and whether the
/// answer was the correct candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRecord {
    pub theta: f64,
    pub theta_star: f64,
    #[serde(with = "as_int")]
    pub correct: bool,
}

/// One direct estimate of a known quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub y: f64,
    pub theta_star: f64,
}

mod as_int {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(*v as u8)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        let raw = String::deserialize(d)?;
        match raw.trim() {
            "1" | "true" => Ok(true),
            "0" | "false" => Ok(false),
            other => Err(serde::de::Error::custom(format!("correct must be 0 or 1, got {other:?}"))),
        }
    }
}

pub fn read_comparisons<R: Read>(reader: R) -> Result<Vec<ComparisonRecord>, CalibrateError> {
    let mut rdr = csv::Reader::from_reader(reader);
    Ok(rdr.deserialize().collect::<Result<_, _>>()?)
}

pub fn read_estimates<R: Read>(reader: R) -> Result<Vec<EstimateRecord>, CalibrateError> {
    let mut rdr = csv::Reader::from_reader(reader);
    Ok(rdr.deserialize().collect::<Result<_, _>>()?)
}

/// `κ ∈ {0, 0.01, …, 1}`.
pub fn default_kappa_grid() -> Vec<f64> {
    (0..=100).map(|i| i as f64 / 100.0).collect()
}

/// `λ̃ ∈ {0, 0.002, …, 0.5}`.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..=250).map(|i| i as f64 * 0.002).collect()
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp().ln_1p()
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceFit {
    pub kappa: f64,
    pub lambda_tilde: f64,
    pub loglik: f64,
    /// The data cannot pin down both parameters: every answer agrees, or
    /// the best fit has `λ̃ = 0` where the likelihood ignores `κ`.
    pub degenerate: bool,
}

/// Correct/wrong counts per distinct distance.
struct Grouped {
    distance: Vec<f64>,
    correct: Vec<f64>,
    wrong: Vec<f64>,
}

fn group(records: &[ComparisonRecord]) -> Result<Grouped, CalibrateError> {
    let mut by: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        let d = (r.theta - r.theta_star).abs();
        if !d.is_finite() {
            return Err(CalibrateError::NonFinite(i));
        }
        let e = by.entry(d.to_bits()).or_default();
        if r.correct {
            e.0 += 1.0;
        } else {
            e.1 += 1.0;
        }
    }
    let mut g = Grouped { distance: Vec::new(), correct: Vec::new(), wrong: Vec::new() };
    for (bits, (c, w)) in by {
        g.distance.push(f64::from_bits(bits));
        g.correct.push(c);
        g.wrong.push(w);
    }
    Ok(g)
}

/// Log-likelihood of `records` at one parameter pair.
pub fn choice_loglik(records: &[ComparisonRecord], kappa: f64, lambda_tilde: f64) -> f64 {
    records
        .iter()
        .map(|r| {
            let x = lambda_tilde * pow_kappa((r.theta - r.theta_star).abs(), kappa);
            if r.correct {
                -softplus(-x)
            } else {
                -softplus(x)
            }
        })
        .sum()
}

/// Grid maximum likelihood. Ties go to the smallest `κ`, then the smallest `λ̃`.
pub fn fit_choice_model(
    records: &[ComparisonRecord],
    kappa_grid: &[f64],
    lambda_grid: &[f64],
) -> Result<ChoiceFit, CalibrateError> {
    if records.is_empty() {
        return Err(CalibrateError::Empty);
    }
    let ok = |g: &[f64]| !g.is_empty() && g.iter().all(|v| v.is_finite() && *v >= 0.0);
    if !ok(kappa_grid) || !ok(lambda_grid) {
        return Err(CalibrateError::BadGrid);
    }
    let mut kappas = kappa_grid.to_vec();
    kappas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut lambdas = lambda_grid.to_vec();
    lambdas.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let g = group(records)?;
    let mut best = (kappas[0], lambdas[0], f64::NEG_INFINITY);
    let mut x = vec![0.0; g.distance.len()];
    for &k in &kappas {
        for (xi, d) in x.iter_mut().zip(&g.distance) {
            *xi = pow_kappa(*d, k);
        }
        for &l in &lambdas {
            let mut ll = 0.0;
            for i in 0..x.len() {
                let t = l * x[i];
                ll -= g.correct[i] * softplus(-t) + g.wrong[i] * softplus(t);
            }
            if ll > best.2 {
                best = (k, l, ll);
            }
        }
    }
    let uniform = g.correct.iter().sum::<f64>() == 0.0 || g.wrong.iter().sum::<f64>() == 0.0;
    Ok(ChoiceFit { kappa: best.0, lambda_tilde: best.1, loglik: best.2, degenerate: uniform || best.1 == 0.0 })
}

/// `σ̂ = sqrt(Σ(y − θ*)²/(N − 1))`.
pub fn estimate_sigma(records: &[EstimateRecord]) -> Result<f64, CalibrateError> {
    if records.len() < 2 {
        return Err(CalibrateError::TooFew(records.len()));
    }
    let mut ss = 0.0;
    for (i, r) in records.iter().enumerate() {
        let e = r.y - r.theta_star;
        if !e.is_finite() {
            return Err(CalibrateError::NonFinite(i));
        }
        ss += e * e;
    }
    Ok((ss / (records.len() - 1) as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub n_resamples: usize,
    /// Resamples where the estimator failed; they are left out.
    pub n_failed: usize,
    pub mean: Vec<f64>,
    /// Sample variance across successful resamples; zero with fewer than two.
    pub variance: Vec<f64>,
    /// Set when fewer than two resamples succeeded.
    pub single_resample: bool,
}

/// Resamples `records` with replacement `n_resamples` times and summarizes
/// the estimator's outputs.
pub fn bootstrap<T, E, F>(records: &[T], n_resamples: usize, seed: u64, estimator: F) -> Result<BootstrapSummary, CalibrateError>
where
    T: Clone,
    F: Fn(&[T]) -> Result<Vec<f64>, E>,
{
    if n_resamples == 0 {
        return Err(CalibrateError::NoResamples);
    }
    if records.is_empty() {
        return Err(CalibrateError::Empty);
    }
    let mut rng = stream(seed, 0);
    let n = records.len();
    let mut outputs: Vec<Vec<f64>> = Vec::with_capacity(n_resamples);
    let mut failed = 0;
    let mut sample = Vec::with_capacity(n);
    for _ in 0..n_resamples {
        sample.clear();
        sample.extend((0..n).map(|_| records[rng.random_range(0..n)].clone()));
        match estimator(&sample) {
            Ok(v) => outputs.push(v),
            Err(_) => failed += 1,
        }
    }
    let k = outputs.first().map_or(0, |v| v.len());
    let count = outputs.len() as f64;
    let mean: Vec<f64> = (0..k).map(|j| outputs.iter().map(|o| o[j]).sum::<f64>() / count).collect();
    let variance: Vec<f64> = if outputs.len() < 2 {
        vec![0.0; k]
    } else {
        (0..k).map(|j| outputs.iter().map(|o| (o[j] - mean[j]).powi(2)).sum::<f64>() / (count - 1.0)).collect()
    };
    Ok(BootstrapSummary { n_resamples, n_failed: failed, mean, variance, single_resample: outputs.len() < 2 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub kappa_hat: f64,
    pub lambda_tilde_hat: f64,
    pub sigma_hat: f64,
    pub loglik: f64,
    pub degenerate: bool,
    /// Bootstrap of `(κ, λ̃)` over comparisons and of `σ` over estimates.
    pub choice_bootstrap: Option<BootstrapSummary>,
    pub sigma_bootstrap: Option<BootstrapSummary>,
}

impl CalibrationResult {
    /// Bootstrap variances in the order `κ, λ̃, σ`.
    pub fn variances(&self) -> Option<[f64; 3]> {
        let c = self.choice_bootstrap.as_ref()?;
        let s = self.sigma_bootstrap.as_ref()?;
        Some([c.variance[0], c.variance[1], s.variance[0]])
    }
}

/// Point fits plus bootstrap summaries (skipped when `n_resamples == 0`).
pub fn calibrate(
    comparisons: &[ComparisonRecord],
    estimates: &[EstimateRecord],
    kappa_grid: &[f64],
    lambda_grid: &[f64],
    n_resamples: usize,
    seed: u64,
) -> Result<CalibrationResult, CalibrateError> {
    let fit = fit_choice_model(comparisons, kappa_grid, lambda_grid)?;
    let sigma_hat = estimate_sigma(estimates)?;
    let (choice_bootstrap, sigma_bootstrap) = if n_resamples == 0 {
        (None, None)
    } else {
        let c = bootstrap(comparisons, n_resamples, seed, |s| {
            fit_choice_model(s, kappa_grid, lambda_grid).map(|f| vec![f.kappa, f.lambda_tilde])
        })?;
        let e = bootstrap(estimates, n_resamples, seed.wrapping_add(1), |s| estimate_sigma(s).map(|v| vec![v]))?;
        (Some(c), Some(e))
    };
    Ok(CalibrationResult {
        kappa_hat: fit.kappa,
        lambda_tilde_hat: fit.lambda_tilde,
        sigma_hat,
        loglik: fit.loglik,
        degenerate: fit.degenerate,
        choice_bootstrap,
        sigma_bootstrap,
    })
}

/// Layout of simulated dot-count comparisons: truths uniform on
/// `count_range`, candidates `spacing` apart, midpoint offset from the
/// truth uniform on `[−max_offset, max_offset]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDesign {
    pub count_range: (i64, i64),
    pub max_offset: i64,
}

impl Default for SyntheticDesign {
    fn default() -> Self {
        Self { count_range: (20, 100), max_offset: 30 }
    }
}

pub fn synthetic_comparisons<R: Rng + ?Sized>(
    n: usize,
    kappa: f64,
    lambda_tilde: f64,
    design: &SyntheticDesign,
    rng: &mut R,
) -> Vec<ComparisonRecord> {
    (0..n)
        .map(|_| {
            let truth = rng.random_range(design.count_range.0..=design.count_range.1) as f64;
            let offset = rng.random_range(-design.max_offset..=design.max_offset) as f64;
            let p = 1.0 / (1.0 + (-lambda_tilde * pow_kappa(offset.abs(), kappa)).exp());
            ComparisonRecord { theta: truth + offset, theta_star: truth, correct: rng.random_bool(p) }
        })
        .collect()
}

pub fn synthetic_estimates<R: Rng + ?Sized>(n: usize, sigma: f64, design: &SyntheticDesign, rng: &mut R) -> Vec<EstimateRecord> {
    let noise = Normal::new(0.0, sigma).expect("finite sigma");
    (0..n)
        .map(|_| {
            let truth = rng.random_range(design.count_range.0..=design.count_range.1) as f64;
            EstimateRecord { y: truth + noise.sample(rng), theta_star: truth }
        })
        .collect()
}
