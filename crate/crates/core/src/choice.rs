//! Random-utility choice model and responders.
//!
//! A query at `θ` offers two candidates `θ ∓ Δ/2`. Each candidate's utility
//! is minus its distance to the hidden truth; a responder with Gumbel noise
//! of scale `γ` picks the upper candidate with logistic probability.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Gumbel};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::density::PiecewiseDensity;
use crate::rng::StreamRng;

#[derive(Debug, Error, PartialEq)]
pub enum ChoiceError {
    #[error("gamma must be positive and finite, got {0}")]
    BadGamma(f64),
    #[error("non-finite utility for query at {0}")]
    NonFinite(f64),
    #[error("granularity must be positive and finite, got {0}")]
    BadGranularity(f64),
    #[error("kappa must lie in [0, 1], got {0}")]
    BadKappa(f64),
    #[error("lambda must be positive, got {0}")]
    BadLambda(f64),
}

/// How far a parameter value is from the truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DistanceSpec {
    Euclidean1d,
    /// Mass of the prior between the two points.
    BoundedCdf { prior: PiecewiseDensity },
    /// Utility gap `λ·|θ-θ*|^κ` between the two candidates of a query at `θ`.
    ParametricKappa { lambda: f64, kappa: f64 },
}

impl DistanceSpec {
    pub fn distance(&self, a: f64, b: f64) -> f64 {
        match self {
            DistanceSpec::Euclidean1d => (a - b).abs(),
            DistanceSpec::BoundedCdf { prior } => (prior.cdf(a) - prior.cdf(b)).abs(),
            DistanceSpec::ParametricKappa { lambda, kappa } => lambda * pow_kappa((a - b).abs(), *kappa),
        }
    }

    pub fn validate(&self) -> Result<(), ChoiceError> {
        if let DistanceSpec::ParametricKappa { lambda, kappa } = self {
            if !(*kappa >= 0.0 && *kappa <= 1.0) {
                return Err(ChoiceError::BadKappa(*kappa));
            }
            if !(*lambda > 0.0 && lambda.is_finite()) {
                return Err(ChoiceError::BadLambda(*lambda));
            }
        }
        Ok(())
    }
}

/// `x^κ` with `0^0 = 1`.
pub(crate) fn pow_kappa(x: f64, kappa: f64) -> f64 {
    if kappa == 0.0 {
        1.0
    } else {
        x.powf(kappa)
    }
}

/// Hidden truth and noise level of a (simulated) responder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleParams {
    pub theta_star: f64,
    pub gamma: f64,
    pub distance: DistanceSpec,
}

impl OracleParams {
    pub fn euclidean(theta_star: f64, gamma: f64) -> Self {
        Self { theta_star, gamma, distance: DistanceSpec::Euclidean1d }
    }

    pub fn kappa(theta_star: f64, gamma: f64, lambda: f64, kappa: f64) -> Self {
        Self { theta_star, gamma, distance: DistanceSpec::ParametricKappa { lambda, kappa } }
    }

    pub fn validate(&self) -> Result<(), ChoiceError> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(ChoiceError::BadGamma(self.gamma));
        }
        self.distance.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Choice {
    Minus,
    Plus,
}

impl Choice {
    pub fn is_plus(self) -> bool {
        matches!(self, Choice::Plus)
    }
}

/// One pairwise question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonQuery {
    pub query_id: u64,
    pub theta: f64,
    pub granularity: f64,
    pub c_minus: f64,
    pub c_plus: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stimulus: Option<serde_json::Value>,
}

impl ComparisonQuery {
    pub fn new(query_id: u64, theta: f64, granularity: f64) -> Result<Self, ChoiceError> {
        if !(granularity > 0.0 && granularity.is_finite()) {
            return Err(ChoiceError::BadGranularity(granularity));
        }
        if !theta.is_finite() {
            return Err(ChoiceError::NonFinite(theta));
        }
        Ok(Self {
            query_id,
            theta,
            granularity,
            c_minus: theta - granularity / 2.0,
            c_plus: theta + granularity / 2.0,
            stimulus: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonAnswer {
    pub query_id: u64,
    pub choice: Choice,
    pub responder_tag: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

/// `u(θ) = -d(θ, θ*)`.
pub fn utility(theta: f64, params: &OracleParams) -> f64 {
    -params.distance.distance(theta, params.theta_star)
}

/// Signed utility gap `u(c+) - u(c-)` of a query.
pub fn utility_gap(query: &ComparisonQuery, params: &OracleParams) -> f64 {
    match &params.distance {
        DistanceSpec::ParametricKappa { lambda, kappa } => {
            let diff = params.theta_star - query.theta;
            if diff == 0.0 {
                0.0
            } else {
                diff.signum() * lambda * pow_kappa(diff.abs(), *kappa)
            }
        }
        _ => utility(query.c_plus, params) - utility(query.c_minus, params),
    }
}

/// Probability that the responder picks `c+`.
pub fn choice_probability_plus(query: &ComparisonQuery, params: &OracleParams) -> Result<f64, ChoiceError> {
    if !(params.gamma > 0.0 && params.gamma.is_finite()) {
        return Err(ChoiceError::BadGamma(params.gamma));
    }
    let gap = utility_gap(query, params);
    if !gap.is_finite() {
        return Err(ChoiceError::NonFinite(query.theta));
    }
    Ok(logistic(gap / params.gamma))
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// What a responder returns for a query.
#[derive(Debug, Clone, PartialEq)]
pub enum Response {
    Answer(Choice),
    /// No answer yet; the caller must suspend.
    Pending,
}

pub trait Responder {
    fn respond(&mut self, query: &ComparisonQuery) -> Response;

    /// True when every answer is the utility-maximizing candidate.
    fn is_deterministic(&self) -> bool {
        false
    }

    /// Number of `plus` answers among `n` independent repeats of `query`,
    /// for responders able to draw them in one go.
    fn respond_batch(&mut self, _query: &ComparisonQuery, _n: u64) -> Option<u64> {
        None
    }

    fn tag(&self) -> &str;
}

impl<R: Responder + ?Sized> Responder for &mut R {
    fn respond(&mut self, query: &ComparisonQuery) -> Response {
        (**self).respond(query)
    }
    fn is_deterministic(&self) -> bool {
        (**self).is_deterministic()
    }
    fn respond_batch(&mut self, query: &ComparisonQuery, n: u64) -> Option<u64> {
        (**self).respond_batch(query, n)
    }
    fn tag(&self) -> &str {
        (**self).tag()
    }
}

impl<R: Responder + ?Sized> Responder for Box<R> {
    fn respond(&mut self, query: &ComparisonQuery) -> Response {
        (**self).respond(query)
    }
    fn is_deterministic(&self) -> bool {
        (**self).is_deterministic()
    }
    fn respond_batch(&mut self, query: &ComparisonQuery, n: u64) -> Option<u64> {
        (**self).respond_batch(query, n)
    }
    fn tag(&self) -> &str {
        (**self).tag()
    }
}

/// Random-utility responder with seeded noise.
#[derive(Debug, Clone)]
pub struct SimulatedResponder {
    params: OracleParams,
    rng: StreamRng,
    gumbel_pairs: bool,
}

impl SimulatedResponder {
    pub fn new(params: OracleParams, rng: StreamRng) -> Result<Self, ChoiceError> {
        params.validate()?;
        Ok(Self { params, rng, gumbel_pairs: false })
    }

    /// Draw two Gumbel variates per answer instead of one Bernoulli.
    /// Same distribution; kept to check the logistic form.
    pub fn with_gumbel_pairs(mut self) -> Self {
        self.gumbel_pairs = true;
        self
    }

    pub fn params(&self) -> &OracleParams {
        &self.params
    }

    fn prob_plus(&self, query: &ComparisonQuery) -> f64 {
        choice_probability_plus(query, &self.params).expect("validated at construction")
    }
}

impl Responder for SimulatedResponder {
    fn respond(&mut self, query: &ComparisonQuery) -> Response {
        let plus = if self.gumbel_pairs {
            let g = Gumbel::new(0.0, self.params.gamma).expect("validated gamma");
            let gap = utility_gap(query, &self.params);
            // only the gap matters: u+ + g1 > u- + g2
            gap + g.sample(&mut self.rng) > g.sample(&mut self.rng)
        } else {
            self.rng.random_bool(self.prob_plus(query))
        };
        Response::Answer(if plus { Choice::Plus } else { Choice::Minus })
    }

    fn respond_batch(&mut self, query: &ComparisonQuery, n: u64) -> Option<u64> {
        if self.gumbel_pairs {
            return None;
        }
        let p = self.prob_plus(query);
        Some(Binomial::new(n, p).expect("probability in [0,1]").sample(&mut self.rng))
    }

    fn tag(&self) -> &str {
        if self.gumbel_pairs {
            "simulated-gumbel"
        } else {
            "simulated-rum"
        }
    }
}

/// Always names the candidate with the larger utility; ties go to `minus`.
#[derive(Debug, Clone)]
pub struct DeterministicResponder {
    params: OracleParams,
}

impl DeterministicResponder {
    pub fn new(theta_star: f64) -> Self {
        Self { params: OracleParams::euclidean(theta_star, 1.0) }
    }

    pub fn with_params(params: OracleParams) -> Self {
        Self { params }
    }

    fn answer(&self, query: &ComparisonQuery) -> Choice {
        if utility_gap(query, &self.params) > 0.0 {
            Choice::Plus
        } else {
            Choice::Minus
        }
    }
}

impl Responder for DeterministicResponder {
    fn respond(&mut self, query: &ComparisonQuery) -> Response {
        Response::Answer(self.answer(query))
    }

    fn is_deterministic(&self) -> bool {
        true
    }

    fn respond_batch(&mut self, query: &ComparisonQuery, n: u64) -> Option<u64> {
        Some(if self.answer(query).is_plus() { n } else { 0 })
    }

    fn tag(&self) -> &str {
        "deterministic"
    }
}

/// Answers supplied from outside (a human session). Reports
/// [`Response::Pending`] until an answer for the asked query is queued.
#[derive(Debug, Clone, Default)]
pub struct QueuedResponder {
    queue: VecDeque<(u64, Choice)>,
}

impl QueuedResponder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, query_id: u64, choice: Choice) {
        self.queue.push_back((query_id, choice));
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }
}

impl Responder for QueuedResponder {
    fn respond(&mut self, query: &ComparisonQuery) -> Response {
        match self.queue.front() {
            Some(&(id, choice)) if id == query.query_id => {
                self.queue.pop_front();
                Response::Answer(choice)
            }
            _ => Response::Pending,
        }
    }

    fn tag(&self) -> &str {
        "human-session"
    }
}
