//! Noisy bisection as a resumable state machine.

use serde::{Deserialize, Serialize};

use super::budget::{tau_horizontal, tau_vertical, StoppingConstants, VerticalBudgetParams};
use super::vertical::VerticalTest;
use super::BisectError;
use crate::choice::{Choice, ComparisonQuery, Responder, Response};
use crate::density::PiecewiseDensity;

/// When to stop moving horizontally.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum HorizontalRule {
    /// Fixed move count `τ→(δ, ε)`.
    TheoreticalTau,
    /// Stop once the shortest interval with posterior mass `1-δ` is no
    /// wider than `2ε`.
    #[default]
    PosteriorCredible,
}

fn default_vertical_cap() -> u64 {
    1_000_000
}
fn default_kappa_zero_cap() -> u64 {
    1_000
}
fn default_move_cap() -> u64 {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapbConfig {
    pub epsilon: f64,
    pub delta: f64,
    /// Distance between the two candidates of a query.
    pub granularity: f64,
    /// Local radius `a`, with `ε < a < β_Θ`.
    pub a: f64,
    pub eta: f64,
    /// Posterior update weight, `1/2 < p < 1 - η/2`.
    pub p: f64,
    /// Half-width of the search interval.
    pub beta_theta: f64,
    /// Center of the search interval.
    #[serde(default)]
    pub center: f64,
    pub kappa: f64,
    pub lambda_delta: f64,
    pub gamma: f64,
    #[serde(default)]
    pub stopping: StoppingConstants,
    #[serde(default)]
    pub horizontal_rule: HorizontalRule,
    /// Hard limit on a single vertical test.
    #[serde(default = "default_vertical_cap")]
    pub vertical_cap: u64,
    /// Vertical budget used when `kappa == 0`.
    #[serde(default = "default_kappa_zero_cap")]
    pub kappa_zero_cap: u64,
    /// Safety limit on horizontal moves.
    #[serde(default = "default_move_cap")]
    pub move_cap: u64,
    /// Restrict query points to multiples of this step (e.g. integer counts).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<f64>,
}

impl MapbConfig {
    /// Config on `[-β, β]` with `Δ = ε`, `a = sqrt(ε β)`, `η = 0.1`,
    /// `p = 0.75` and unit oracle parameters.
    pub fn new(epsilon: f64, delta: f64, beta_theta: f64) -> Self {
        Self {
            epsilon,
            delta,
            granularity: epsilon,
            a: (epsilon * beta_theta).sqrt(),
            eta: 0.1,
            p: 0.75,
            beta_theta,
            center: 0.0,
            kappa: 1.0,
            lambda_delta: 1.0,
            gamma: 1.0,
            stopping: StoppingConstants::default(),
            horizontal_rule: HorizontalRule::default(),
            vertical_cap: default_vertical_cap(),
            kappa_zero_cap: default_kappa_zero_cap(),
            move_cap: default_move_cap(),
            lattice: None,
        }
    }

    pub fn lower(&self) -> f64 {
        self.center - self.beta_theta
    }

    pub fn upper(&self) -> f64 {
        self.center + self.beta_theta
    }

    pub fn validate(&self) -> Result<(), BisectError> {
        let bad = |m: String| Err(BisectError::Config(m));
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !pos(self.epsilon) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if !pos(self.granularity) {
            return bad(format!("granularity must be positive, got {}", self.granularity));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return bad(format!("eta must lie in (0, 1), got {}", self.eta));
        }
        let p_c = 1.0 - self.eta / 2.0;
        if !(self.p > 0.5 && self.p < p_c) {
            return bad(format!("p must lie in (1/2, {p_c}), got {}", self.p));
        }
        if !pos(self.beta_theta) || !self.center.is_finite() {
            return bad(format!("beta_theta must be positive, got {}", self.beta_theta));
        }
        if !(self.a > self.epsilon && self.a < self.beta_theta) {
            return bad(format!(
                "local radius a must satisfy epsilon < a < beta_theta, got a={} epsilon={} beta_theta={}",
                self.a, self.epsilon, self.beta_theta
            ));
        }
        if !(self.kappa >= 0.0 && self.kappa <= 1.0) {
            return bad(format!("kappa must lie in [0, 1], got {}", self.kappa));
        }
        if !pos(self.lambda_delta) || !pos(self.gamma) {
            return bad("lambda_delta and gamma must be positive".into());
        }
        if self.vertical_cap == 0 || self.move_cap == 0 {
            return bad("caps must be at least 1".into());
        }
        if let Some(step) = self.lattice {
            if !pos(step) {
                return bad(format!("lattice step must be positive, got {step}"));
            }
        }
        self.stopping.validate().map_err(BisectError::Config)
    }

    fn vertical_params(&self) -> VerticalBudgetParams {
        VerticalBudgetParams {
            kappa: self.kappa,
            lambda_delta: self.lambda_delta,
            gamma: self.gamma,
            a: self.a,
            eta: self.eta,
            kappa_zero_cap: self.kappa_zero_cap,
        }
    }

    /// The three budgets this config implies.
    pub fn budgets(&self) -> Budgets {
        let bound = self.stopping.theta_star_bound.unwrap_or(self.beta_theta);
        Budgets {
            horizontal: tau_horizontal(self.delta, self.epsilon, &self.stopping, bound),
            local_moves: tau_horizontal(self.delta / 2.0, self.a, &self.stopping, bound),
            vertical: tau_vertical(self.delta / 2.0, self.epsilon, &self.vertical_params()).min(self.vertical_cap),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budgets {
    /// `τ→(δ, ε)`: move budget of the theoretical rule.
    pub horizontal: u64,
    /// `τ→(δ/2, a)`: moves after which a long vertical test ends the run.
    pub local_moves: u64,
    /// `τ↑(δ/2, ε)`: vertical length that ends the run once local.
    pub vertical: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    HorizontalBudget,
    CredibleInterval,
    VerticalEarlyStop,
    /// A vertical test hit the hard cap without deciding.
    VerticalCap,
    MoveCap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MoveEnd {
    Decided,
    VerticalEarlyStop,
    VerticalCap,
}

/// One horizontal position and how its vertical test ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoveRecord {
    pub k: u64,
    pub theta: f64,
    pub m: u64,
    pub s: i64,
    pub z: Option<i8>,
    pub end: MoveEnd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapbOutcome {
    pub theta_hat: f64,
    pub reason: Termination,
    pub horizontal_moves: u64,
    pub total_comparisons: u64,
}

/// What one submitted answer (or batch) changed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepReport {
    pub vertical_stopped: Option<i8>,
    pub moved_to: Option<f64>,
    pub finished: Option<MapbOutcome>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Drive {
    Finished(MapbOutcome),
    /// The responder had no answer; resume with the same run later.
    Suspended,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapbRun {
    config: MapbConfig,
    budgets: Budgets,
    density: PiecewiseDensity,
    k: u64,
    theta: f64,
    at_median: bool,
    test: VerticalTest,
    total: u64,
    next_query_id: u64,
    moves: Vec<MoveRecord>,
    outcome: Option<MapbOutcome>,
}

impl MapbRun {
    pub fn new(config: MapbConfig, prior: PiecewiseDensity) -> Result<Self, BisectError> {
        config.validate()?;
        let budgets = config.budgets();
        let test = VerticalTest::new(config.eta);
        let mut run = Self {
            config,
            budgets,
            density: prior,
            k: 0,
            theta: 0.0,
            at_median: true,
            test,
            total: 0,
            next_query_id: 0,
            moves: Vec::new(),
            outcome: None,
        };
        run.place();
        Ok(run)
    }

    /// Run with a uniform prior over the config's interval.
    pub fn uniform(config: MapbConfig) -> Result<Self, BisectError> {
        let prior = PiecewiseDensity::uniform(config.lower(), config.upper())?;
        Self::new(config, prior)
    }

    pub fn config(&self) -> &MapbConfig {
        &self.config
    }

    pub fn budgets(&self) -> Budgets {
        self.budgets
    }

    pub fn density(&self) -> &PiecewiseDensity {
        &self.density
    }

    pub fn horizontal_moves(&self) -> u64 {
        self.k
    }

    pub fn current_theta(&self) -> f64 {
        self.theta
    }

    pub fn vertical(&self) -> &VerticalTest {
        &self.test
    }

    pub fn total_comparisons(&self) -> u64 {
        self.total
    }

    pub fn moves(&self) -> &[MoveRecord] {
        &self.moves
    }

    pub fn outcome(&self) -> Option<&MapbOutcome> {
        self.outcome.as_ref()
    }

    pub fn is_finished(&self) -> bool {
        self.outcome.is_some()
    }

    fn snap(&self, x: f64) -> f64 {
        let (lo, hi) = (self.density.lower(), self.density.upper());
        match self.config.lattice {
            None => x,
            Some(step) => {
                let mut y = (x / step).round() * step;
                if y <= lo {
                    y = (lo / step).floor() * step + step;
                }
                if y >= hi {
                    y = (hi / step).ceil() * step - step;
                }
                y
            }
        }
    }

    /// Sets the next query point to the (snapped) posterior median.
    fn place(&mut self) {
        let med = self.density.median();
        self.theta = self.snap(med);
        self.at_median = self.theta == med;
        self.test = VerticalTest::new(self.config.eta);
    }

    /// The outstanding query, if the run is still going.
    pub fn current_query(&self) -> Option<ComparisonQuery> {
        if self.is_finished() {
            return None;
        }
        Some(ComparisonQuery::new(self.next_query_id, self.theta, self.config.granularity).expect("validated config"))
    }

    /// Answers that can be drawn at once without skipping any decision.
    fn batch_len(&self) -> u64 {
        let mut n = self.test.safe_steps();
        let m = self.test.steps();
        if self.k >= self.budgets.local_moves {
            n = n.min(self.budgets.vertical.saturating_sub(m));
        }
        n.min(self.config.vertical_cap.saturating_sub(m))
    }

    /// Records the answer to the outstanding query.
    pub fn submit(&mut self, query_id: u64, choice: Choice) -> Result<StepReport, BisectError> {
        if self.is_finished() {
            return Err(BisectError::Finished);
        }
        if query_id != self.next_query_id {
            return Err(BisectError::QueryMismatch { expected: Some(self.next_query_id), got: query_id });
        }
        self.apply(choice.is_plus() as u64, 1)
    }

    fn apply(&mut self, plus: u64, n: u64) -> Result<StepReport, BisectError> {
        let z = self.test.advance(plus, n)?;
        self.total += n;
        self.next_query_id += n;
        let mut report = StepReport::default();
        let m = self.test.steps();
        if let Some(z) = z {
            self.moves.push(MoveRecord {
                k: self.k,
                theta: self.theta,
                m,
                s: self.test.walk(),
                z: Some(z),
                end: MoveEnd::Decided,
            });
            let upd = self.density.update(self.theta, z > 0, self.config.p)?;
            if self.at_median {
                // exact up to the resolution of θ on the float grid
                let slack = 8.0 * f64::EPSILON * self.theta.abs().max(1.0) * self.density.density_at(self.theta);
                debug_assert!(
                    (upd.normalizer - 1.0).abs() < 1e-9 + slack,
                    "median update must preserve mass: {}",
                    upd.normalizer
                );
            }
            self.k += 1;
            report.vertical_stopped = Some(z);
            if let Some(reason) = self.horizontal_stop()? {
                let theta_hat = self.snap(self.density.median());
                report.finished = Some(self.finish(theta_hat, reason));
            } else {
                self.place();
                report.moved_to = Some(self.theta);
            }
        } else if self.k >= self.budgets.local_moves && m >= self.budgets.vertical {
            self.push_open_move(MoveEnd::VerticalEarlyStop);
            report.finished = Some(self.finish(self.theta, Termination::VerticalEarlyStop));
        } else if m >= self.config.vertical_cap {
            self.push_open_move(MoveEnd::VerticalCap);
            report.finished = Some(self.finish(self.theta, Termination::VerticalCap));
        }
        Ok(report)
    }

    fn push_open_move(&mut self, end: MoveEnd) {
        self.moves.push(MoveRecord {
            k: self.k,
            theta: self.theta,
            m: self.test.steps(),
            s: self.test.walk(),
            z: None,
            end,
        });
    }

    fn horizontal_stop(&self) -> Result<Option<Termination>, BisectError> {
        let reason = match self.config.horizontal_rule {
            HorizontalRule::TheoreticalTau if self.k >= self.budgets.horizontal => Some(Termination::HorizontalBudget),
            HorizontalRule::PosteriorCredible => {
                let (l, r) = self.density.shortest_interval(1.0 - self.config.delta)?;
                (r - l <= 2.0 * self.config.epsilon).then_some(Termination::CredibleInterval)
            }
            _ => None,
        };
        Ok(reason.or((self.k >= self.config.move_cap).then_some(Termination::MoveCap)))
    }

    fn finish(&mut self, theta_hat: f64, reason: Termination) -> MapbOutcome {
        let out = MapbOutcome { theta_hat, reason, horizontal_moves: self.k, total_comparisons: self.total };
        self.outcome = Some(out.clone());
        out
    }

    /// Pulls answers from `responder` until the run ends or the responder
    /// has nothing to say.
    pub fn drive<R: Responder + ?Sized>(&mut self, responder: &mut R) -> Result<Drive, BisectError> {
        loop {
            if let Some(o) = &self.outcome {
                return Ok(Drive::Finished(o.clone()));
            }
            let query = self.current_query().expect("running");
            let n = self.batch_len();
            if n >= 2 {
                if let Some(plus) = responder.respond_batch(&query, n) {
                    self.apply(plus, n)?;
                    continue;
                }
            }
            match responder.respond(&query) {
                Response::Answer(c) => {
                    self.apply(c.is_plus() as u64, 1)?;
                }
                Response::Pending => return Ok(Drive::Suspended),
            }
        }
    }

    /// Line-delimited trace: one record per horizontal position plus a
    /// final record carrying the termination reason.
    pub fn trace_jsonl(&self) -> String {
        let mut out = String::new();
        for mv in &self.moves {
            let line = serde_json::json!({
                "k": mv.k, "theta_k": mv.theta, "m": mv.m, "S": mv.s, "Z": mv.z, "reason": mv.end,
            });
            out.push_str(&line.to_string());
            out.push('\n');
        }
        if let Some(o) = &self.outcome {
            let line = serde_json::json!({
                "k": o.horizontal_moves, "theta_k": o.theta_hat, "m": serde_json::Value::Null,
                "S": serde_json::Value::Null, "Z": serde_json::Value::Null, "reason": o.reason,
                "total_comparisons": o.total_comparisons,
            });
            out.push_str(&line.to_string());
            out.push('\n');
        }
        out
    }
}

/// Runs `config` with a uniform prior to completion.
pub fn run_to_end<R: Responder + ?Sized>(config: MapbConfig, responder: &mut R) -> Result<(MapbOutcome, MapbRun), BisectError> {
    let mut run = MapbRun::uniform(config)?;
    match run.drive(responder)? {
        Drive::Finished(o) => Ok((o, run)),
        Drive::Suspended => Err(BisectError::Pending(run.next_query_id)),
    }
}
