use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::bisect::{HorizontalRule, MapbConfig, MapbOutcome, MoveRecord, StoppingConstants};

/// Settings shared by every one-dimensional refinement. Precision,
/// confidence, center and width are filled in per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MapbTemplate {
    pub eta: f64,
    pub p: f64,
    /// Candidate spacing as a multiple of the per-coordinate precision.
    pub granularity_ratio: f64,
    /// Local radius; `None` means `sqrt(ε_j·β̄)`.
    pub a: Option<f64>,
    pub kappa: f64,
    pub lambda_delta: f64,
    pub gamma: f64,
    pub stopping: StoppingConstants,
    pub horizontal_rule: HorizontalRule,
    pub vertical_cap: u64,
    pub kappa_zero_cap: u64,
    pub move_cap: u64,
}

impl Default for MapbTemplate {
    fn default() -> Self {
        let base = MapbConfig::new(0.1, 0.1, 1.0);
        Self {
            eta: base.eta,
            p: base.p,
            granularity_ratio: 1.0,
            a: None,
            kappa: base.kappa,
            lambda_delta: base.lambda_delta,
            gamma: base.gamma,
            stopping: base.stopping,
            horizontal_rule: base.horizontal_rule,
            vertical_cap: base.vertical_cap,
            kappa_zero_cap: base.kappa_zero_cap,
            move_cap: base.move_cap,
        }
    }
}

impl MapbTemplate {
    /// Config over `[center ± half_width]`.
    pub fn build(&self, epsilon: f64, delta: f64, center: f64, half_width: f64) -> MapbConfig {
        let mut c = MapbConfig::new(epsilon, delta, half_width);
        c.center = center;
        c.granularity = self.granularity_ratio * epsilon;
        if let Some(a) = self.a {
            c.a = a;
        }
        c.eta = self.eta;
        c.p = self.p;
        c.kappa = self.kappa;
        c.lambda_delta = self.lambda_delta;
        c.gamma = self.gamma;
        c.stopping = self.stopping.clone();
        c.horizontal_rule = self.horizontal_rule;
        c.vertical_cap = self.vertical_cap;
        c.kappa_zero_cap = self.kappa_zero_cap;
        c.move_cap = self.move_cap;
        c
    }
}

/// Which coordinates get refined and how.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentPlan {
    pub support: Vec<usize>,
    /// One config per entry of `support`.
    pub configs: Vec<MapbConfig>,
    pub rho: f64,
    pub half_width: f64,
    /// Refinement order as positions into `support`.
    pub order: Vec<usize>,
}

impl AlignmentPlan {
    /// Each coordinate gets precision `ε/s^{1/ϱ}` and confidence `δ/s`, so
    /// that all of them holding puts the ℓ_ϱ error within `ε` with
    /// probability `1 − δ`.
    pub fn new(
        support: Vec<usize>,
        centers: &[f64],
        epsilon: f64,
        delta: f64,
        rho: f64,
        half_width: f64,
        template: &MapbTemplate,
    ) -> Result<Self, PipelineError> {
        if !(rho >= 1.0) {
            return Err(PipelineError::Config(format!("norm order must be at least 1, got {rho}")));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(PipelineError::Config(format!("refinement half-width must be positive, got {half_width}")));
        }
        let s = support.len().max(1) as f64;
        let eps_j = Self::per_dimension_epsilon(epsilon, support.len(), rho);
        let configs: Vec<MapbConfig> =
            support.iter().map(|&j| template.build(eps_j, delta / s, centers[j], half_width)).collect();
        for c in &configs {
            c.validate()?;
        }
        let order = (0..support.len()).collect();
        Ok(Self { support, configs, rho, half_width, order })
    }

    pub fn per_dimension_epsilon(epsilon: f64, s: usize, rho: f64) -> f64 {
        epsilon / (s.max(1) as f64).powf(1.0 / rho)
    }

    pub fn with_order(mut self, order: Vec<usize>) -> Result<Self, PipelineError> {
        let mut sorted = order.clone();
        sorted.sort_unstable();
        if sorted != (0..self.support.len()).collect::<Vec<_>>() {
            return Err(PipelineError::Config("order must be a permutation of the support positions".into()));
        }
        self.order = order;
        Ok(self)
    }
}

/// Result of refining one coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionReport {
    pub coordinate: usize,
    pub center: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub outcome: MapbOutcome,
    pub moves: Vec<MoveRecord>,
}
