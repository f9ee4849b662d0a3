//! What a session is asked to align.

use pbalign::bisect::BisectError;
use pbalign::pipeline::{AssConfig, MapbTemplate, OrthoBasis};
use pbalign::rng::stream;
use pbalign::MapbConfig;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::stimulus::MAX_DOTS;
use crate::{FieldError, ServiceError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    ScalarAlignment,
    DotCount,
    AssSample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TaskSpec {
    ScalarAlignment(ScalarSpec),
    DotCount(DotSpec),
    AssSample(AssSpec),
}

/// One bisection over the config's interval with a uniform prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarSpec {
    pub config: MapbConfig,
    /// Known target, used only for exported logs.
    #[serde(default)]
    pub truth: Option<f64>,
}

/// Counting task: the responder sees `truth` dots and picks between two
/// integer counts `granularity` apart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DotSpec {
    pub count_min: u32,
    pub count_max: u32,
    /// Candidate spacing `Δ`; must be even.
    pub granularity: u32,
    #[serde(default = "one")]
    pub epsilon: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Drawn uniformly from the range when absent.
    #[serde(default)]
    pub truth: Option<u32>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "dot_template")]
    pub template: MapbTemplate,
}

fn one() -> f64 {
    1.0
}

/// Library defaults with at most 200 answers at one count; a run that long
/// is sitting on a count the responder cannot tell apart from its neighbours.
pub fn dot_template() -> MapbTemplate {
    MapbTemplate { vertical_cap: 200, ..MapbTemplate::default() }
}

fn default_delta() -> f64 {
    0.05
}

/// Sample-level alignment: `samples` are the embeddings whose predictions
/// get compared, one sample at a time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssSpec {
    pub samples: Vec<Vec<f64>>,
    pub config: AssConfig,
    #[serde(default)]
    pub truth: Option<Vec<f64>>,
}

impl TaskSpec {
    pub fn kind(&self) -> TaskKind {
        match self {
            TaskSpec::ScalarAlignment(_) => TaskKind::ScalarAlignment,
            TaskSpec::DotCount(_) => TaskKind::DotCount,
            TaskSpec::AssSample(_) => TaskKind::AssSample,
        }
    }

    /// Fills in the seed and hidden count of a dot task.
    pub(crate) fn resolve(mut self) -> Self {
        if let TaskSpec::DotCount(d) = &mut self {
            let seed = *d.seed.get_or_insert_with(rand::random);
            if d.truth.is_none() && d.count_min <= d.count_max {
                d.truth = Some(stream(seed, 1).random_range(d.count_min..=d.count_max));
            }
        }
        self
    }

    /// The spec with everything that reveals the target removed.
    pub(crate) fn redacted(&self) -> Self {
        let mut s = self.clone();
        match &mut s {
            TaskSpec::ScalarAlignment(x) => x.truth = None,
            TaskSpec::DotCount(x) => {
                x.truth = None;
                x.seed = None;
            }
            TaskSpec::AssSample(x) => x.truth = None,
        }
        s
    }

    pub fn validate(&self) -> Result<(), ServiceError> {
        let mut errs = Vec::new();
        macro_rules! err {
            ($field:expr, $msg:expr) => {
                errs.push(FieldError { field: $field.into(), message: $msg })
            };
        }
        match self {
            TaskSpec::ScalarAlignment(s) => {
                if let Err(e) = s.config.validate() {
                    err!("config", config_message(e));
                }
                if s.truth.is_some_and(|t| !(t >= s.config.lower() && t <= s.config.upper())) {
                    err!("truth", "outside the search interval".into());
                }
            }
            TaskSpec::DotCount(d) => {
                if d.count_min >= d.count_max {
                    err!("count_max", format!("must exceed count_min ({})", d.count_min));
                }
                if d.count_max > MAX_DOTS {
                    err!("count_max", format!("at most {MAX_DOTS}"));
                }
                if d.granularity == 0 || d.granularity % 2 == 1 {
                    err!("granularity", format!("must be a positive even integer, got {}", d.granularity));
                }
                if !(d.epsilon >= 1.0 && d.epsilon.is_finite()) {
                    err!("epsilon", format!("must be at least 1 on integer counts, got {}", d.epsilon));
                }
                if !(d.delta > 0.0 && d.delta < 1.0) {
                    err!("delta", format!("must lie in (0, 1), got {}", d.delta));
                }
                if d.truth.is_some_and(|t| t < d.count_min || t > d.count_max) {
                    err!("truth", "outside the count range".into());
                }
                if errs.is_empty() {
                    if let Err(e) = d.mapb_config().validate() {
                        err!("template", config_message(e));
                    }
                }
            }
            TaskSpec::AssSample(a) => {
                if let Err(e) = OrthoBasis::new(a.samples.clone(), a.config.max_condition) {
                    err!("samples", e.to_string());
                }
                let s = a.samples.len();
                if a.config.center.as_ref().is_some_and(|c| c.len() != s) {
                    err!("config.center", format!("need {s} entries"));
                }
                if a.truth.as_ref().is_some_and(|t| t.len() != s) {
                    err!("truth", format!("need {s} entries"));
                }
                if !(a.config.epsilon_step > 0.0) {
                    err!("config.epsilon_step", "must be positive".into());
                }
                if !(a.config.delta > 0.0 && a.config.delta < 1.0) {
                    err!("config.delta", "must lie in (0, 1)".into());
                }
                if !(a.config.half_width > 0.0) {
                    err!("config.half_width", "must be positive".into());
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ServiceError::Invalid(errs))
        }
    }
}

fn config_message(e: BisectError) -> String {
    match e {
        BisectError::Config(m) => m,
        other => other.to_string(),
    }
}

impl DotSpec {
    /// Bisection over the count range on the integer lattice.
    pub fn mapb_config(&self) -> MapbConfig {
        let lo = self.count_min as f64;
        let hi = self.count_max as f64;
        let mut c = self.template.build(self.epsilon, self.delta, (lo + hi) / 2.0, (hi - lo) / 2.0);
        c.granularity = self.granularity as f64;
        c.lattice = Some(1.0);
        c
    }
}
