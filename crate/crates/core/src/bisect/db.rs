use serde::{Deserialize, Serialize};

use super::BisectError;
use crate::choice::{ComparisonQuery, Responder, Response};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbConfig {
    pub epsilon: f64,
    pub granularity: f64,
    pub beta_theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbResult {
    pub theta_hat: f64,
    pub rounds: u64,
}

/// Plain bisection on `[-β, β]`: each answer halves the interval, and the
/// midpoint is returned once the interval is no wider than `ε`.
pub fn db_align<R: Responder + ?Sized>(config: &DbConfig, responder: &mut R) -> Result<DbResult, BisectError> {
    if !(config.epsilon > 0.0 && config.epsilon.is_finite()) {
        return Err(BisectError::Config(format!("epsilon must be positive, got {}", config.epsilon)));
    }
    if !(config.beta_theta > 0.0 && config.beta_theta.is_finite()) {
        return Err(BisectError::Config(format!("beta_theta must be positive, got {}", config.beta_theta)));
    }
    if !responder.is_deterministic() {
        return Err(BisectError::NonDeterministic(responder.tag().to_string()));
    }
    let (mut lo, mut hi) = (-config.beta_theta, config.beta_theta);
    let mut rounds = 0u64;
    while hi - lo > config.epsilon {
        let theta = 0.5 * (lo + hi);
        let query = ComparisonQuery::new(rounds, theta, config.granularity)?;
        match responder.respond(&query) {
            Response::Answer(c) if c.is_plus() => lo = theta,
            Response::Answer(_) => hi = theta,
            Response::Pending => return Err(BisectError::Pending(rounds)),
        }
        rounds += 1;
    }
    Ok(DbResult { theta_hat: 0.5 * (lo + hi), rounds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::choice::{DeterministicResponder, OracleParams, SimulatedResponder};
    use crate::rng::stream;

    fn bound(beta: f64, eps: f64) -> u64 {
        (beta / eps).log2().ceil() as u64 + 1
    }

    #[test]
    fn power_of_two_example() {
        let cfg = DbConfig { epsilon: 2f64.powi(-10), granularity: 1e-6, beta_theta: 1.0 };
        let r = db_align(&cfg, &mut DeterministicResponder::new(0.3)).unwrap();
        assert!(r.rounds <= 11);
        assert!((r.theta_hat - 0.3).abs() <= cfg.epsilon);
    }

    #[test]
    fn center_truth_converges_monotonically() {
        let mut last = f64::INFINITY;
        for e in 1..20 {
            let cfg = DbConfig { epsilon: 2f64.powi(-e), granularity: 1e-9, beta_theta: 1.0 };
            let r = db_align(&cfg, &mut DeterministicResponder::new(0.0)).unwrap();
            assert!(r.theta_hat.abs() <= cfg.epsilon);
            assert!(r.theta_hat.abs() <= last);
            last = r.theta_hat.abs();
        }
    }

    #[test]
    fn round_bound_on_random_truths() {
        use rand::Rng;
        let mut rng = stream(5, 0);
        let cfg = DbConfig { epsilon: 0.01, granularity: 1e-6, beta_theta: 8.0 };
        for _ in 0..100 {
            let t: f64 = rng.random_range(-8.0..8.0);
            let r = db_align(&cfg, &mut DeterministicResponder::new(t)).unwrap();
            assert!(r.rounds <= bound(8.0, 0.01));
            assert!((r.theta_hat - t).abs() <= 0.01);
        }
    }

    #[test]
    fn refuses_noisy_responder() {
        let cfg = DbConfig { epsilon: 0.1, granularity: 0.1, beta_theta: 1.0 };
        let mut r = SimulatedResponder::new(OracleParams::euclidean(0.2, 1.0), stream(1, 1)).unwrap();
        assert!(matches!(db_align(&cfg, &mut r), Err(BisectError::NonDeterministic(_))));
    }
}
