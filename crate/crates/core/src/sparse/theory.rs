use serde::{Deserialize, Serialize};

use super::SparseError;

/// Constants of the support-recovery guarantee for the Lagrangian Lasso.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryParams {
    pub sigma: f64,
    /// Smallest nonzero coefficient magnitude.
    pub theta_min: f64,
    /// Lower eigenvalue of `X_SᵀX_S/n`.
    pub c_min: f64,
    /// Mutual incoherence.
    pub alpha1: f64,
    /// ℓ∞ curvature.
    pub alpha2: f64,
    /// Sub-Gaussian tail constant.
    pub c: f64,
    pub s: usize,
    pub d: usize,
}

impl RecoveryParams {
    /// Values that hold with high probability for i.i.d. standard normal designs.
    pub fn gaussian(sigma: f64, theta_min: f64, s: usize, d: usize) -> Self {
        Self { sigma, theta_min, c_min: 1.0, alpha1: 0.5, alpha2: 1.0, c: 1.0, s, d }
    }

    pub fn validate(&self) -> Result<(), SparseError> {
        let pos = [
            ("sigma", self.sigma),
            ("theta_min", self.theta_min),
            ("c_min", self.c_min),
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("C", self.c),
        ];
        for (name, v) in pos {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SparseError::BadParams(format!("{name} must be positive, got {v}")));
            }
        }
        if self.alpha1 >= 1.0 {
            return Err(SparseError::BadParams(format!("alpha1 must be below 1, got {}", self.alpha1)));
        }
        if self.s == 0 || self.s >= self.d {
            return Err(SparseError::BadParams(format!("need 0 < s < d, got s={} d={}", self.s, self.d)));
        }
        Ok(())
    }

    /// `ζ = ¼·min{√c_min/(σβ̲), α₂(1−α₁)/(2Cσβ̲)}`.
    pub fn zeta(&self) -> f64 {
        let sb = self.sigma * self.theta_min;
        let first = self.c_min.sqrt() / sb;
        let second = self.alpha2 * (1.0 - self.alpha1) / (2.0 * self.c * sb);
        0.25 * first.min(second)
    }

    /// `λ_n = 2Cσ/(1−α₁)·(√(2 ln(d−s)/n) + ζ)`.
    pub fn theoretical_lambda(&self, n: usize) -> f64 {
        let n = n.max(1) as f64;
        let root = (2.0 * ((self.d - self.s) as f64).ln() / n).sqrt();
        2.0 * self.c * self.sigma / (1.0 - self.alpha1) * (root + self.zeta())
    }

    /// ℓ∞ error bound on the support at the theoretical λ_n.
    pub fn linf_bound(&self, n: usize) -> f64 {
        let nf = n.max(1) as f64;
        let root = (2.0 * (self.s as f64).ln() / nf).sqrt();
        self.sigma / self.c_min.sqrt() * (root + self.zeta()) + self.theoretical_lambda(n) / self.alpha2
    }

    /// Probability bound `4e^{−nζ²/2}` that the guarantee fails.
    pub fn failure_probability(&self, n: usize) -> f64 {
        (4.0 * (-(n as f64) * self.zeta().powi(2) / 2.0).exp()).min(1.0)
    }

    /// Noisy-label count for exact support recovery with probability `1 − δ`.
    pub fn stage1_sample_size(&self, delta: f64) -> usize {
        let [a, b, c] = self.stage1_terms(delta);
        a.max(b).max(c).ceil() as usize
    }

    /// The three terms whose maximum is the stage-1 sample size.
    pub fn stage1_terms(&self, delta: f64) -> [f64; 3] {
        let s2 = self.sigma * self.sigma;
        let b2 = self.theta_min * self.theta_min;
        let t1 = 32.0 * s2 * (self.s as f64).ln() / (b2 * self.c_min);
        let denom = self.theta_min * self.alpha2 * (1.0 - self.alpha1);
        let t2 = 128.0 * self.c * self.c * s2 * ((self.d - self.s) as f64).ln() / (denom * denom);
        let t3 = 2.0 * (4.0 / delta).ln() / self.zeta().powi(2);
        [t1, t2, t3]
    }
}
