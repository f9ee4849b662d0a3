//! Move budgets: how many horizontal moves and how long a vertical test.

use serde::{Deserialize, Serialize};

use super::vertical::hbar;

/// Constants of the horizontal budget. Defaults are all one with `ς = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StoppingConstants {
    pub r1: f64,
    pub r2: f64,
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub r_r: f64,
    pub varsigma: f64,
    /// Upper bound standing in for the unknown `|θ*|`; `None` means the
    /// prior half-width.
    pub theta_star_bound: Option<f64>,
}

impl Default for StoppingConstants {
    fn default() -> Self {
        Self {
            r1: 1.0,
            r2: 1.0,
            alpha: 1.0,
            beta1: 1.0,
            beta2: 1.0,
            r_r: 1.0,
            varsigma: 1.0,
            theta_star_bound: None,
        }
    }
}

impl StoppingConstants {
    pub fn validate(&self) -> Result<(), String> {
        let named = [
            ("r1", self.r1),
            ("r2", self.r2),
            ("alpha", self.alpha),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("r_r", self.r_r),
            ("varsigma", self.varsigma),
        ];
        for (name, v) in named {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("stopping constant {name} must be positive, got {v}"));
            }
        }
        if self.varsigma > 1.0 {
            return Err(format!("varsigma must be at most 1, got {}", self.varsigma));
        }
        if let Some(b) = self.theta_star_bound {
            if !(b > 0.0 && b.is_finite()) {
                return Err(format!("theta_star_bound must be positive, got {b}"));
            }
        }
        Ok(())
    }
}

/// Number of horizontal moves after which the posterior median is within
/// `epsilon` of the truth with probability `1 - delta`:
/// `max{4ς(1+ς)ln(8θb/(δε^ς))/(r₂α), 2ln(8β₂/δ)/r₁, ln(8β₂/δ)/r_R}`, rounded up, at least 1.
pub fn tau_horizontal(delta: f64, epsilon: f64, c: &StoppingConstants, theta_bound: f64) -> u64 {
    let vs = c.varsigma;
    let t1 = 4.0 * vs * (1.0 + vs) * (8.0 * theta_bound / (delta * epsilon.powf(vs))).ln() / (c.r2 * c.alpha);
    let t2 = 2.0 * (8.0 * c.beta2 / delta).ln() / c.r1;
    let t3 = (8.0 * c.beta2 / delta).ln() / c.r_r;
    ceil_count(t1.max(t2).max(t3))
}

fn ceil_count(x: f64) -> u64 {
    if x.is_nan() || x < 1.0 {
        1
    } else if x >= u64::MAX as f64 {
        u64::MAX
    } else {
        // guard against values like 72.00000000000001 from rounding noise
        let r = x.round();
        if (x - r).abs() < 1e-9 {
            r as u64
        } else {
            x.ceil() as u64
        }
    }
}

/// Inputs of the vertical budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerticalBudgetParams {
    pub kappa: f64,
    pub lambda_delta: f64,
    pub gamma: f64,
    /// Local radius `a`.
    pub a: f64,
    pub eta: f64,
    /// Returned when `kappa == 0`.
    pub kappa_zero_cap: u64,
}

/// `c = min{λ_Δ/(8γ ln 2), 1/(6a^κ)}`.
pub fn vertical_constant(p: &VerticalBudgetParams) -> f64 {
    let first = p.lambda_delta / (8.0 * p.gamma * std::f64::consts::LN_2);
    let second = 1.0 / (6.0 * p.a.powf(p.kappa));
    first.min(second)
}

/// Length of a vertical test beyond which the query point is declared
/// within `epsilon` of the truth: `max{τ₀, 8ln(1/δ)/(c²ε^{2κ})}` with
/// `τ₀ = max{s : ℏ_s/s ≥ cε^κ/2}`.
pub fn tau_vertical(delta: f64, epsilon: f64, p: &VerticalBudgetParams) -> u64 {
    if p.kappa == 0.0 {
        return p.kappa_zero_cap.max(1);
    }
    let c = vertical_constant(p);
    let target = c * epsilon.powf(p.kappa) / 2.0;
    let tau0 = last_above(target, p.eta);
    let main = 8.0 * (1.0 / delta).ln() / (c * c * epsilon.powf(2.0 * p.kappa));
    tau0.max(ceil_count(main)).max(1)
}

/// Largest `s >= 1` with `ℏ_s/s >= target`, or 0.
///
/// `ℏ_s/s` is decreasing for `s >= 2` whenever `η < 1`, so a doubling
/// search followed by bisection finds the last crossing; `s = 1` is checked
/// on its own.
fn last_above(target: f64, eta: f64) -> u64 {
    let ratio = |s: u64| hbar(s, eta) / s as f64;
    let mut best = if ratio(1) >= target { 1 } else { 0 };
    if ratio(2) < target {
        return best;
    }
    let mut lo = 2u64;
    let mut hi = 4u64;
    while ratio(hi) >= target {
        lo = hi;
        hi = hi.saturating_mul(2);
        if hi == u64::MAX {
            return hi;
        }
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ratio(mid) >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    best = best.max(lo);
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn vparams(kappa: f64) -> VerticalBudgetParams {
        VerticalBudgetParams { kappa, lambda_delta: 1.0, gamma: 1.0, a: 1.0, eta: 0.1, kappa_zero_cap: 500 }
    }

    #[test]
    fn horizontal_default_example() {
        let c = StoppingConstants::default();
        // 8θb/(δε) = 8/0.01 = 800; the other two terms are 2 ln 80 and ln 80
        let raw = 8.0 * 800f64.ln();
        assert_relative_eq!(raw, 53.48, epsilon = 0.01);
        assert!(raw > 2.0 * 80f64.ln());
        assert_eq!(tau_horizontal(0.1, 0.1, &c, 1.0), 54);
    }

    #[test]
    fn horizontal_monotone() {
        let c = StoppingConstants::default();
        assert!(tau_horizontal(0.01, 0.1, &c, 1.0) >= tau_horizontal(0.1, 0.1, &c, 1.0));
        assert!(tau_horizontal(0.1, 0.01, &c, 1.0) >= tau_horizontal(0.1, 0.1, &c, 1.0));
    }

    #[test]
    fn vertical_constant_branches() {
        assert_relative_eq!(vertical_constant(&vparams(1.0)), 1.0 / 6.0, epsilon = 1e-15);
        let mut p = vparams(1.0);
        p.a = 0.1;
        assert_relative_eq!(vertical_constant(&p), 1.0 / (8.0 * std::f64::consts::LN_2), epsilon = 1e-15);
    }

    #[test]
    fn kappa_zero_returns_cap() {
        assert_eq!(tau_vertical(0.1, 0.1, &vparams(0.0)), 500);
        assert_eq!(tau_vertical(0.1, 0.001, &vparams(0.0)), 500);
    }

    #[test]
    fn tau0_matches_linear_scan() {
        for (target, eta) in [(0.05, 0.1), (0.3, 0.5), (0.02, 0.05), (2.0, 0.1)] {
            let ratio = |s: u64| hbar(s, eta) / s as f64;
            let mut scan = 0;
            for s in 1..200_000u64 {
                if ratio(s) >= target {
                    scan = s;
                }
            }
            assert_eq!(last_above(target, eta), scan, "target {target}");
        }
    }

    #[test]
    fn tau0_dominates_when_epsilon_large() {
        let mut p = vparams(1.0);
        p.eta = 0.1;
        // with a huge ε the main term is tiny
        let t = tau_vertical(0.5, 50.0, &p);
        let c = vertical_constant(&p);
        assert_eq!(t, last_above(c * 50.0 / 2.0, 0.1).max(1));
        let main = 8.0 * 2f64.ln() / (c * c * 2500.0);
        assert!(main < 1.0);
    }
}
