//! Piecewise-constant posterior over a bounded search interval.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DensityError {
    #[error("interval must satisfy lo < hi with finite ends, got [{lo}, {hi}]")]
    BadInterval { lo: f64, hi: f64 },
    #[error("breakpoints must be strictly increasing and finite")]
    BadBreakpoints,
    #[error("expected {expected} segment densities, got {got}")]
    SegmentCount { expected: usize, got: usize },
    #[error("segment densities must be finite and positive")]
    NonPositive,
    #[error("query point {theta} is not strictly inside ({lo}, {hi})")]
    OutsideSupport { theta: f64, lo: f64, hi: f64 },
    #[error("update weight p must lie in [1/2, 1), got {0}")]
    BadWeight(f64),
    #[error("mass level must lie in (0, 1], got {0}")]
    BadMass(f64),
}

/// Density that is constant between consecutive breakpoints.
///
/// `densities[i]` applies on `[breakpoints[i], breakpoints[i + 1])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseDensity {
    breakpoints: Vec<f64>,
    densities: Vec<f64>,
}

/// Result of a multiplicative update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateReport {
    /// Total mass after reweighting and before renormalizing.
    pub normalizer: f64,
    /// Whether a new breakpoint was inserted.
    pub inserted: bool,
}

impl PiecewiseDensity {
    pub fn uniform(lo: f64, hi: f64) -> Result<Self, DensityError> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(DensityError::BadInterval { lo, hi });
        }
        Ok(Self { breakpoints: vec![lo, hi], densities: vec![1.0 / (hi - lo)] })
    }

    /// Builds a density from raw parts and normalizes it to unit mass.
    pub fn from_parts(breakpoints: Vec<f64>, densities: Vec<f64>) -> Result<Self, DensityError> {
        if breakpoints.len() < 2 {
            return Err(DensityError::BadBreakpoints);
        }
        if breakpoints.iter().any(|b| !b.is_finite()) || breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(DensityError::BadBreakpoints);
        }
        if densities.len() != breakpoints.len() - 1 {
            return Err(DensityError::SegmentCount { expected: breakpoints.len() - 1, got: densities.len() });
        }
        if densities.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(DensityError::NonPositive);
        }
        let mut out = Self { breakpoints, densities };
        let total = out.total_mass();
        for d in &mut out.densities {
            *d /= total;
        }
        Ok(out)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn densities(&self) -> &[f64] {
        &self.densities
    }

    pub fn lower(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn upper(&self) -> f64 {
        *self.breakpoints.last().expect("at least two breakpoints")
    }

    pub fn segment_count(&self) -> usize {
        self.densities.len()
    }

    fn segment_masses(&self) -> impl Iterator<Item = f64> + '_ {
        self.breakpoints.windows(2).zip(&self.densities).map(|(w, d)| (w[1] - w[0]) * d)
    }

    pub fn total_mass(&self) -> f64 {
        self.segment_masses().sum()
    }

    /// Index of the segment containing `x` (clamped to the support).
    fn segment_of(&self, x: f64) -> usize {
        let n = self.densities.len();
        match self.breakpoints.binary_search_by(|b| b.partial_cmp(&x).expect("finite")) {
            Ok(i) => i.min(n - 1),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 1),
        }
    }

    pub fn density_at(&self, x: f64) -> f64 {
        if x < self.lower() || x > self.upper() {
            return 0.0;
        }
        self.densities[self.segment_of(x)]
    }

    /// Cumulative masses at each breakpoint (`len = breakpoints.len()`).
    fn cumulative(&self) -> Vec<f64> {
        let mut acc = Vec::with_capacity(self.breakpoints.len());
        let mut s = 0.0;
        acc.push(0.0);
        for m in self.segment_masses() {
            s += m;
            acc.push(s);
        }
        acc
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.lower() {
            return 0.0;
        }
        if x >= self.upper() {
            return self.total_mass();
        }
        let i = self.segment_of(x);
        let below: f64 = self.segment_masses().take(i).sum();
        below + (x - self.breakpoints[i]) * self.densities[i]
    }

    pub fn mass_between(&self, a: f64, b: f64) -> f64 {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        self.cdf(b) - self.cdf(a)
    }

    fn quantile_with(&self, cum: &[f64], q: f64) -> f64 {
        let n = self.densities.len();
        if q <= 0.0 {
            return self.lower();
        }
        if q >= cum[n] {
            return self.upper();
        }
        // first breakpoint whose cumulative mass exceeds q
        let idx = cum.partition_point(|c| *c <= q);
        let i = idx.saturating_sub(1).min(n - 1);
        let x = self.breakpoints[i] + (q - cum[i]) / self.densities[i];
        x.clamp(self.breakpoints[i], self.breakpoints[i + 1])
    }

    /// Point below which the mass equals `q`.
    pub fn quantile(&self, q: f64) -> f64 {
        let cum = self.cumulative();
        self.quantile_with(&cum, q)
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5)
    }

    /// Multiplies the density by `2p` on the side indicated by `plus`
    /// (`[θ, hi]` when true) and by `2(1-p)` on the other, inserting `θ` as a
    /// breakpoint, then renormalizes.
    pub fn update(&mut self, theta: f64, plus: bool, p: f64) -> Result<UpdateReport, DensityError> {
        if !(p >= 0.5 && p < 1.0) {
            return Err(DensityError::BadWeight(p));
        }
        let (lo, hi) = (self.lower(), self.upper());
        if !(theta > lo && theta < hi) {
            return Err(DensityError::OutsideSupport { theta, lo, hi });
        }
        let i = self.segment_of(theta);
        let inserted = self.breakpoints[i] != theta;
        let split = if inserted {
            self.breakpoints.insert(i + 1, theta);
            let d = self.densities[i];
            self.densities.insert(i + 1, d);
            i + 1
        } else {
            i
        };
        let (up, down) = if plus { (2.0 * p, 2.0 * (1.0 - p)) } else { (2.0 * (1.0 - p), 2.0 * p) };
        for (j, d) in self.densities.iter_mut().enumerate() {
            *d *= if j >= split { up } else { down };
        }
        let normalizer = self.total_mass();
        for d in &mut self.densities {
            *d = (*d / normalizer).max(f64::MIN_POSITIVE);
        }
        Ok(UpdateReport { normalizer, inserted })
    }

    /// Shortest interval holding at least `mass` of the distribution.
    ///
    /// Width is piecewise linear when the interval slides with fixed mass,
    /// so an optimum has an endpoint on a breakpoint; every breakpoint is
    /// tried as a left and as a right end.
    pub fn shortest_interval(&self, mass: f64) -> Result<(f64, f64), DensityError> {
        if !(mass > 0.0 && mass <= 1.0) {
            return Err(DensityError::BadMass(mass));
        }
        let cum = self.cumulative();
        let total = *cum.last().expect("non-empty");
        let target = mass * total;
        let mut best = (self.lower(), self.upper());
        let tol = 1e-12 * total;
        for (i, &b) in self.breakpoints.iter().enumerate() {
            if cum[i] + target <= total + tol {
                let r = self.quantile_with(&cum, (cum[i] + target).min(total));
                if r - b < best.1 - best.0 {
                    best = (b, r);
                }
            }
            if cum[i] - target >= -tol {
                let l = self.quantile_with(&cum, (cum[i] - target).max(0.0));
                if b - l < best.1 - best.0 {
                    best = (l, b);
                }
            }
        }
        Ok(best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn median_update_matches_hand_arithmetic() {
        let mut d = PiecewiseDensity::uniform(0.0, 1.0).unwrap();
        let rep = d.update(0.5, true, 0.6).unwrap();
        assert!(rep.inserted);
        assert_relative_eq!(rep.normalizer, 1.0, epsilon = 1e-15);
        assert_relative_eq!(d.densities()[0], 0.8, epsilon = 1e-15);
        assert_relative_eq!(d.densities()[1], 1.2, epsilon = 1e-15);
        assert_relative_eq!(d.median(), 0.5 + 0.1 / 1.2, epsilon = 1e-14);
    }

    #[test]
    fn neutral_weight_is_identity() {
        let mut d = PiecewiseDensity::uniform(-1.0, 1.0).unwrap();
        d.update(0.3, false, 0.5).unwrap();
        assert!(d.densities().iter().all(|x| (x - 0.5).abs() < 1e-15));
    }

    #[test]
    fn off_median_update_renormalizes() {
        let mut d = PiecewiseDensity::uniform(0.0, 1.0).unwrap();
        let rep = d.update(0.25, true, 0.7).unwrap();
        assert_relative_eq!(rep.normalizer, 0.25 * 0.6 + 0.75 * 1.4, epsilon = 1e-15);
        assert_relative_eq!(d.total_mass(), 1.0, epsilon = 1e-14);
        // indicated side gained mass
        assert!(d.mass_between(0.25, 1.0) > 0.75);
    }

    #[test]
    fn rejects_points_outside_support() {
        let mut d = PiecewiseDensity::uniform(0.0, 1.0).unwrap();
        assert!(matches!(d.update(1.0, true, 0.6), Err(DensityError::OutsideSupport { .. })));
        assert!(matches!(d.update(0.5, true, 1.0), Err(DensityError::BadWeight(_))));
    }

    #[test]
    fn shortest_interval_of_peaked_density() {
        let d = PiecewiseDensity::from_parts(vec![0.0, 0.4, 0.6, 1.0], vec![0.25, 4.0, 0.25]).unwrap();
        // middle segment holds 0.8 of the mass
        let (l, r) = d.shortest_interval(0.8).unwrap();
        assert_relative_eq!(l, 0.4, epsilon = 1e-12);
        assert_relative_eq!(r, 0.6, epsilon = 1e-12);
        let (l, r) = d.shortest_interval(1.0).unwrap();
        assert_relative_eq!(r - l, 1.0, epsilon = 1e-12);
    }
}
