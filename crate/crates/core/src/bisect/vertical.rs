use serde::{Deserialize, Serialize};

use super::BisectError;

/// Boundary of the power-one test after `m` steps:
/// `sqrt(2m(ln(m+1) - ln η))`. Zero at `m = 0`.
pub fn hbar(m: u64, eta: f64) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let m = m as f64;
    (2.0 * m * ((m + 1.0).ln() - eta.ln())).sqrt()
}

/// Random walk of ±1 answers at one query point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerticalTest {
    m: u64,
    s: i64,
    eta: f64,
    outcome: Option<i8>,
}

impl VerticalTest {
    pub fn new(eta: f64) -> Self {
        Self { m: 0, s: 0, eta, outcome: None }
    }

    /// Resume from a recorded walk position.
    pub fn from_parts(m: u64, s: i64, eta: f64) -> Self {
        let mut t = Self { m, s, eta, outcome: None };
        t.check_stop();
        t
    }

    pub fn steps(&self) -> u64 {
        self.m
    }

    pub fn walk(&self) -> i64 {
        self.s
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn outcome(&self) -> Option<i8> {
        self.outcome
    }

    pub fn is_stopped(&self) -> bool {
        self.outcome.is_some()
    }

    fn check_stop(&mut self) {
        if self.m > 0 && (self.s.unsigned_abs() as f64) >= hbar(self.m, self.eta) {
            debug_assert!(self.s != 0, "boundary is positive for m >= 1");
            self.outcome = Some(self.s.signum() as i8);
        }
    }

    /// Adds one answer (`+1` for plus) and returns the outcome if the walk
    /// crossed the boundary.
    pub fn step(&mut self, plus: bool) -> Result<Option<i8>, BisectError> {
        if self.is_stopped() {
            return Err(BisectError::TestStopped);
        }
        self.m += 1;
        self.s += if plus { 1 } else { -1 };
        self.check_stop();
        Ok(self.outcome)
    }

    /// Steps that can be taken without any chance of crossing the boundary:
    /// `|S|` moves by at most one per step and the boundary never decreases.
    pub fn safe_steps(&self) -> u64 {
        if self.m == 0 || self.is_stopped() {
            return 0;
        }
        let gap = hbar(self.m, self.eta) - self.s.unsigned_abs() as f64;
        if gap <= 1.0 {
            0
        } else {
            (gap.ceil() as u64).saturating_sub(1)
        }
    }

    /// Applies `n` answers of which `plus` were plus. The caller guarantees
    /// `n <= safe_steps()` (or `n == 1`).
    pub fn advance(&mut self, plus: u64, n: u64) -> Result<Option<i8>, BisectError> {
        if self.is_stopped() {
            return Err(BisectError::TestStopped);
        }
        debug_assert!(plus <= n);
        debug_assert!(n <= 1 || n <= self.safe_steps());
        self.m += n;
        self.s += 2 * plus as i64 - n as i64;
        self.check_stop();
        Ok(self.outcome)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn boundary_values() {
        assert_relative_eq!(hbar(1, 1.0), (2.0 * 2f64.ln()).sqrt(), epsilon = 1e-15);
        assert_relative_eq!(hbar(1, 1.0), 1.177_410_022_515_474_6, epsilon = 1e-12);
        assert_relative_eq!(hbar(1, 0.1), 2.447_746_830_680_816_6, epsilon = 1e-12);
        assert!(hbar(10, 0.1) < hbar(100, 0.1));
        assert!(hbar(1_000_000, 0.1) / 1e6 < 0.01);
    }

    #[test]
    fn stops_on_crossing() {
        // ℏ₃ at η = 0.5 is sqrt(6 ln 8) ≈ 3.5322, so S = 3 is not enough
        let mut t = VerticalTest::from_parts(2, 2, 0.5);
        assert!(!t.is_stopped());
        assert_relative_eq!(hbar(3, 0.5), (6.0 * 8f64.ln()).sqrt(), epsilon = 1e-14);
        assert_eq!(t.step(true).unwrap(), None);
        assert_eq!((t.steps(), t.walk()), (3, 3));
        assert_eq!(t.step(true).unwrap(), None);
        // ℏ₅ = sqrt(10 ln 12) ≈ 4.985
        assert_eq!(t.step(true).unwrap(), Some(1));
        assert_eq!((t.steps(), t.walk()), (5, 5));
        assert!(matches!(t.step(true), Err(BisectError::TestStopped)));
    }

    #[test]
    fn alternating_never_stops() {
        let mut t = VerticalTest::new(0.1);
        for i in 0..10_000 {
            assert_eq!(t.step(i % 2 == 0).unwrap(), None);
            assert!(t.walk().abs() <= 1);
        }
    }

    #[test]
    fn minus_from_zero() {
        let mut t = VerticalTest::new(0.1);
        t.step(false).unwrap();
        assert_eq!(t.walk(), -1);
    }

    #[test]
    fn safe_steps_never_cross() {
        let mut t = VerticalTest::new(0.1);
        t.step(true).unwrap();
        for _ in 0..200 {
            let k = t.safe_steps();
            if k == 0 {
                if t.step(true).unwrap().is_some() {
                    break;
                }
                continue;
            }
            // all plus is the fastest way to the boundary
            assert_eq!(t.advance(k, k).unwrap(), None);
        }
    }
}
