//! Alignment on a spanning set of samples.
//!
//! Instead of comparing parameter values, the responder compares two
//! candidate predictions for one sample at a time. With embeddings
//! `z_1..z_s` orthogonalized into `α_1..α_s`, writing `θ = Σ ω_k α_k` gives
//! `z_kᵀθ = Σ_{j≤k} ω_j z_kᵀα_j`, so each aligned prediction fixes one more
//! `ω_k`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::plan::{DimensionReport, MapbTemplate};
use super::two_stage::OracleSpec;
use super::PipelineError;
use crate::bisect::{Drive, MapbRun};
use crate::choice::Responder;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Orthogonal basis of the sample embeddings with the factors the
/// back-solve needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthoBasis {
    z: Vec<Vec<f64>>,
    alpha: Vec<Vec<f64>>,
    /// `z_alpha[k][j] = z_kᵀα_j` for `j < k`.
    z_alpha: Vec<Vec<f64>>,
    alpha_sq: Vec<f64>,
    condition: f64,
}

impl OrthoBasis {
    /// Modified Gram-Schmidt with one re-orthogonalization pass. Samples
    /// whose residual is below `1e-12` of their norm, or a matrix with
    /// condition number above `max_condition`, are rejected.
    pub fn new(z: Vec<Vec<f64>>, max_condition: f64) -> Result<Self, PipelineError> {
        let s = z.len();
        if s == 0 {
            return Err(PipelineError::Config("no samples".into()));
        }
        if z.iter().any(|v| v.len() != s) {
            return Err(PipelineError::Config(format!("need {s} samples of dimension {s}")));
        }
        let mut alpha: Vec<Vec<f64>> = Vec::with_capacity(s);
        for (k, zk) in z.iter().enumerate() {
            let mut v = zk.clone();
            for _ in 0..2 {
                for a in &alpha {
                    let c = dot(&v, a) / dot(a, a);
                    v.iter_mut().zip(a).for_each(|(x, y)| *x -= c * y);
                }
            }
            let ratio = norm(&v) / norm(zk).max(f64::MIN_POSITIVE);
            if !(ratio > 1e-12) {
                return Err(PipelineError::Dependent { index: k, ratio });
            }
            alpha.push(v);
        }
        let zm = DMatrix::from_fn(s, s, |i, j| z[i][j]);
        let sv = zm.singular_values();
        let condition = sv.max() / sv.min();
        if !(condition <= max_condition) {
            let index = (0..s)
                .min_by(|&a, &b| {
                    let ra = norm(&alpha[a]) / norm(&z[a]);
                    let rb = norm(&alpha[b]) / norm(&z[b]);
                    ra.partial_cmp(&rb).unwrap()
                })
                .unwrap_or(0);
            return Err(PipelineError::IllConditioned { condition, limit: max_condition, index });
        }
        let z_alpha = (0..s).map(|k| (0..k).map(|j| dot(&z[k], &alpha[j])).collect()).collect();
        let alpha_sq = alpha.iter().map(|a| dot(a, a)).collect();
        Ok(Self { z, alpha, z_alpha, alpha_sq, condition })
    }

    pub fn dim(&self) -> usize {
        self.z.len()
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.z
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.alpha
    }

    pub fn condition_number(&self) -> f64 {
        self.condition
    }

    /// Largest `|α_iᵀα_j|/(‖α_i‖‖α_j‖)` over `i ≠ j`.
    pub fn max_cosine(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim() {
            for j in 0..i {
                let c = dot(&self.alpha[i], &self.alpha[j]) / (self.alpha_sq[i] * self.alpha_sq[j]).sqrt();
                worst = worst.max(c.abs());
            }
        }
        worst
    }

    /// `ω̂_k = (y_k − Σ_{j<k} ω̂_j z_kᵀα_j)/(α_kᵀα_k)` and `θ̂ = Σ ω̂_k α_k`.
    pub fn back_solve(&self, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let s = self.dim();
        let mut omega = vec![0.0; s];
        for k in 0..s {
            let known: f64 = (0..k).map(|j| omega[j] * self.z_alpha[k][j]).sum();
            omega[k] = (y[k] - known) / self.alpha_sq[k];
        }
        let mut theta = vec![0.0; s];
        for (w, a) in omega.iter().zip(&self.alpha) {
            theta.iter_mut().zip(a).for_each(|(t, x)| *t += w * x);
        }
        (omega, theta)
    }

    /// `‖column_k(Z⁻¹)‖₂`: how much an error in the `k`-th aligned value
    /// moves `θ̂`.
    pub fn amplification(&self) -> Vec<f64> {
        let s = self.dim();
        let zm = DMatrix::from_fn(s, s, |i, j| self.z[i][j]);
        let inv = zm.try_inverse().expect("conditioning checked at construction");
        (0..s).map(|k| inv.column(k).norm()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssConfig {
    /// Precision of each aligned value.
    pub epsilon_step: f64,
    /// Overall confidence; each sample gets `δ/s`.
    pub delta: f64,
    /// Coefficient half-width `β̄`; sample `k` is searched over
    /// `[z_kᵀθ̂₀ ± β̄‖z_k‖₁]`.
    pub half_width: f64,
    /// Stage-1 coefficients `θ̂₀`; zero if absent.
    #[serde(default)]
    pub center: Option<Vec<f64>>,
    #[serde(default)]
    pub template: MapbTemplate,
    #[serde(default = "default_max_condition")]
    pub max_condition: f64,
}

fn default_max_condition() -> f64 {
    1e6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssReport {
    pub y_hat: Vec<f64>,
    pub omega_hat: Vec<f64>,
    pub theta_hat: Vec<f64>,
    pub n2: u64,
    pub condition_number: f64,
    pub amplification: Vec<f64>,
    /// `Σ_k ε_k‖column_k(Z⁻¹)‖₂`: ℓ₂ bound on `θ̂ − θ*` when every aligned
    /// value is within its precision.
    pub propagated_bound: f64,
    pub steps: Vec<DimensionReport>,
}

/// Aligns `z_kᵀθ` for each sample in turn, then back-solves for `θ̂`.
/// `make(k)` returns the responder that compares predictions for sample `k`.
pub fn ass_align<F>(basis: &OrthoBasis, config: &AssConfig, mut make: F) -> Result<AssReport, PipelineError>
where
    F: FnMut(usize) -> Result<Box<dyn Responder>, PipelineError>,
{
    let s = basis.dim();
    let center = config.center.clone().unwrap_or_else(|| vec![0.0; s]);
    if center.len() != s {
        return Err(PipelineError::Config(format!("center has {} entries, expected {s}", center.len())));
    }
    let mut y_hat = Vec::with_capacity(s);
    let mut steps = Vec::with_capacity(s);
    for (k, zk) in basis.samples().iter().enumerate() {
        let pred = dot(zk, &center);
        let width = config.half_width * zk.iter().map(|v| v.abs()).sum::<f64>();
        let mapb = config.template.build(config.epsilon_step, config.delta / s as f64, pred, width);
        let mut run = MapbRun::uniform(mapb.clone())?;
        let mut responder = make(k)?;
        let outcome = match run.drive(&mut responder)? {
            Drive::Finished(o) => o,
            Drive::Suspended => return Err(PipelineError::Pending(k)),
        };
        y_hat.push(outcome.theta_hat);
        steps.push(DimensionReport {
            coordinate: k,
            center: pred,
            epsilon: mapb.epsilon,
            delta: mapb.delta,
            outcome,
            moves: run.moves().to_vec(),
        });
    }
    let (omega_hat, theta_hat) = basis.back_solve(&y_hat);
    let amplification = basis.amplification();
    let propagated_bound = config.epsilon_step * amplification.iter().sum::<f64>();
    Ok(AssReport {
        n2: steps.iter().map(|r| r.outcome.total_comparisons).sum(),
        y_hat,
        omega_hat,
        theta_hat,
        condition_number: basis.condition_number(),
        amplification,
        propagated_bound,
        steps,
    })
}

/// Responders answering for the true values `z_kᵀθ*`.
pub fn simulated_value_responders<'a>(
    basis: &'a OrthoBasis,
    truth: &'a [f64],
    oracle: &'a OracleSpec,
    seed: u64,
) -> impl FnMut(usize) -> Result<Box<dyn Responder>, PipelineError> + 'a {
    move |k| oracle.responder(dot(&basis.samples()[k], truth), seed, k as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_dimensional_example() {
        let b = OrthoBasis::new(vec![vec![1.0, 0.0], vec![1.0, 1.0]], 1e6).unwrap();
        assert_eq!(b.basis(), &[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let (omega, theta) = b.back_solve(&[2.0, 5.0]);
        assert_eq!(omega, vec![2.0, 3.0]);
        assert_eq!(theta, vec![2.0, 3.0]);
    }

    #[test]
    fn orthonormal_samples_read_off_directly() {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let b = OrthoBasis::new(vec![vec![r, r], vec![-r, r]], 1e6).unwrap();
        let (omega, _) = b.back_solve(&[0.3, -1.1]);
        assert!((omega[0] - 0.3).abs() < 1e-15 && (omega[1] + 1.1).abs() < 1e-15);
    }

    #[test]
    fn dependent_sample_is_named() {
        let err = OrthoBasis::new(vec![vec![1.0, 2.0, 0.0], vec![0.0, 1.0, 1.0], vec![1.0, 3.0, 1.0]], 1e6).unwrap_err();
        assert!(matches!(err, PipelineError::Dependent { index: 2, .. }));
        let err = OrthoBasis::new(vec![vec![1.0, 0.0], vec![1.0, 1e-8]], 1e6).unwrap_err();
        assert!(matches!(err, PipelineError::IllConditioned { index: 1, .. }));
    }

    #[test]
    fn amplification_of_identity_is_one() {
        let b = OrthoBasis::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], 1e6).unwrap();
        assert_eq!(b.amplification(), vec![1.0, 1.0]);
    }
}
