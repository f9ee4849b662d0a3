use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Gram};
use super::SparseError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoOptions {
    /// Largest coefficient change that counts as converged.
    pub tol: f64,
    /// Cap on coordinate-descent sweeps.
    pub max_iter: usize,
    /// Fit on unit-variance columns and map back. Off by default.
    pub standardize: bool,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 100_000, standardize: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseModel {
    pub coefficients: Vec<f64>,
    pub support: Vec<usize>,
    pub lambda_used: f64,
    pub iterations: usize,
    /// Largest violation of the optimality conditions.
    pub kkt_residual: f64,
    pub converged: bool,
}

impl SparseModel {
    /// Records `{j, coefficient}` for each nonzero coefficient.
    pub fn nonzeros(&self) -> Vec<(usize, f64)> {
        self.support.iter().map(|&j| (j, self.coefficients[j])).collect()
    }

    pub fn to_export(&self) -> serde_json::Value {
        serde_json::json!({
            "metadata": {
                "lambda": self.lambda_used,
                "iterations": self.iterations,
                "kkt_residual": self.kkt_residual,
                "converged": self.converged,
                "d": self.coefficients.len(),
            },
            "coefficients": self.nonzeros().into_iter()
                .map(|(j, c)| serde_json::json!({"j": j, "coefficient": c}))
                .collect::<Vec<_>>(),
        })
    }
}

pub fn soft_threshold(z: f64, lambda: f64) -> f64 {
    if z > lambda {
        z - lambda
    } else if z < -lambda {
        z + lambda
    } else {
        0.0
    }
}

/// `(1/2n)‖y − Xβ‖² + λ‖β‖₁` from summary statistics.
pub fn objective(g: &Gram, beta: &[f64], lambda: f64) -> f64 {
    0.5 * g.mse(beta) + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
}

pub fn lasso_fit(data: &Dataset, lambda: f64, opts: &LassoOptions) -> Result<SparseModel, SparseError> {
    lasso_gram(&data.gram(), lambda, opts, None)
}

/// Cyclic coordinate descent with covariance updates.
///
/// Sweeps alternate between the active set and the full coordinate list;
/// the run stops when a full sweep changes no coefficient by more than
/// `opts.tol`.
pub fn lasso_gram(g: &Gram, lambda: f64, opts: &LassoOptions, warm: Option<&[f64]>) -> Result<SparseModel, SparseError> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(SparseError::BadLambda(lambda));
    }
    if g.n == 0 {
        return Err(SparseError::Empty);
    }
    let d = g.d;
    let n = g.n as f64;
    let scale: Vec<f64> = if opts.standardize {
        (0..d).map(|j| (g.xtx[j * d + j] / n).sqrt()).map(|s| if s > 0.0 { s } else { 1.0 }).collect()
    } else {
        vec![1.0; d]
    };
    // A = XᵀX/n and b = Xᵀy/n on the (possibly rescaled) columns
    let mut a = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            a[i * d + j] = g.xtx[i * d + j] / n / (scale[i] * scale[j]);
        }
    }
    let b: Vec<f64> = (0..d).map(|j| g.xty[j] / n / scale[j]).collect();

    let mut beta: Vec<f64> = match warm {
        Some(w) if w.len() == d => w.iter().zip(&scale).map(|(w, s)| w * s).collect(),
        _ => vec![0.0; d],
    };
    // r = b − Aβ
    let mut r = b.clone();
    for j in 0..d {
        if beta[j] != 0.0 {
            for i in 0..d {
                r[i] -= a[i * d + j] * beta[j];
            }
        }
    }

    let update = |j: usize, beta: &mut [f64], r: &mut [f64]| -> f64 {
        let ajj = a[j * d + j];
        if ajj <= 0.0 {
            return 0.0;
        }
        let z = r[j] + ajj * beta[j];
        let new = soft_threshold(z, lambda) / ajj;
        let delta = new - beta[j];
        if delta != 0.0 {
            let col = &a[j * d..(j + 1) * d];
            for i in 0..d {
                r[i] -= delta * col[i];
            }
            beta[j] = new;
        }
        delta.abs()
    };

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        let mut change = 0.0f64;
        for j in 0..d {
            change = change.max(update(j, &mut beta, &mut r));
        }
        if change < opts.tol {
            converged = true;
            break;
        }
        // settle the active set before the next full sweep
        let active: Vec<usize> = (0..d).filter(|&j| beta[j] != 0.0).collect();
        while iterations < opts.max_iter {
            iterations += 1;
            let mut c = 0.0f64;
            for &j in &active {
                c = c.max(update(j, &mut beta, &mut r));
            }
            if c < opts.tol {
                break;
            }
        }
    }

    // optimality conditions on the fitted scale
    let mut kkt = 0.0f64;
    for j in 0..d {
        let grad = r[j];
        let v = if beta[j] == 0.0 { (grad.abs() - lambda).max(0.0) } else { (grad - lambda * beta[j].signum()).abs() };
        kkt = kkt.max(v);
    }
    let coefficients: Vec<f64> = beta.iter().zip(&scale).map(|(b, s)| b / s).collect();
    let support = (0..d).filter(|&j| coefficients[j] != 0.0).collect();
    Ok(SparseModel { coefficients, support, lambda_used: lambda, iterations, kkt_residual: kkt, converged })
}
