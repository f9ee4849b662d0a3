use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Gram};
use super::lasso::{lasso_gram, LassoOptions};
use super::SparseError;
use crate::rng::stream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub lambda: f64,
    /// Grid in the order it was evaluated (descending).
    pub grid: Vec<f64>,
    /// Mean held-out squared error per grid point; empty when degenerate.
    pub mean_errors: Vec<f64>,
    /// A fold had constant responses and the largest λ was returned.
    pub degenerate: bool,
}

/// `count` values spaced geometrically from `λ_max = ‖Xᵀy/n‖_∞` down to
/// `λ_max·min_ratio`, descending.
pub fn lambda_grid(g: &Gram, count: usize, min_ratio: f64) -> Vec<f64> {
    let n = g.n.max(1) as f64;
    let lmax = g.xty.iter().map(|v| (v / n).abs()).fold(0.0, f64::max);
    let lmax = if lmax > 0.0 { lmax } else { 1e-12 };
    if count <= 1 {
        return vec![lmax];
    }
    let step = min_ratio.ln() / (count - 1) as f64;
    (0..count).map(|i| lmax * (step * i as f64).exp()).collect()
}

fn sorted_desc(grid: &[f64]) -> Result<Vec<f64>, SparseError> {
    if grid.is_empty() {
        return Err(SparseError::EmptyGrid);
    }
    if let Some(&bad) = grid.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
        return Err(SparseError::BadLambda(bad));
    }
    let mut g = grid.to_vec();
    g.sort_by(|a, b| b.partial_cmp(a).unwrap());
    g.dedup();
    Ok(g)
}

/// K-fold cross-validation over `grid`. Rows are shuffled into folds with
/// `seed`; ties go to the larger λ.
pub fn cv_select_lambda(
    data: &Dataset,
    folds: usize,
    grid: &[f64],
    seed: u64,
    opts: &LassoOptions,
) -> Result<CvResult, SparseError> {
    let n = data.n();
    if folds < 2 || n < folds {
        return Err(SparseError::BadFolds { folds, n });
    }
    let desc = sorted_desc(grid)?;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut stream(seed, 0));
    let assign: Vec<Vec<usize>> = (0..folds).map(|f| idx.iter().copied().skip(f).step_by(folds).collect()).collect();

    let y = data.y();
    let degenerate = (0..folds).any(|f| {
        let mut train = (0..folds).filter(|&h| h != f).flat_map(|h| assign[h].iter().copied());
        let first = train.next().map(|i| y[i]);
        train.all(|i| Some(y[i]) == first)
    });
    if degenerate {
        return Ok(CvResult { lambda: desc[0], grid: desc, mean_errors: Vec::new(), degenerate: true });
    }
    let fold_grams: Vec<Gram> = assign.iter().map(|rows| data.gram_of(rows.iter().copied())).collect();
    cv_select_lambda_folds(&fold_grams, &desc, opts)
}

/// Cross-validation when each fold is already summarized by its [`Gram`].
pub fn cv_select_lambda_folds(folds: &[Gram], grid: &[f64], opts: &LassoOptions) -> Result<CvResult, SparseError> {
    if folds.len() < 2 {
        return Err(SparseError::BadFolds { folds: folds.len(), n: folds.iter().map(|g| g.n).sum() });
    }
    let desc = sorted_desc(grid)?;
    let mut total = Gram::zeros(folds[0].d);
    for g in folds {
        total.add(g);
    }
    let mut sums = vec![0.0; desc.len()];
    for held in folds {
        let mut train = total.clone();
        train.sub(held);
        let mut warm: Option<Vec<f64>> = None;
        for (k, &lam) in desc.iter().enumerate() {
            let m = lasso_gram(&train, lam, opts, warm.as_deref())?;
            sums[k] += held.mse(&m.coefficients) * held.n as f64;
            warm = Some(m.coefficients);
        }
    }
    let n_total = total.n as f64;
    let mean_errors: Vec<f64> = sums.iter().map(|s| s / n_total).collect();
    let mut best = 0;
    for k in 1..desc.len() {
        if mean_errors[k] < mean_errors[best] {
            best = k;
        }
    }
    Ok(CvResult { lambda: desc[best], grid: desc, mean_errors, degenerate: false })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_grid() {
        let ds = Dataset::new(vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0]], vec![1.0, 2.5, 2.9, 4.2]).unwrap();
        let r = cv_select_lambda(&ds, 2, &[0.3], 1, &LassoOptions::default()).unwrap();
        assert_eq!(r.lambda, 0.3);
    }

    #[test]
    fn constant_response_returns_largest() {
        let ds = Dataset::new(vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0]], vec![2.0; 4]).unwrap();
        let r = cv_select_lambda(&ds, 2, &[0.1, 0.5, 0.01], 1, &LassoOptions::default()).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.lambda, 0.5);
    }

    #[test]
    fn grid_shape() {
        let ds = Dataset::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![2.0, -4.0]).unwrap();
        let g = lambda_grid(&ds.gram(), 5, 0.01);
        assert_eq!(g.len(), 5);
        assert!((g[0] - 2.0).abs() < 1e-12);
        assert!((g[4] - 0.02).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let ds = Dataset::new(vec![vec![1.0]], vec![1.0]).unwrap();
        assert!(matches!(cv_select_lambda(&ds, 2, &[0.1], 0, &LassoOptions::default()), Err(SparseError::BadFolds { .. })));
        let ds = Dataset::new(vec![vec![1.0], vec![2.0]], vec![1.0, 0.0]).unwrap();
        assert!(matches!(cv_select_lambda(&ds, 2, &[], 0, &LassoOptions::default()), Err(SparseError::EmptyGrid)));
    }
}
