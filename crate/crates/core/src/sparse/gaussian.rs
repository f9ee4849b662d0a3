//! Gaussian designs `X_ij ~ N(0,1)` with `y = Xϑ* + σ·N(0,1)`.

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use super::dataset::{Dataset, Gram, Provenance};

/// Row-level sample.
pub fn sample_dataset<R: Rng + ?Sized>(truth: &[f64], n: usize, sigma: f64, rng: &mut R) -> Dataset {
    let d = truth.len();
    let mut x = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let mut yi = 0.0;
        for &t in truth {
            let v: f64 = rng.sample(StandardNormal);
            yi += v * t;
            x.push(v);
        }
        yi += sigma * rng.sample::<f64, _>(StandardNormal);
        y.push(yi);
    }
    Dataset::from_flat(x, y, d)
        .expect("generated data is finite")
        .with_provenance(Provenance { seed: None, generator: format!("gaussian n={n} d={d} sigma={sigma}") })
}

/// Summary statistics of an `n`-row sample, drawn without forming `X`.
///
/// Writing `X = QR` with `R = Lᵀ`, the factor `L` has the Bartlett law
/// (`L_ii² ~ χ²_{n−i}`, standard normal below the diagonal) and `Q` is
/// uniform and independent of it, so `Qᵀe/σ` is a standard normal vector
/// `z`. Then `XᵀX = LLᵀ`, `Xᵀe = σLz` and `eᵀe = σ²(‖z‖² + χ²_{n−d})`.
/// For `n <= d` the rows are drawn directly.
pub fn sample_gram<R: Rng + ?Sized>(truth: &[f64], n: usize, sigma: f64, rng: &mut R) -> Gram {
    let d = truth.len();
    if n <= d {
        return sample_dataset(truth, n, sigma, rng).gram();
    }
    // lower-triangular L, row-major
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        let chi = ChiSquared::new((n - i) as f64).expect("positive degrees of freedom");
        l[i * d + i] = chi.sample(rng).sqrt();
        for j in 0..i {
            l[i * d + j] = rng.sample(StandardNormal);
        }
    }
    let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let tail = ChiSquared::new((n - d) as f64).expect("n > d").sample(rng);

    let mut g = Gram::zeros(d);
    g.n = n;
    for a in 0..d {
        for b in 0..=a {
            let mut s = 0.0;
            for k in 0..=b {
                s += l[a * d + k] * l[b * d + k];
            }
            g.xtx[a * d + b] = s;
        }
    }
    g.symmetrize_lower();
    // Xᵀe = σ L z
    let xte: Vec<f64> = (0..d).map(|a| sigma * (0..=a).map(|k| l[a * d + k] * z[k]).sum::<f64>()).collect();
    let ete = sigma * sigma * (z.iter().map(|v| v * v).sum::<f64>() + tail);
    let mut quad = 0.0;
    let mut cross = 0.0;
    for a in 0..d {
        let wb: f64 = (0..d).map(|b| g.xtx[a * d + b] * truth[b]).sum();
        g.xty[a] = wb + xte[a];
        quad += truth[a] * wb;
        cross += truth[a] * xte[a];
    }
    g.yty = quad + 2.0 * cross + ete;
    g
}

/// Independent fold summaries whose sizes add up to `n` and differ by at most one.
pub fn sample_fold_grams<R: Rng + ?Sized>(truth: &[f64], n: usize, folds: usize, sigma: f64, rng: &mut R) -> Vec<Gram> {
    (0..folds)
        .map(|f| {
            let size = n / folds + usize::from(f < n % folds);
            sample_gram(truth, size, sigma, rng)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn gram_moments_match_row_sampling() {
        // E[XᵀX] = nI, E[Xᵀy] = nϑ, E[yᵀy] = n(‖ϑ‖² + σ²)
        let truth = [1.0, -2.0, 0.0];
        let n = 50;
        let reps = 4000;
        let mut rng = stream(7, 0);
        let mut mean = Gram::zeros(3);
        let mut var00 = 0.0;
        for _ in 0..reps {
            let g = sample_gram(&truth, n, 0.5, &mut rng);
            var00 += (g.xtx[0] - n as f64).powi(2);
            mean.add(&g);
        }
        let r = reps as f64;
        let nf = n as f64;
        assert!((mean.xtx[0] / r - nf).abs() < 0.5);
        assert!((mean.xtx[1] / r).abs() < 0.5);
        assert!((mean.xtx[5] / r).abs() < 0.5);
        assert!((mean.xty[0] / r - nf).abs() < 1.0);
        assert!((mean.xty[1] / r + 2.0 * nf).abs() < 1.0);
        assert!((mean.yty / r - nf * 5.25).abs() < 3.0);
        // Var of a χ²_n diagonal entry is 2n
        assert!((var00 / r / (2.0 * nf) - 1.0).abs() < 0.1);
    }

    #[test]
    fn small_n_uses_rows() {
        let mut rng = stream(1, 0);
        let g = sample_gram(&[1.0, 1.0, 1.0], 2, 1.0, &mut rng);
        assert_eq!(g.n, 2);
    }

    #[test]
    fn fold_sizes() {
        let mut rng = stream(1, 0);
        let f = sample_fold_grams(&[1.0, 0.0], 11, 5, 1.0, &mut rng);
        let sizes: Vec<usize> = f.iter().map(|g| g.n).collect();
        assert_eq!(sizes, vec![3, 2, 2, 2, 2]);
    }
}
