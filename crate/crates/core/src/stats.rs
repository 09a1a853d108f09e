//! Sample summaries, batch means and weighted least squares.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Mean and standard error of independent samples (stderr 0 for a single sample).
pub fn mean_stderr(x: &[f64]) -> (f64, f64) {
    let m = mean(x);
    if x.len() < 2 {
        return (m, 0.0);
    }
    let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64;
    (m, (var / x.len() as f64).sqrt())
}

/// Linear-interpolated quantile of unsorted data, `q` in `[0, 1]`.
pub fn quantile(x: &[f64], q: f64) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let pos = q * (s.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    s[lo] + (pos - lo as f64) * (s[hi] - s[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchMeans {
    pub mean: f64,
    pub stderr: f64,
    /// `n · var / (batch size · var of batch means)`, capped at `n`.
    pub ess: f64,
    pub batches: usize,
}

/// Batch-means estimate of the mean of a correlated series.
pub fn batch_means(x: &[f64], batches: usize) -> BatchMeans {
    let n = x.len();
    let b = batches.min(n).max(1);
    let size = n / b;
    let m = mean(&x[..size * b]);
    let bm: Vec<f64> = (0..b).map(|k| mean(&x[k * size..(k + 1) * size])).collect();
    let var_b = if b > 1 { bm.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (b - 1) as f64 } else { 0.0 };
    let stderr = (var_b / b as f64).sqrt();
    let var = if n > 1 { x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
    let ess = if var_b > 0.0 { (var / var_b * b as f64).min(n as f64) } else { n as f64 };
    BatchMeans { mean: m, stderr, ess, batches: b }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    /// Coefficients of the basis functions.
    pub coef: Vec<f64>,
    pub coef_stderr: Vec<f64>,
    /// `sqrt(χ² / dof)`, or the plain RMS residual when no weights were given.
    pub residual: f64,
    /// Studentized residual per point: weighted residual over `sqrt(1 - leverage)`,
    /// further divided by `residual` when no weights were given.
    pub standardized: Vec<f64>,
}

/// Weighted least squares `y ≈ Σ_k c_k b_k(x)` with weights `1/σ²` (unit weights when `sigma` is `None`).
pub fn weighted_fit(basis: &[Vec<f64>], y: &[f64], sigma: Option<&[f64]>) -> Result<LinearFit> {
    let k = basis.len();
    let m = y.len();
    if m < k || basis.iter().any(|b| b.len() != m) {
        return Err(Error::IllConditionedFit(format!("{m} points for {k} coefficients")));
    }
    let w: Vec<f64> = match sigma {
        Some(s) => {
            if s.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::IllConditionedFit("nonpositive standard error".into()));
            }
            s.iter().map(|v| 1.0 / (v * v)).collect()
        }
        None => vec![1.0; m],
    };
    let mut a = vec![0.0; k * k];
    let mut r = vec![0.0; k];
    for i in 0..m {
        for p in 0..k {
            r[p] += w[i] * basis[p][i] * y[i];
            for q in 0..k {
                a[p * k + q] += w[i] * basis[p][i] * basis[q][i];
            }
        }
    }
    let inv = invert_small(&a, k)?;
    let coef: Vec<f64> = (0..k).map(|p| (0..k).map(|q| inv[p * k + q] * r[q]).sum()).collect();
    let resid: Vec<f64> = (0..m)
        .map(|i| (y[i] - (0..k).map(|p| coef[p] * basis[p][i]).sum::<f64>()) * w[i].sqrt())
        .collect();
    let dof = (m - k).max(1) as f64;
    let chi2 = resid.iter().map(|v| v * v).sum::<f64>();
    let residual = (chi2 / dof).sqrt();
    let scale = if sigma.is_some() { 1.0 } else { residual * residual };
    let coef_stderr = (0..k).map(|p| (inv[p * k + p] * scale).sqrt()).collect();
    let standardized = (0..m)
        .map(|i| {
            let h: f64 =
                w[i] * (0..k).map(|p| (0..k).map(|q| basis[p][i] * inv[p * k + q] * basis[q][i]).sum::<f64>()).sum::<f64>();
            let r = resid[i] / (1.0 - h).max(1e-12).sqrt();
            if sigma.is_some() {
                r
            } else if residual > 0.0 {
                r / residual
            } else {
                0.0
            }
        })
        .collect();
    Ok(LinearFit { coef, coef_stderr, residual, standardized })
}

fn invert_small(a: &[f64], k: usize) -> Result<Vec<f64>> {
    let mut m = a.to_vec();
    let mut inv = vec![0.0; k * k];
    for i in 0..k {
        inv[i * k + i] = 1.0;
    }
    let norm = a.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    for c in 0..k {
        let piv = (c..k).max_by(|&x, &y| m[x * k + c].abs().total_cmp(&m[y * k + c].abs())).unwrap();
        if !(m[piv * k + c].abs() > 1e-13 * norm) {
            return Err(Error::IllConditionedFit("normal equations are singular".into()));
        }
        for j in 0..k {
            m.swap(c * k + j, piv * k + j);
            inv.swap(c * k + j, piv * k + j);
        }
        let d = m[c * k + c];
        for j in 0..k {
            m[c * k + j] /= d;
            inv[c * k + j] /= d;
        }
        for r in 0..k {
            if r != c {
                let f = m[r * k + c];
                for j in 0..k {
                    m[r * k + j] -= f * m[c * k + j];
                    inv[r * k + j] -= f * inv[c * k + j];
                }
            }
        }
    }
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn batch_means_of_ar1() {
        // AR(1) with phi = 0.9: integrated autocorrelation time (1+phi)/(1-phi) = 19
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 400_000;
        let mut x = vec![0.0; n];
        for i in 1..n {
            let z: f64 = StandardNormal.sample(&mut rng);
            x[i] = 0.9 * x[i - 1] + z;
        }
        let bm = batch_means(&x, 100);
        let want_se = (1.0 / (1.0 - 0.81) * 19.0 / n as f64).sqrt();
        assert!((bm.stderr / want_se - 1.0).abs() < 0.25, "{} vs {want_se}", bm.stderr);
        assert!((bm.ess / (n as f64 / 19.0) - 1.0).abs() < 0.4, "{}", bm.ess);
    }

    #[test]
    fn exact_line_is_recovered() {
        let x: Vec<f64> = vec![8.0, 16.0, 32.0, 64.0];
        let y: Vec<f64> = x.iter().map(|v| 1.5 + 3.0 / v).collect();
        let f = weighted_fit(&[vec![1.0; 4], x.iter().map(|v| 1.0 / v).collect()], &y, None).unwrap();
        assert!((f.coef[0] - 1.5).abs() < 1e-12 && (f.coef[1] - 3.0).abs() < 1e-12);
        assert!(f.residual < 1e-12);
    }

    #[test]
    fn quantiles() {
        let x = [3.0, 1.0, 2.0, 4.0, 5.0];
        assert_eq!(quantile(&x, 0.5), 3.0);
        assert_eq!(quantile(&x, 1.0), 5.0);
        assert!((quantile(&x, 0.95) - 4.8).abs() < 1e-12);
    }
}
