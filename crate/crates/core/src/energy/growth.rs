use serde::{Deserialize, Serialize};

use super::potential::{PairKind, PairPotential, VolumetricKind, VolumetricPotential};
use crate::error::{Error, Result};

/// Stretches `λ = |ξ| / |x - y|` sampled geometrically on `[lambda_min, lambda_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthGrid {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub samples: usize,
    /// Range `[-t, t]` for the volumetric bound.
    pub det_range: f64,
}

impl GrowthGrid {
    /// Default grid for `pair`: up to `λ = 10`, or 0.95 of full extension for the exact Kuhn–Grün form.
    pub fn for_potential(pair: &PairPotential) -> Self {
        let lambda_max = match &pair.kind {
            PairKind::KuhnGrunExact { mean_monomers, .. } => 0.95 * mean_monomers.sqrt(),
            _ => 10.0,
        };
        GrowthGrid { lambda_min: 1e-4 * lambda_max, lambda_max, samples: 200, det_range: 10.0 }
    }

    fn points(&self) -> Vec<f64> {
        let k = self.samples.max(2);
        let r = (self.lambda_max / self.lambda_min).ln();
        (0..k).map(|i| self.lambda_min * (r * i as f64 / (k - 1) as f64).exp()).collect()
    }
}

/// Constants with `c2 λ² + cp λ^p ≤ f ≤ c2_upper λ² + cp_upper λ^p` on the grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthReport {
    pub p: f64,
    pub c2: f64,
    pub cp: f64,
    pub c2_upper: f64,
    pub cp_upper: f64,
    /// Quadratic potentials: `cp` and `cp_upper` are zero.
    pub p2_only: bool,
    /// Smallest `lower / f` and largest `upper / f` over the grid.
    pub lower_tightness: f64,
    pub upper_tightness: f64,
    /// `max W(t) / (1 + |t|^{p/d})` on the determinant grid.
    pub volumetric_constant: Option<f64>,
    /// `3 / (2 N°)` for Kuhn–Grün potentials.
    pub expected_c2: Option<f64>,
    pub consistent: Option<bool>,
}

/// Reference edge length: the typical chain for Kuhn–Grün (`N_xy = N°`), 1 otherwise.
fn reference_length(pair: &PairPotential) -> f64 {
    match &pair.kind {
        PairKind::KuhnGrunP10 { mean_monomers, monomer_length, .. }
        | PairKind::KuhnGrunExact { mean_monomers, monomer_length, .. } => mean_monomers.sqrt() * monomer_length,
        _ => 1.0,
    }
}

fn directions(n: usize) -> Vec<Vec<f64>> {
    let mut out = vec![];
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        out.push(e);
        for j in i + 1..n {
            for s in [1.0, -1.0] {
                let mut e = vec![0.0; n];
                e[i] = std::f64::consts::FRAC_1_SQRT_2;
                e[j] = s * std::f64::consts::FRAC_1_SQRT_2;
                out.push(e);
            }
        }
    }
    out
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let m = xs.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = xs.iter().zip(ys).map(|(x, y)| (x.ln(), y.ln())).unzip();
    let (mx, my) = (lx.iter().sum::<f64>() / m, ly.iter().sum::<f64>() / m);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Fits the two-sided growth sandwich of `pair` (and the bound on `vol`) on `grid`.
pub fn growth_check(pair: &PairPotential, vol: &VolumetricPotential, n: usize, grid: &GrowthGrid) -> Result<GrowthReport> {
    pair.check(n)?;
    if !(grid.lambda_min > 0.0) || !(grid.lambda_max > grid.lambda_min) || grid.samples < 10 {
        return Err(Error::InvalidParams("growth grid needs 0 < lambda_min < lambda_max and >= 10 samples".into()));
    }
    let len = reference_length(pair);
    let term = pair.edge(len, 1.0)?;
    let lam = grid.points();
    let dirs = directions(n);
    // smallest and largest f over directions at each λ
    let mut lo = vec![f64::INFINITY; lam.len()];
    let mut hi = vec![0.0f64; lam.len()];
    for dir in &dirs {
        for (k, &l) in lam.iter().enumerate() {
            let xi: Vec<f64> = dir.iter().map(|c| c * l * len).collect();
            let f = pair.eval(&term, &xi)?;
            lo[k] = lo[k].min(f);
            hi[k] = hi[k].max(f);
        }
    }
    let p = pair.growth_exponent().max(2.0);
    let p2_only = matches!(pair.kind, PairKind::Quadratic { .. });
    let decade = lam.len() / 4;
    if lo.iter().any(|&f| !(f > 0.0)) {
        return Err(Error::SandwichViolated("f vanishes at a nonzero stretch".into()));
    }
    let top = slope(&lam[lam.len() - decade..], &lo[lam.len() - decade..]);
    if top < 2.0 - 1e-3 {
        return Err(Error::SandwichViolated(format!(
            "lower bound: f grows like λ^{top:.3} at large stretch, slower than λ²"
        )));
    }
    let bottom = slope(&lam[..decade], &hi[..decade]);
    if bottom < 2.0 - 1e-3 {
        return Err(Error::SandwichViolated(format!(
            "upper bound: f vanishes like λ^{bottom:.3} at small stretch, slower than λ²"
        )));
    }
    let top_hi = slope(&lam[lam.len() - decade..], &hi[lam.len() - decade..]);
    if top_hi > p + 1e-3 {
        return Err(Error::SandwichViolated(format!("upper bound: f grows like λ^{top_hi:.3}, faster than λ^{p}")));
    }

    let g_lo: Vec<f64> = lam.iter().zip(&lo).map(|(l, f)| f / (l * l)).collect();
    let (c2, cp, lower_tightness, c2_upper, cp_upper, upper_tightness) = if p2_only {
        let c2 = g_lo.iter().cloned().fold(f64::INFINITY, f64::min);
        let c2u = lam.iter().zip(&hi).map(|(l, f)| f / (l * l)).fold(0.0, f64::max);
        (c2, 0.0, 1.0, c2u, 0.0, c2u / c2)
    } else {
        let min_g = g_lo.iter().cloned().fold(f64::INFINITY, f64::min);
        let min_h = lam.iter().zip(&lo).map(|(l, f)| f / l.powf(p)).fold(f64::INFINITY, f64::min);
        // lower: θ min_g λ² + (1-θ) min_h λ^p ≤ f for every θ in [0, 1]
        let mut best = (0.0, 0.0, 0.0);
        for k in 0..=100 {
            let th = k as f64 / 100.0;
            let (a, b) = (th * min_g, (1.0 - th) * min_h);
            let tight = lam
                .iter()
                .zip(&lo)
                .map(|(l, f)| (a * l * l + b * l.powf(p)) / f)
                .fold(f64::INFINITY, f64::min);
            if tight > best.0 {
                best = (tight, a, b);
            }
        }
        // upper: split at λ*, f/λ² below and f/λ^p above
        let mut up = (f64::INFINITY, 0.0, 0.0);
        for s in 0..lam.len() {
            let a = (0..=s).map(|k| hi[k] / (lam[k] * lam[k])).fold(0.0, f64::max);
            let b = (s..lam.len()).map(|k| hi[k] / lam[k].powf(p)).fold(0.0, f64::max);
            let tight = lam
                .iter()
                .zip(&hi)
                .map(|(l, f)| (a * l * l + b * l.powf(p)) / f)
                .fold(0.0, f64::max);
            if tight < up.0 {
                up = (tight, a, b);
            }
        }
        (best.1, best.2, best.0, up.1, up.2, up.0)
    };

    let volumetric_constant = match vol.kind {
        VolumetricKind::None => None,
        VolumetricKind::ConvexWell => {
            let k = grid.samples.max(2);
            let mut c = 0.0f64;
            for i in 0..k {
                let t = -grid.det_range + 2.0 * grid.det_range * i as f64 / (k - 1) as f64;
                let w = vol.eval(t);
                if w < 0.0 {
                    return Err(Error::SandwichViolated(format!("W({t}) = {w} is negative")));
                }
                c = c.max(w / (1.0 + t.abs().powf(vol.exponent)));
            }
            Some(c)
        }
    };

    let expected_c2 = match &pair.kind {
        PairKind::KuhnGrunP10 { mean_monomers, .. } | PairKind::KuhnGrunExact { mean_monomers, .. } => {
            Some(1.5 / mean_monomers * pair.scale)
        }
        _ => None,
    };
    let consistent = expected_c2.map(|e| c2 <= 4.0 * e && c2 >= e / 4.0);
    Ok(GrowthReport {
        p,
        c2,
        cp,
        c2_upper,
        cp_upper,
        p2_only,
        lower_tightness,
        upper_tightness,
        volumetric_constant,
        expected_c2,
        consistent,
    })
}
