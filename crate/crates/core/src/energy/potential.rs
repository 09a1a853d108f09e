use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::kuhn_grun::{kuhn_grun, kuhn_grun_second, kuhn_grun_slope_ratio, KgMode};
use crate::error::{Error, Result};
use crate::geometry::dist;

fn one() -> f64 {
    1.0
}

fn ten() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PairKind {
    /// `ξᵀ A ξ` with a single row-major symmetric positive-definite `A`.
    Quadratic { matrix: Vec<f64> },
    KuhnGrunP10 {
        mean_monomers: f64,
        monomer_length: f64,
        #[serde(default = "ten")]
        p: f64,
    },
    KuhnGrunExact {
        mean_monomers: f64,
        monomer_length: f64,
        #[serde(default = "ten")]
        p: f64,
    },
    /// `Σ c |ξ|^e` over `(c, e)` terms.
    Polynomial { terms: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeMultiplier {
    pub edge: [usize; 2],
    pub factor: f64,
}

/// Pair energy `f(x - y, ξ)`, scaled by `scale` and by per-edge multipliers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairPotential {
    #[serde(flatten)]
    pub kind: PairKind,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub stiffness: Vec<EdgeMultiplier>,
}

impl PairPotential {
    pub fn new(kind: PairKind) -> Self {
        PairPotential { kind, scale: 1.0, stiffness: vec![] }
    }

    pub fn quadratic(matrix: Vec<f64>) -> Self {
        Self::new(PairKind::Quadratic { matrix })
    }

    /// `c · I` in dimension `n`.
    pub fn isotropic(c: f64, n: usize) -> Self {
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            m[i * n + i] = c;
        }
        Self::quadratic(m)
    }

    pub fn kuhn_grun(mode: KgMode, mean_monomers: f64, monomer_length: f64) -> Self {
        Self::new(match mode {
            KgMode::P10 => PairKind::KuhnGrunP10 { mean_monomers, monomer_length, p: 10.0 },
            KgMode::Exact => PairKind::KuhnGrunExact { mean_monomers, monomer_length, p: 10.0 },
        })
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn check(&self, n: usize) -> Result<()> {
        if !(self.scale > 0.0) || !self.scale.is_finite() {
            return Err(Error::InvalidParams(format!("pair scale {} must be positive", self.scale)));
        }
        if self.stiffness.iter().any(|m| !(m.factor > 0.0)) {
            return Err(Error::InvalidParams("stiffness multipliers must be positive".into()));
        }
        match &self.kind {
            PairKind::Quadratic { matrix } => {
                if matrix.len() != n * n {
                    return Err(Error::DimensionMismatch(format!("{} entries for a {n}x{n} matrix", matrix.len())));
                }
                for i in 0..n {
                    for j in 0..i {
                        let (a, b) = (matrix[i * n + j], matrix[j * n + i]);
                        if (a - b).abs() > 1e-12 * (a.abs() + b.abs()).max(1e-300) {
                            return Err(Error::InvalidParams("quadratic stiffness is not symmetric".into()));
                        }
                    }
                }
                cholesky_check(matrix, n)
            }
            PairKind::KuhnGrunP10 { mean_monomers, monomer_length, p }
            | PairKind::KuhnGrunExact { mean_monomers, monomer_length, p } => {
                if !(*mean_monomers >= 1.0) {
                    return Err(Error::InvalidParams(format!("mean monomer count {mean_monomers} must be >= 1")));
                }
                if !(*monomer_length > 0.0) {
                    return Err(Error::InvalidParams(format!("monomer length {monomer_length} must be positive")));
                }
                if *p != 10.0 {
                    return Err(Error::InvalidParams(format!("only p = 10 is implemented, got {p}")));
                }
                Ok(())
            }
            PairKind::Polynomial { terms } => {
                if terms.is_empty() || terms.iter().any(|t| !(t[0] >= 0.0) || !(t[1] > 0.0)) {
                    return Err(Error::InvalidParams("polynomial terms need c >= 0 and e > 0".into()));
                }
                Ok(())
            }
        }
    }

    /// Growth exponent `p`.
    pub fn growth_exponent(&self) -> f64 {
        match &self.kind {
            PairKind::Quadratic { .. } => 2.0,
            PairKind::KuhnGrunP10 { p, .. } | PairKind::KuhnGrunExact { p, .. } => *p,
            PairKind::Polynomial { terms } => terms.iter().filter(|t| t[0] > 0.0).map(|t| t[1]).fold(0.0, f64::max),
        }
    }

    pub fn multipliers(&self) -> HashMap<(usize, usize), f64> {
        self.stiffness.iter().map(|m| ((m.edge[0].min(m.edge[1]), m.edge[0].max(m.edge[1])), m.factor)).collect()
    }

    /// Edge-dependent data for an edge of length `len`.
    pub fn edge(&self, len: f64, multiplier: f64) -> Result<EdgeTerm> {
        if !(len > 0.0) {
            return Err(Error::InvalidParams("zero-length edge".into()));
        }
        let weight = self.scale * multiplier;
        Ok(match &self.kind {
            PairKind::Quadratic { .. } => EdgeTerm { weight, inv_len: 1.0 / len, n_xy: 1.0 },
            PairKind::KuhnGrunP10 { mean_monomers, monomer_length, .. }
            | PairKind::KuhnGrunExact { mean_monomers, monomer_length, .. } => {
                let n_xy = (len / monomer_length).powi(2);
                EdgeTerm { weight: weight * n_xy / mean_monomers, inv_len: 1.0 / len, n_xy }
            }
            PairKind::Polynomial { .. } => EdgeTerm { weight, inv_len: 1.0 / len, n_xy: 1.0 },
        })
    }

    /// Energy of increment `xi` on an edge.
    pub fn eval(&self, e: &EdgeTerm, xi: &[f64]) -> Result<f64> {
        let r2: f64 = xi.iter().map(|v| v * v).sum();
        Ok(e.weight
            * match &self.kind {
                PairKind::Quadratic { matrix } => quad_form(matrix, xi),
                PairKind::KuhnGrunP10 { .. } => kuhn_grun(r2.sqrt() * e.inv_len / e.n_xy.sqrt(), KgMode::P10)?,
                PairKind::KuhnGrunExact { .. } => kuhn_grun(r2.sqrt() * e.inv_len / e.n_xy.sqrt(), KgMode::Exact)?,
                PairKind::Polynomial { terms } => {
                    let r = r2.sqrt();
                    terms.iter().map(|t| t[0] * r.powf(t[1])).sum()
                }
            })
    }

    /// Energy and its gradient with respect to `xi`, written into `grad`.
    pub fn eval_grad(&self, e: &EdgeTerm, xi: &[f64], grad: &mut [f64]) -> Result<f64> {
        let r2: f64 = xi.iter().map(|v| v * v).sum();
        let n = xi.len();
        match &self.kind {
            PairKind::Quadratic { matrix } => {
                for i in 0..n {
                    grad[i] = 2.0 * e.weight * (0..n).map(|j| matrix[i * n + j] * xi[j]).sum::<f64>();
                }
                Ok(e.weight * quad_form(matrix, xi))
            }
            PairKind::KuhnGrunP10 { .. } | PairKind::KuhnGrunExact { .. } => {
                let mode = if matches!(self.kind, PairKind::KuhnGrunP10 { .. }) { KgMode::P10 } else { KgMode::Exact };
                let s = 1.0 / (e.n_xy.sqrt()) * e.inv_len;
                let t = r2.sqrt() * s;
                // d/dξ f(|ξ| s) = f'(t)/t · s² ξ
                let c = e.weight * kuhn_grun_slope_ratio(t, mode)? * s * s;
                for i in 0..n {
                    grad[i] = c * xi[i];
                }
                Ok(e.weight * kuhn_grun(t, mode)?)
            }
            PairKind::Polynomial { terms } => {
                let r = r2.sqrt();
                let mut f = 0.0;
                let mut ratio = 0.0;
                for t in terms {
                    if t[0] == 0.0 {
                        continue;
                    }
                    if r == 0.0 {
                        if t[1] <= 1.0 {
                            return Err(Error::NonDifferentiablePotential(format!("|ξ|^{} at ξ = 0", t[1])));
                        }
                        if t[1] == 2.0 {
                            ratio += 2.0 * t[0];
                        }
                        continue;
                    }
                    f += t[0] * r.powf(t[1]);
                    ratio += t[0] * t[1] * r.powf(t[1] - 2.0);
                }
                for i in 0..n {
                    grad[i] = e.weight * ratio * xi[i];
                }
                Ok(e.weight * f)
            }
        }
    }

    /// Hessian of the energy in `xi` (row-major `n x n`).
    pub fn hessian(&self, e: &EdgeTerm, xi: &[f64]) -> Result<Vec<f64>> {
        let n = xi.len();
        let mut h = vec![0.0; n * n];
        match &self.kind {
            PairKind::Quadratic { matrix } => {
                for k in 0..n * n {
                    h[k] = 2.0 * e.weight * matrix[k];
                }
            }
            _ => {
                // radial: φ''(r) ξ̂ξ̂ᵀ + φ'(r)/r (I - ξ̂ξ̂ᵀ)
                let r = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
                let (d1r, d2) = self.radial(e, r)?;
                for i in 0..n {
                    for j in 0..n {
                        let uu = if r > 0.0 { xi[i] * xi[j] / (r * r) } else if i == j { 1.0 } else { 0.0 };
                        let id = if i == j { 1.0 } else { 0.0 };
                        h[i * n + j] = d2 * uu + d1r * (id - uu);
                    }
                }
            }
        }
        Ok(h)
    }

    /// `(φ'(r)/r, φ''(r))` for radial kinds.
    fn radial(&self, e: &EdgeTerm, r: f64) -> Result<(f64, f64)> {
        match &self.kind {
            PairKind::KuhnGrunP10 { .. } | PairKind::KuhnGrunExact { .. } => {
                let mode = if matches!(self.kind, PairKind::KuhnGrunP10 { .. }) { KgMode::P10 } else { KgMode::Exact };
                let s = e.inv_len / e.n_xy.sqrt();
                let t = r * s;
                Ok((
                    e.weight * kuhn_grun_slope_ratio(t, mode)? * s * s,
                    e.weight * kuhn_grun_second(t, mode)? * s * s,
                ))
            }
            PairKind::Polynomial { terms } => {
                let mut d1r = 0.0;
                let mut d2 = 0.0;
                for t in terms {
                    if t[0] == 0.0 {
                        continue;
                    }
                    if r == 0.0 {
                        if t[1] < 2.0 {
                            return Err(Error::NonDifferentiablePotential(format!("|ξ|^{} at ξ = 0", t[1])));
                        }
                        if t[1] == 2.0 {
                            d1r += 2.0 * t[0];
                            d2 += 2.0 * t[0];
                        }
                        continue;
                    }
                    d1r += t[0] * t[1] * r.powf(t[1] - 2.0);
                    d2 += t[0] * t[1] * (t[1] - 1.0) * r.powf(t[1] - 2.0);
                }
                Ok((e.weight * d1r, e.weight * d2))
            }
            PairKind::Quadratic { .. } => unreachable!(),
        }
    }
}

/// Per-edge factors: energy is `weight · f(...)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeTerm {
    pub weight: f64,
    pub inv_len: f64,
    /// `(|x - y| / ℓ)²` for Kuhn–Grün, 1 otherwise.
    pub n_xy: f64,
}

fn quad_form(a: &[f64], xi: &[f64]) -> f64 {
    let n = xi.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += xi[i] * a[i * n + j] * xi[j];
        }
    }
    s
}

fn cholesky_check(a: &[f64], n: usize) -> Result<()> {
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut s = a[j * n + j];
        for k in 0..j {
            s -= l[j * n + k] * l[j * n + k];
        }
        if !(s > 0.0) {
            return Err(Error::NotPositiveDefinite { row: j, pivot: s });
        }
        l[j * n + j] = s.sqrt();
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / l[j * n + j];
        }
    }
    Ok(())
}

/// Pair energy for the edge `(x, y)` and increment `xi = u(x) - u(y)`.
pub fn pair_energy(pot: &PairPotential, x: &[f64], y: &[f64], xi: &[f64]) -> Result<f64> {
    let len = dist(x, y);
    if !(len > 0.0) {
        return Err(Error::DegenerateEdge(0, 0));
    }
    pot.eval(&pot.edge(len, 1.0)?, xi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum VolumetricKind {
    #[default]
    None,
    ConvexWell,
}

/// `weight · ((t-1)² + c_neg · max(0, -t)^exponent)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumetricPotential {
    pub kind: VolumetricKind,
    #[serde(default = "one")]
    pub c_neg: f64,
    /// `p / d`.
    #[serde(default = "one")]
    pub exponent: f64,
    #[serde(default = "one")]
    pub weight: f64,
}

impl Default for VolumetricPotential {
    fn default() -> Self {
        VolumetricPotential::none()
    }
}

impl VolumetricPotential {
    pub fn none() -> Self {
        VolumetricPotential { kind: VolumetricKind::None, c_neg: 1.0, exponent: 1.0, weight: 1.0 }
    }

    pub fn convex_well(p: f64, d: usize, weight: f64) -> Self {
        VolumetricPotential { kind: VolumetricKind::ConvexWell, c_neg: 1.0, exponent: p / d as f64, weight }
    }

    pub fn is_none(&self) -> bool {
        self.kind == VolumetricKind::None || self.weight == 0.0
    }

    pub fn check(&self) -> Result<()> {
        if self.kind == VolumetricKind::ConvexWell
            && (!(self.c_neg >= 0.0) || !(self.exponent >= 1.0) || !(self.weight >= 0.0))
        {
            return Err(Error::InvalidParams("convex well needs c_neg >= 0, p/d >= 1, weight >= 0".into()));
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self.kind {
            VolumetricKind::None => 0.0,
            VolumetricKind::ConvexWell => {
                let neg = if t < 0.0 { self.c_neg * (-t).powf(self.exponent) } else { 0.0 };
                self.weight * ((t - 1.0).powi(2) + neg)
            }
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match self.kind {
            VolumetricKind::None => 0.0,
            VolumetricKind::ConvexWell => {
                let neg = if t < 0.0 { -self.c_neg * self.exponent * (-t).powf(self.exponent - 1.0) } else { 0.0 };
                self.weight * (2.0 * (t - 1.0) + neg)
            }
        }
    }
}
