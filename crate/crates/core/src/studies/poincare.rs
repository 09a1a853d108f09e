use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::discrete_norms;
use crate::error::{Error, Result};
use crate::graph::{ExtendedGraph, GraphParams, Window};
use crate::zero_temp::GraphSource;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PoincareParams {
    pub graph: GraphParams,
    pub windows: Vec<f64>,
    pub p: f64,
    pub seeds: Vec<u64>,
    /// Bumps per test function.
    pub bumps: usize,
    /// Bumps live in `[δ, 1 - δ]^d` of the unit domain.
    pub delta: f64,
    /// Allowed `max / min` of the per-window maximal ratios.
    pub factor: f64,
}

impl Default for PoincareParams {
    fn default() -> Self {
        PoincareParams {
            graph: GraphParams::default(),
            windows: vec![32.0, 64.0, 128.0, 256.0],
            p: 2.0,
            seeds: vec![1, 2, 3],
            bumps: 3,
            delta: 0.25,
            factor: 2.0,
        }
    }
}

/// Sum of smooth compactly supported bumps on the unit cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroBump {
    pub centers: Vec<Vec<f64>>,
    pub radii: Vec<f64>,
    pub amplitudes: Vec<f64>,
}

impl MacroBump {
    /// Random bumps with supports inside `[δ, 1 - δ]^d` and amplitudes in `[1/2, 1]`.
    pub fn random(d: usize, bumps: usize, delta: f64, seed: u64) -> Result<Self> {
        let width = 1.0 - 2.0 * delta;
        if !(delta > 0.0 && width > 0.0) || bumps == 0 {
            return Err(Error::InvalidParams(format!("need 0 < δ < 1/2 and at least one bump, got δ = {delta}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = MacroBump { centers: vec![], radii: vec![], amplitudes: vec![] };
        for _ in 0..bumps {
            let r = width * rng.random_range(0.2..0.4);
            b.centers.push((0..d).map(|_| rng.random_range(delta + r..1.0 - delta - r)).collect());
            b.radii.push(r);
            b.amplitudes.push(rng.random_range(0.5..1.0));
        }
        Ok(b)
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        self.centers
            .iter()
            .zip(&self.radii)
            .zip(&self.amplitudes)
            .map(|((c, r), a)| {
                let s2 = c.iter().zip(y).map(|(ci, yi)| (yi - ci).powi(2)).sum::<f64>() / (r * r);
                if s2 < 1.0 {
                    a * (1.0 - 1.0 / (1.0 - s2)).exp()
                } else {
                    0.0
                }
            })
            .sum()
    }
}

/// `‖u‖^p / (ε^{-p} (‖∇u‖^p + ε^{1-d}))` on the region, `ε = 1 / max side`.
///
/// `u` must stay below 1 in norm on vertices within `band` of the region boundary.
pub fn poincare_ratio(g: &ExtendedGraph, u: &[f64], n: usize, p: f64, region: &Window, band: f64) -> Result<f64> {
    for i in 0..g.len() {
        let x = g.position(i);
        if region.contains(x) && region.boundary_distance(x) <= band {
            let norm = u[i * n..(i + 1) * n].iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(norm < 1.0) {
                return Err(Error::InfeasibleBoundary(format!(
                    "test function has |u| = {norm} at vertex {i} inside the boundary band"
                )));
            }
        }
    }
    let eps = 1.0 / region.max_side();
    let d = g.dim() as f64;
    let norms = discrete_norms(g, u, n, p, &region.scaled(eps), eps);
    Ok(norms.vertex.powf(p) / (eps.powf(-p) * (norms.edge.powf(p) + eps.powf(1.0 - d))))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoincarePoint {
    pub side: f64,
    pub seed: u64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoincareReport {
    pub points: Vec<PoincarePoint>,
    /// Largest ratio per window, in window order.
    pub max_ratio: Vec<f64>,
    pub spread: f64,
    pub bounded: bool,
}

/// Ratio for the bump of `seed` on the window of side `side`: `u(x) = L ψ(x / L)`.
pub fn poincare_point(params: &PoincareParams, side: f64, seed: u64) -> Result<PoincarePoint> {
    let d = params.graph.dim;
    let region = Window::cube(d, 0.0, side);
    let g = GraphSource::generate(params.graph.clone()).graph(&region, seed)?;
    let bump = MacroBump::random(d, params.bumps, params.delta, seed)?;
    let u: Vec<f64> = (0..g.len())
        .map(|i| {
            let y: Vec<f64> = g.position(i).iter().map(|x| x / side).collect();
            side * bump.eval(&y)
        })
        .collect();
    let ratio = poincare_ratio(&g, &u, 1, params.p, &region, params.graph.interaction_range)?;
    Ok(PoincarePoint { side, seed, ratio })
}

/// Empirical Poincaré ratios over a window sweep; the maximal ratio should stay bounded.
pub fn poincare_probe(params: &PoincareParams) -> Result<PoincareReport> {
    let jobs: Vec<(f64, u64)> = params.windows.iter().flat_map(|&w| params.seeds.iter().map(move |&s| (w, s))).collect();
    let points = jobs.par_iter().map(|&(w, s)| poincare_point(params, w, s)).collect::<Result<Vec<_>>>()?;
    Ok(summarize(params, points))
}

pub(crate) fn summarize(params: &PoincareParams, points: Vec<PoincarePoint>) -> PoincareReport {
    let max_ratio: Vec<f64> = params
        .windows
        .iter()
        .map(|&w| points.iter().filter(|p| p.side == w).map(|p| p.ratio).fold(0.0, f64::max))
        .collect();
    let lo = max_ratio.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = max_ratio.iter().copied().fold(0.0, f64::max);
    let spread = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    PoincareReport { points, max_ratio, spread, bounded: spread <= params.factor }
}
