use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{minimize_cell, BoundaryMode, CellProblem, Datum, MinimizationResult, SolverParams};
use crate::energy::{PairPotential, VolumetricPotential};
use crate::error::{Error, Result};
use crate::graph::{generate_graph, ExtendedGraph, GraphParams, Window};
use crate::stats::{mean_stderr, weighted_fit};

/// Where cell-problem graphs come from.
#[derive(Debug, Clone)]
pub enum GraphSource {
    /// A fresh graph per window and seed, on the region expanded by `margin`
    /// (and at least to the generator's minimum window).
    Generate { params: GraphParams, margin: f64 },
    /// One graph shared by every window and seed.
    Fixed(Arc<ExtendedGraph>),
}

impl GraphSource {
    pub fn generate(params: GraphParams) -> Self {
        let margin = params.interaction_range + 1.0;
        GraphSource::Generate { params, margin }
    }

    pub fn dim(&self) -> usize {
        match self {
            GraphSource::Generate { params, .. } => params.dim,
            GraphSource::Fixed(g) => g.dim(),
        }
    }

    pub fn graph(&self, region: &Window, seed: u64) -> Result<Arc<ExtendedGraph>> {
        match self {
            GraphSource::Fixed(g) => Ok(g.clone()),
            GraphSource::Generate { params, margin } => {
                let mut p = params.clone();
                p.seed = seed;
                let min_side = 4.0 * p.interaction_range;
                let need = ((min_side - region.min_side()) / 2.0).max(0.0);
                let window = if p.is_fixture() { region.expanded(*margin) } else { region.expanded(margin.max(need)) };
                Ok(Arc::new(generate_graph(&p, &window)?))
            }
        }
    }
}

/// Everything about a cell problem except the datum, the window and the seed.
#[derive(Debug, Clone)]
pub struct CellSetup {
    pub source: GraphSource,
    /// Lower corner of every cubic region `[origin, origin + L)^d`.
    pub origin: f64,
    pub pair: PairPotential,
    pub vol: VolumetricPotential,
    pub mode: BoundaryMode,
    pub band: Option<f64>,
    pub solver: SolverParams,
}

impl CellSetup {
    pub fn new(source: GraphSource, pair: PairPotential, vol: VolumetricPotential) -> Self {
        CellSetup { source, origin: 0.0, pair, vol, mode: BoundaryMode::Clamped, band: None, solver: SolverParams::default() }
    }

    pub fn region(&self, side: f64) -> Window {
        Window::cube(self.source.dim(), self.origin, self.origin + side)
    }

    pub fn problem<'g>(&self, g: &'g ExtendedGraph, region: Window, lambda: &[f64]) -> Result<CellProblem<'g>> {
        let mut p = CellProblem::on_region(g, region, Datum::linear(lambda.to_vec()), self.pair.clone(), self.vol.clone())?
            .with_mode(self.mode);
        if let Some(b) = self.band {
            p = p.with_band(b);
        }
        Ok(p)
    }

    /// Minimizes on the cube of side `side` for graph seed `seed`.
    pub fn minimize(&self, lambda: &[f64], side: f64, seed: u64) -> Result<MinimizationResult> {
        let region = self.region(side);
        let g = self.source.graph(&region, seed)?;
        let problem = self.problem(&g, region, lambda)?;
        minimize_cell(&problem, &self.solver.for_seed(seed))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowPoint {
    pub side: f64,
    pub densities: Vec<f64>,
    pub mean: f64,
    pub stderr: f64,
    pub restart_spread: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WInfEstimate {
    pub lambda: Vec<f64>,
    pub points: Vec<WindowPoint>,
    /// Intercept of `density(L) = W + b/L`; a heuristic model.
    pub extrapolated: f64,
    pub extrapolated_stderr: f64,
    pub slope: f64,
    pub residual: f64,
    /// `|m(L_K) - m(L_{K-1})| / |m(L_K)|` for the two largest windows.
    pub cauchy_gap: f64,
}

/// `W̄^∞(Λ)` from minimal densities on a window schedule, averaged over seeds.
pub fn estimate_w_inf(setup: &CellSetup, lambda: &[f64], windows: &[f64], seeds: &[u64]) -> Result<WInfEstimate> {
    if windows.len() < 3 {
        return Err(Error::GridTooSmall(format!("{} window sizes, need at least 3", windows.len())));
    }
    if seeds.is_empty() {
        return Err(Error::GridTooSmall("no seeds".into()));
    }
    let mut sides = windows.to_vec();
    sides.sort_by(|a, b| a.total_cmp(b));
    let jobs: Vec<(f64, u64)> = sides.iter().flat_map(|&s| seeds.iter().map(move |&k| (s, k))).collect();
    let runs: Vec<Result<MinimizationResult>> = jobs.par_iter().map(|&(s, k)| setup.minimize(lambda, s, k)).collect();
    let mut runs = runs.into_iter();
    let mut points = vec![];
    for &side in &sides {
        let mut batch = vec![];
        for _ in seeds {
            batch.push(runs.next().expect("one run per job")?);
        }
        points.push(WindowPoint::new(side, &batch));
    }
    w_inf_from_points(lambda, points)
}

impl WindowPoint {
    /// Seed average of minimizations on one window.
    pub fn new(side: f64, runs: &[MinimizationResult]) -> Self {
        let densities: Vec<f64> = runs.iter().map(|r| r.density).collect();
        let spread = runs.iter().map(|r| r.restart_spread).fold(0.0, f64::max);
        let iterations = runs.iter().map(|r| r.iterations.iter().sum::<usize>()).sum();
        let (mean, stderr) = mean_stderr(&densities);
        WindowPoint { side, densities, mean, stderr, restart_spread: spread, iterations }
    }
}

/// Fits `W + b/L` to window points and reports the Cauchy gap of the two largest windows.
pub fn w_inf_from_points(lambda: &[f64], mut points: Vec<WindowPoint>) -> Result<WInfEstimate> {
    points.sort_by(|a, b| a.side.total_cmp(&b.side));
    if points.len() < 3 {
        return Err(Error::GridTooSmall(format!("{} window sizes, need at least 3", points.len())));
    }
    let y: Vec<f64> = points.iter().map(|p| p.mean).collect();
    let inv: Vec<f64> = points.iter().map(|p| 1.0 / p.side).collect();
    let sig: Vec<f64> = points.iter().map(|p| p.stderr).collect();
    let weighted = sig.iter().all(|&s| s > 0.0);
    let fit = weighted_fit(&[vec![1.0; y.len()], inv], &y, weighted.then_some(&sig[..]))?;
    let k = points.len();
    let (a, b) = (points[k - 1].mean, points[k - 2].mean);
    let cauchy_gap = if a != 0.0 { (a - b).abs() / a.abs() } else { (a - b).abs() };
    Ok(WInfEstimate {
        lambda: lambda.to_vec(),
        points,
        extrapolated: fit.coef[0],
        extrapolated_stderr: fit.coef_stderr[0],
        slope: fit.coef[1],
        residual: fit.residual,
        cauchy_gap,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichFit {
    pub p: f64,
    /// Lower constant in `c|Λ|^p - C`.
    pub c: f64,
    /// `C` in both `c|Λ|^p - C` and `C(1 + |Λ|^p)`.
    pub big_c: f64,
    pub holds: bool,
}

/// Constants with `c|Λ|^p - C ≤ W ≤ C(1 + |Λ|^p)` at every `(|Λ|, W)` point.
pub fn growth_sandwich(points: &[(f64, f64)], p: f64) -> Result<SandwichFit> {
    if points.len() < 2 {
        return Err(Error::GridTooSmall("growth sandwich needs at least 2 points".into()));
    }
    let big_c = points.iter().map(|&(a, w)| w / (1.0 + a.powf(p))).fold(0.0f64, f64::max);
    let c = points.iter().map(|&(a, w)| (w + big_c) / a.powf(p)).fold(f64::INFINITY, f64::min);
    let inside = points.iter().all(|&(a, w)| c * a.powf(p) - big_c <= w * (1.0 + 1e-12) && w <= big_c * (1.0 + a.powf(p)) * (1.0 + 1e-12));
    let holds = c > 0.0 && c.is_finite() && big_c > 0.0 && big_c.is_finite() && inside;
    Ok(SandwichFit { p, c, big_c, holds })
}
