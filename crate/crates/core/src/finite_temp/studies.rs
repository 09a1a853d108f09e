use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ti::{free_energy_ti, TiParams};
use super::{gaussian_free_energy, FreeEnergyEstimate, Method, QuadraticModel};
use crate::energy::{Deformation, PairKind};
use crate::error::{Error, Result};
use crate::stats::{mean_stderr, quantile};
use crate::zero_temp::{minimize_cell, CellProblem, SolverParams};

/// Cell problem and estimator budgets for a temperature sweep at one window.
#[derive(Debug, Clone)]
pub struct GapSetup<'g> {
    pub problem: CellProblem<'g>,
    pub ti: TiParams,
    pub solver: SolverParams,
}

impl<'g> GapSetup<'g> {
    pub fn new(problem: CellProblem<'g>) -> Self {
        GapSetup { problem, ti: TiParams::default(), solver: SolverParams::default() }
    }

    /// Quadratic pair, no volumetric term: every value has a closed form.
    pub fn is_gaussian(&self) -> bool {
        matches!(self.problem.pair.kind, PairKind::Quadratic { .. }) && self.problem.vol.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapPoint {
    pub beta: f64,
    pub free_energy: f64,
    pub free_energy_stderr: f64,
    pub w_inf: f64,
    pub gap: f64,
    pub gap_stderr: f64,
    /// `gap / (log β / β)`.
    pub ratio: f64,
    pub ratio_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub method: Method,
    pub points: Vec<GapPoint>,
    /// `|gap|` strictly decreasing along the grid, up to twice the combined standard error.
    pub decreasing: bool,
    /// `max ratio / min ratio`; infinite when a ratio is not positive.
    pub ratio_factor: f64,
    /// `-log Z = β |D| F` nondecreasing in β, up to twice the combined standard error.
    pub monotone_coupling: bool,
}

fn series(setup: &GapSetup, betas: &[f64]) -> Result<(Method, Vec<GapPoint>)> {
    let (method, w_inf, estimates): (Method, f64, Vec<Result<FreeEnergyEstimate>>) = if setup.is_gaussian() {
        let model = QuadraticModel::from_problem(&setup.problem)?;
        let w = model.h_min / model.domain_volume;
        (Method::ExactGaussian, w, betas.iter().map(|&b| gaussian_free_energy(&model, b)).collect())
    } else {
        let r = minimize_cell(&setup.problem, &setup.solver)?;
        let est = betas.par_iter().map(|&b| free_energy_ti(&setup.problem, b, &setup.ti)).collect();
        (Method::TiMcmc, r.density, est)
    };
    let mut points = Vec::with_capacity(betas.len());
    for (&beta, est) in betas.iter().zip(estimates) {
        let est = est?;
        let gap = est.value - w_inf;
        let scale = beta.ln() / beta;
        points.push(GapPoint {
            beta,
            free_energy: est.value,
            free_energy_stderr: est.stderr,
            w_inf,
            gap,
            gap_stderr: est.stderr,
            ratio: gap / scale,
            ratio_stderr: est.stderr / scale,
        });
    }
    Ok((method, points))
}

fn ratio_factor(points: &[GapPoint]) -> f64 {
    let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.ratio), hi.max(p.ratio)));
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

/// `W̄^β - W̄^∞` at one window across a β grid, compared with `log β / β`.
pub fn zero_temp_gap(setup: &GapSetup, betas: &[f64]) -> Result<GapReport> {
    if betas.len() < 4 {
        return Err(Error::GridTooSmall(format!("{} β values, need at least 4", betas.len())));
    }
    if betas.iter().any(|&b| !(b >= std::f64::consts::E - 1e-12)) {
        return Err(Error::InvalidParams("every β must be at least e".into()));
    }
    if betas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParams("β grid must be increasing".into()));
    }
    if betas[betas.len() - 1] / betas[0] < 100.0 * (1.0 - 1e-9) {
        return Err(Error::InvalidParams("β grid must span at least two decades".into()));
    }
    let (method, points) = series(setup, betas)?;
    let vol = setup.problem.region.volume();
    let mut decreasing = true;
    let mut monotone_coupling = true;
    for w in points.windows(2) {
        let se = (w[0].gap_stderr.powi(2) + w[1].gap_stderr.powi(2)).sqrt();
        if !(w[1].gap.abs() < w[0].gap.abs() + 2.0 * se) || (se == 0.0 && w[1].gap.abs() >= w[0].gap.abs()) {
            decreasing = false;
        }
        let a = w[0].beta * vol * w[0].free_energy;
        let b = w[1].beta * vol * w[1].free_energy;
        let se_ab = vol * ((w[0].beta * w[0].free_energy_stderr).powi(2) + (w[1].beta * w[1].free_energy_stderr).powi(2)).sqrt();
        if b < a - 2.0 * se_ab - 1e-12 * a.abs() {
            monotone_coupling = false;
        }
    }
    Ok(GapReport { method, ratio_factor: ratio_factor(&points), points, decreasing, monotone_coupling })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationSummary {
    pub distances: Vec<f64>,
    pub median: f64,
    pub p95: f64,
    /// Spread of the 95th percentile over consecutive blocks of samples.
    pub p95_stderr: f64,
}

/// Rescaled `ℓ^p` distances `ε^{1+d/p} (Σ_x |u(x) - u*(x)|^p)^{1/p}` over `vertices`.
pub fn concentration_diagnostic(
    samples: &[Vec<f64>],
    minimizer: &Deformation,
    vertices: &[usize],
    eps: f64,
    d: usize,
    p: f64,
) -> ConcentrationSummary {
    let n = minimizer.n;
    let distances: Vec<f64> = samples
        .iter()
        .map(|u| {
            let s: f64 = vertices
                .iter()
                .map(|&v| {
                    let r: f64 = (0..n).map(|c| (u[v * n + c] - minimizer.values[v * n + c]).powi(2)).sum();
                    r.sqrt().powf(p)
                })
                .sum();
            eps.powf(1.0 + d as f64 / p) * s.powf(1.0 / p)
        })
        .collect();
    if distances.is_empty() {
        return ConcentrationSummary { distances, median: 0.0, p95: 0.0, p95_stderr: 0.0 };
    }
    let blocks = 10.min(distances.len() / 20).max(1);
    let size = distances.len() / blocks;
    let block_p95: Vec<f64> = (0..blocks).map(|k| quantile(&distances[k * size..(k + 1) * size], 0.95)).collect();
    let p95_stderr = if blocks > 1 { mean_stderr(&block_p95).1 } else { 0.0 };
    ConcentrationSummary { median: quantile(&distances, 0.5), p95: quantile(&distances, 0.95), p95_stderr, distances }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoTempReport {
    pub n_circ: f64,
    pub beta_circ: f64,
    /// Free energy of `H° = (N°/β°) H̃°` at inverse temperature `β°`.
    pub physical: FreeEnergyEstimate,
    /// `(N°/β°)` times the free energy of `H̃°` at inverse temperature `N°`.
    pub rescaled: FreeEnergyEstimate,
    pub identity_error: f64,
    pub identity_relative: f64,
    pub identity_holds: bool,
    /// Gap of `H̃°` per inverse temperature `N₁`, compared with `log N₁ / N₁`.
    pub points: Vec<GapPoint>,
    pub ratio_factor: f64,
}

/// `problem` scaled by `s` in both the pair and the volumetric term.
pub fn scaled_problem<'g>(problem: &CellProblem<'g>, s: f64) -> CellProblem<'g> {
    let mut p = problem.clone();
    p.pair.scale *= s;
    p.vol.weight *= s;
    p
}

/// Two-temperature rescaling identity at `N°` and the gap of `H̃°` over an `N₁` grid.
///
/// `setup.problem` holds the dimensionless `H̃°`.
pub fn two_temperature_study(setup: &GapSetup, beta_circ: f64, n_circ: f64, n_grid: &[f64]) -> Result<TwoTempReport> {
    if n_grid.len() < 3 {
        return Err(Error::GridTooSmall(format!("{} N values, need at least 3", n_grid.len())));
    }
    if n_grid.iter().any(|&v| !(v >= 4.0)) || !(beta_circ > 0.0) || !(n_circ > 0.0) {
        return Err(Error::InvalidParams("N values must be at least 4 and β°, N° positive".into()));
    }
    let s = n_circ / beta_circ;
    let physical_setup = GapSetup { problem: scaled_problem(&setup.problem, s), ..setup.clone() };
    let (physical, tilde) = if setup.is_gaussian() {
        let a = QuadraticModel::from_problem(&physical_setup.problem)?;
        let b = QuadraticModel::from_problem(&setup.problem)?;
        (gaussian_free_energy(&a, beta_circ)?, gaussian_free_energy(&b, n_circ)?)
    } else {
        (free_energy_ti(&physical_setup.problem, beta_circ, &setup.ti)?, free_energy_ti(&setup.problem, n_circ, &setup.ti)?)
    };
    let rescaled = FreeEnergyEstimate { value: s * tilde.value, stderr: s * tilde.stderr, ..tilde };
    let identity_error = (physical.value - rescaled.value).abs();
    let identity_relative = identity_error / physical.value.abs().max(f64::MIN_POSITIVE);
    let identity_holds = match physical.method {
        Method::ExactGaussian => identity_relative <= 1e-12,
        _ => identity_error <= 3.0 * (physical.stderr.powi(2) + rescaled.stderr.powi(2)).sqrt(),
    };
    let (_, points) = series(setup, n_grid)?;
    Ok(TwoTempReport {
        n_circ,
        beta_circ,
        physical,
        rescaled,
        identity_error,
        identity_relative,
        identity_holds,
        ratio_factor: ratio_factor(&points),
        points,
    })
}
