//! Zero-temperature cell problems: minimal energy per volume under affine boundary data.

mod estimate;
mod structure;

pub use estimate::{estimate_w_inf, growth_sandwich, w_inf_from_points, CellSetup, GraphSource, SandwichFit, WInfEstimate, WindowPoint};
pub use structure::{rank_one_line, rank_one_probe, subadditivity_check, RankOneDefect, RankOneReport, SubadditivityReport};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{apply_linear, Assembly, Deformation, PairPotential, Role, VolumetricPotential};
use crate::error::{Error, Result};
use crate::graph::{ExtendedGraph, Window};
use crate::optimize::{lbfgs, LbfgsParams, Objective};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryMode {
    #[default]
    Clamped,
    /// Band vertices stay strictly within distance 1 of the datum.
    Soft,
}

/// Affine boundary datum `φ(x) = Λx + b` in graph coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Datum {
    /// Row-major `n x d`.
    pub matrix: Vec<f64>,
    #[serde(default)]
    pub offset: Vec<f64>,
}

impl Datum {
    pub fn linear(matrix: Vec<f64>) -> Self {
        Datum { matrix, offset: vec![] }
    }

    pub fn with_offset(mut self, offset: Vec<f64>) -> Self {
        self.offset = offset;
        self
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut v = apply_linear(&self.matrix, x);
        for (a, b) in v.iter_mut().zip(&self.offset) {
            *a += b;
        }
        v
    }

    /// Frobenius norm `|Λ|`.
    pub fn norm(&self) -> f64 {
        self.matrix.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// `inf { H_ε(D, u) : u ∈ B_ε(D, φ) }` on one graph.
#[derive(Debug, Clone)]
pub struct CellProblem<'g> {
    pub graph: &'g ExtendedGraph,
    /// `D_ε` in graph coordinates.
    pub region: Window,
    pub eps: f64,
    pub datum: Datum,
    pub mode: BoundaryMode,
    pub pair: PairPotential,
    pub vol: VolumetricPotential,
    /// Width of the boundary band; the graph's interaction range `C0` by default.
    pub band: f64,
}

impl<'g> CellProblem<'g> {
    /// Problem on `D_ε = D / ε`.
    pub fn new(
        graph: &'g ExtendedGraph,
        domain: &Window,
        eps: f64,
        datum: Datum,
        pair: PairPotential,
        vol: VolumetricPotential,
    ) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::InvalidParams(format!("scale eps = {eps} must be positive")));
        }
        let mut p = Self::on_region(graph, domain.scaled(1.0 / eps), datum, pair, vol)?;
        p.eps = eps;
        Ok(p)
    }

    /// Problem with `D_ε` given directly; `ε` is taken as one over its largest side.
    pub fn on_region(
        graph: &'g ExtendedGraph,
        region: Window,
        datum: Datum,
        pair: PairPotential,
        vol: VolumetricPotential,
    ) -> Result<Self> {
        let d = graph.dim();
        if region.dim() != d {
            return Err(Error::DimensionMismatch(format!("region has dimension {}, graph {d}", region.dim())));
        }
        if datum.matrix.is_empty() || datum.matrix.len() % d != 0 {
            return Err(Error::DimensionMismatch(format!("{} matrix entries for d = {d}", datum.matrix.len())));
        }
        let n = datum.matrix.len() / d;
        if !datum.offset.is_empty() && datum.offset.len() != n {
            return Err(Error::DimensionMismatch(format!("offset has {} entries, n = {n}", datum.offset.len())));
        }
        let c0 = graph.params.interaction_range;
        if !graph.fixture_only && !region.expanded(c0).is_subset_of(&graph.window) {
            return Err(Error::InvalidParams(format!(
                "graph window must contain the region plus a margin of {c0}"
            )));
        }
        Ok(CellProblem {
            graph,
            eps: 1.0 / region.max_side(),
            region,
            datum,
            mode: BoundaryMode::Clamped,
            pair,
            vol,
            band: c0,
        })
    }

    pub fn with_mode(mut self, mode: BoundaryMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_band(mut self, band: f64) -> Self {
        self.band = band;
        self
    }

    pub fn n(&self) -> usize {
        self.datum.matrix.len() / self.graph.dim()
    }

    /// Roles: band vertices clamped (or soft), the rest of `D_ε` free, vertices outside clamped.
    pub fn roles(&self) -> Vec<Role> {
        (0..self.graph.len())
            .map(|i| {
                let x = self.graph.position(i);
                if !self.region.contains(x) {
                    Role::Clamped
                } else if self.region.boundary_distance(x) <= self.band {
                    match self.mode {
                        BoundaryMode::Clamped => Role::Clamped,
                        BoundaryMode::Soft => Role::Soft,
                    }
                } else {
                    Role::Free
                }
            })
            .collect()
    }

    /// `u = φ` everywhere with this problem's roles.
    pub fn affine_state(&self) -> Deformation {
        let mut u = Deformation::from_map(self.graph, self.n(), |x| self.datum.eval(x));
        u.roles = self.roles();
        u
    }

    pub fn assembly(&self) -> Result<Assembly> {
        Assembly::on_region(self.graph, &self.region, self.n(), &self.pair, &self.vol)
    }

    /// `1e-8 (1 + |Λ|^{p-1})`.
    pub fn default_tol_grad(&self) -> f64 {
        1e-8 * (1.0 + self.datum.norm().powf(self.pair.growth_exponent() - 1.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverParams {
    pub restarts: usize,
    pub sigma_init: f64,
    /// Overrides the default `1e-8 (1 + |Λ|^{p-1})`.
    pub tol_grad: Option<f64>,
    pub max_iter: usize,
    pub memory: usize,
    pub seed: u64,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams { restarts: 8, sigma_init: 0.1, tol_grad: None, max_iter: 100_000, memory: 12, seed: 0 }
    }
}

impl SolverParams {
    /// Same parameters with the restart seed mixed with a graph seed.
    pub fn for_seed(&self, seed: u64) -> Self {
        SolverParams { seed: self.seed ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15), ..*self }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizationResult {
    pub deformation: Deformation,
    pub energy: f64,
    /// `energy / |D_ε|`.
    pub density: f64,
    pub grad_norm: f64,
    pub tol_grad: f64,
    pub best_restart: usize,
    pub iterations: Vec<usize>,
    pub restart_energies: Vec<f64>,
    /// `(max - min) / |min|` over restarts.
    pub restart_spread: f64,
    /// Energy of the affine competitor `u = φ`.
    pub affine_energy: f64,
    pub free_dofs: usize,
}

const SOFT_MARGIN: f64 = 1e-6;

struct CellObjective<'a> {
    asm: &'a Assembly,
    n: usize,
    movable: Vec<usize>,
    soft: Vec<bool>,
    reference: Vec<f64>,
    u: Vec<f64>,
    grad: Vec<f64>,
}

impl CellObjective<'_> {
    /// Soft vertices are parametrized by `z ∈ ℝⁿ` through `u = φ + R tanh(|z|) z/|z|`, `R = 1 - margin`.
    fn soft_map(z: &[f64]) -> (f64, f64, f64) {
        let s = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        let r = 1.0 - SOFT_MARGIN;
        if s < 1e-8 {
            // tanh(s)/s and its radial derivative near 0
            (r * (1.0 - s * s / 3.0), r * (1.0 - s * s), s)
        } else {
            let t = s.tanh();
            (r * t / s, r * (1.0 - t * t), s)
        }
    }

    fn to_values(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        for (k, &v) in self.movable.iter().enumerate() {
            let xs = &x[k * n..(k + 1) * n];
            let dst = &mut out[v * n..(v + 1) * n];
            if self.soft[k] {
                let (a, _, _) = Self::soft_map(xs);
                for c in 0..n {
                    dst[c] = self.reference[k * n + c] + a * xs[c];
                }
            } else {
                dst.copy_from_slice(xs);
            }
        }
    }
}

impl Objective for CellObjective<'_> {
    fn eval(&mut self, x: &[f64], g: &mut [f64]) -> Result<f64> {
        let n = self.n;
        let mut u = std::mem::take(&mut self.u);
        self.to_values(x, &mut u);
        self.u = u;
        let h = self.asm.energy_grad(&self.u, &mut self.grad)?;
        for (k, &v) in self.movable.iter().enumerate() {
            let gu = &self.grad[v * n..(v + 1) * n];
            if self.soft[k] {
                // J = a (I - ẑẑᵀ) + b ẑẑᵀ
                let z = &x[k * n..(k + 1) * n];
                let (a, b, s) = Self::soft_map(z);
                let proj = if s > 0.0 { z.iter().zip(gu).map(|(zi, gi)| zi * gi).sum::<f64>() / (s * s) } else { 0.0 };
                for c in 0..n {
                    g[k * n + c] = a * (gu[c] - proj * z[c]) + b * proj * z[c];
                }
            } else {
                g[k * n..(k + 1) * n].copy_from_slice(gu);
            }
        }
        Ok(h)
    }
}

/// Multi-start L-BFGS for the cell problem; restart 0 starts at the affine state.
pub fn minimize_cell(problem: &CellProblem, params: &SolverParams) -> Result<MinimizationResult> {
    let asm = problem.assembly()?;
    minimize_assembled(problem, &asm, params)
}

pub(crate) fn minimize_assembled(problem: &CellProblem, asm: &Assembly, params: &SolverParams) -> Result<MinimizationResult> {
    let n = problem.n();
    let base = problem.affine_state();
    if base.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InfeasibleBoundary("boundary datum is not finite".into()));
    }
    let movable: Vec<usize> = asm.vertices.iter().copied().filter(|&v| base.roles[v] != Role::Clamped).collect();
    let soft: Vec<bool> = movable.iter().map(|&v| base.roles[v] == Role::Soft).collect();
    let reference: Vec<f64> = movable.iter().flat_map(|&v| base.value(v).to_vec()).collect();
    let start: Vec<f64> = movable
        .iter()
        .zip(&soft)
        .flat_map(|(&v, &sf)| if sf { vec![0.0; n] } else { base.value(v).to_vec() })
        .collect();
    let affine_energy = asm.energy(&base.values)?;
    let tol_grad = params.tol_grad.unwrap_or_else(|| problem.default_tol_grad());
    let lb = LbfgsParams { memory: params.memory, tol_grad, max_iter: params.max_iter };
    let restarts = params.restarts.max(1);

    let runs: Vec<Result<_>> = (0..restarts)
        .into_par_iter()
        .map(|k| {
            let mut obj = CellObjective {
                asm,
                n,
                movable: movable.clone(),
                soft: soft.clone(),
                reference: reference.clone(),
                u: base.values.clone(),
                grad: vec![0.0; base.values.len()],
            };
            let mut x0 = start.clone();
            if k > 0 {
                let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
                rng.set_stream(k as u64);
                for v in x0.iter_mut() {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *v += params.sigma_init * z;
                }
            }
            lbfgs(&mut obj, &x0, &lb)
        })
        .collect();
    let mut outs = Vec::with_capacity(restarts);
    for r in runs {
        outs.push(r?);
    }
    let best = (0..outs.len())
        .min_by(|&a, &b| outs[a].value.total_cmp(&outs[b].value))
        .expect("at least one restart");
    let out = &outs[best];
    if !out.converged {
        return Err(Error::NotConverged { iterations: out.iterations, best_energy: out.value, grad_norm: out.grad_norm });
    }
    let energies: Vec<f64> = outs.iter().map(|o| o.value).collect();
    let (lo, hi) = energies.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &e| (a.min(e), b.max(e)));
    let spread = if lo.abs() > 0.0 { (hi - lo) / lo.abs() } else { hi - lo };
    let mut u = base;
    let obj = CellObjective { asm, n, movable: movable.clone(), soft, reference, u: vec![], grad: vec![] };
    obj.to_values(&out.x, &mut u.values);
    Ok(MinimizationResult {
        deformation: u,
        energy: out.value,
        density: out.value / asm.domain_volume,
        grad_norm: out.grad_norm,
        tol_grad,
        best_restart: best,
        iterations: outs.iter().map(|o| o.iterations).collect(),
        restart_energies: energies,
        restart_spread: spread,
        affine_energy,
        free_dofs: movable.len() * n,
    })
}

#[cfg(test)]
mod tests;
