use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mcmc::{run_chain, ChainParams};
use super::{gaussian_free_energy, EstimateMeta, FreeEnergyEstimate, Hamiltonian, Method, Path, QuadEdge, QuadraticModel};
use crate::energy::{Assembly, Deformation};
use crate::error::{Error, Result};
use crate::stats::batch_means;
use crate::zero_temp::{minimize_cell, CellProblem, SolverParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceKind {
    /// `c_e |ξ|²` per edge with `c_e` from the pair Hessian at the affine increment.
    #[default]
    Affine,
    /// Per-edge pair Hessian at the cell minimizer, centered on its increments.
    Centered,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TiParams {
    /// Gauss–Legendre nodes in λ.
    pub nodes: usize,
    pub chain: ChainParams,
    pub reference: ReferenceKind,
    /// Multiplies the fitted reference stiffness.
    pub reference_scale: f64,
    /// Switch to the centered reference when the overlap check fails on the affine one.
    pub refit: bool,
    /// Maximum `Var(β(H - H_ref))` at a node; `4m + 100` when unset.
    pub overlap_threshold: Option<f64>,
    pub ess_floor: f64,
    /// Minimizer used by the centered reference.
    pub solver: SolverParams,
}

impl Default for TiParams {
    fn default() -> Self {
        TiParams {
            nodes: 8,
            chain: ChainParams::default(),
            reference: ReferenceKind::Affine,
            reference_scale: 1.0,
            refit: true,
            overlap_threshold: None,
            ess_floor: 100.0,
            solver: SolverParams { restarts: 2, ..SolverParams::default() },
        }
    }
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(k: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; k];
    let mut w = vec![0.0; k];
    for i in 0..k {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (k as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=k {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let pk = if k == 1 { z } else { p1 };
            let pkm1 = if k == 1 { 1.0 } else { p0 };
            dp = k as f64 * (z * pk - pkm1) / (z * z - 1.0);
            let dz = pk / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[k - 1 - i] = 0.5 * (z + 1.0);
        w[k - 1 - i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

fn reference_model(problem: &CellProblem, asm: &Assembly, kind: ReferenceKind, scale: f64, solver: &SolverParams) -> Result<QuadraticModel> {
    let n = problem.n();
    let (state, offset) = match kind {
        ReferenceKind::Affine => (problem.affine_state(), 0.0),
        ReferenceKind::Centered => {
            let r = minimize_cell(problem, solver)?;
            (r.deformation, r.energy)
        }
    };
    let mut edges = Vec::with_capacity(asm.edges.len());
    for e in &asm.edges {
        let xi: Vec<f64> = (0..n).map(|c| state.values[e.i * n + c] - state.values[e.j * n + c]).collect();
        let hess = asm.pair.hessian(&e.term, &xi)?;
        let stiffness = match kind {
            ReferenceKind::Affine => {
                let c = (0..n).map(|r| hess[r * n + r]).sum::<f64>() / (2.0 * n as f64);
                (0..n * n).map(|k| if k / n == k % n { scale * c } else { 0.0 }).collect()
            }
            ReferenceKind::Centered => hess.iter().map(|h| 0.5 * scale * h).collect(),
        };
        let center = match kind {
            ReferenceKind::Affine => vec![],
            ReferenceKind::Centered => xi,
        };
        edges.push(QuadEdge { i: e.i, j: e.j, stiffness, center });
    }
    QuadraticModel::build(problem, edges, offset, asm.domain_volume)
}

struct NodeResult {
    mean: f64,
    stderr: f64,
    ess: f64,
    acceptance: f64,
    variance: f64,
}

/// `(1/|D|) ∫₀¹ ⟨H - H_ref⟩_λ dλ` added to the exact reference value.
pub fn ti_integrate(
    target: &dyn Hamiltonian,
    reference: &QuadraticModel,
    beta: f64,
    params: &TiParams,
) -> Result<FreeEnergyEstimate> {
    let base = gaussian_free_energy(reference, beta)?;
    let (lams, weights) = gauss_legendre(params.nodes.max(1));
    let m = reference.dofs() as f64;
    let threshold = params.overlap_threshold.unwrap_or(4.0 * m + 100.0);
    let start: &Deformation = &reference.minimizer;
    let nodes: Vec<Result<NodeResult>> = lams
        .par_iter()
        .enumerate()
        .map(|(k, &lambda)| {
            let path = Path { reference, target, lambda };
            let chain = ChainParams { stream: params.chain.stream.wrapping_add(k as u64), ..params.chain };
            let out = run_chain(&path, beta, start, &reference.free, &chain, |u| {
                Ok(target.energy(u)? - reference.energy(u)?)
            })?;
            let bm = batch_means(&out.observations, chain.batches);
            let var = out.observations.iter().map(|v| (v - bm.mean).powi(2)).sum::<f64>()
                / (out.observations.len().max(2) - 1) as f64;
            Ok(NodeResult { mean: bm.mean, stderr: bm.stderr, ess: bm.ess, acceptance: out.acceptance, variance: beta * beta * var })
        })
        .collect();
    let mut value = 0.0;
    let mut var = 0.0;
    let mut meta = EstimateMeta { beta, domain_volume: reference.domain_volume, dofs: reference.dofs(), seed: Some(params.chain.seed), ..base.meta };
    for (k, r) in nodes.into_iter().enumerate() {
        let r = r?;
        if r.variance > threshold {
            return Err(Error::OverlapFailure { node: k, lambda: lams[k], variance: r.variance, threshold });
        }
        if r.ess < params.ess_floor {
            return Err(Error::InsufficientSampling { node: k, ess: r.ess, floor: params.ess_floor });
        }
        value += weights[k] * r.mean;
        var += (weights[k] * r.stderr).powi(2);
        meta.acceptance.push(r.acceptance);
        meta.ess.push(r.ess);
        meta.overlap_variance.push(r.variance);
    }
    let vol = reference.domain_volume;
    Ok(FreeEnergyEstimate { value: base.value + value / vol, stderr: var.sqrt() / vol, method: Method::TiMcmc, meta })
}

/// Free energy density of a clamped cell problem by thermodynamic integration from a Gaussian reference.
pub fn free_energy_ti(problem: &CellProblem, beta: f64, params: &TiParams) -> Result<FreeEnergyEstimate> {
    let asm = problem.assembly()?;
    let run = |kind| -> Result<FreeEnergyEstimate> {
        let reference = reference_model(problem, &asm, kind, params.reference_scale, &params.solver)?;
        let mut est = ti_integrate(&asm, &reference, beta, params)?;
        est.meta.reference = Some(kind);
        Ok(est)
    };
    match run(params.reference) {
        Err(Error::OverlapFailure { .. }) if params.refit && params.reference == ReferenceKind::Affine => {
            run(ReferenceKind::Centered)
        }
        r => r,
    }
}
