use std::f64::consts::PI;

use super::{EstimateMeta, FreeEnergyEstimate, Hamiltonian, Method};
use crate::energy::{Deformation, PairKind, Role};
use crate::error::{Error, Result};
use crate::linalg::{Cholesky, SparseSym};
use crate::zero_temp::{BoundaryMode, CellProblem};

/// `a (ξ - c)ᵀ(ξ - c)`-type edge term with a full `n x n` stiffness already scaled by the edge weight.
#[derive(Debug, Clone)]
pub struct QuadEdge {
    pub i: usize,
    pub j: usize,
    pub stiffness: Vec<f64>,
    /// Increment at which the term vanishes; zero when empty.
    pub center: Vec<f64>,
}

/// `H(u) = offset + Σ (ξ - c)ᵀ A (ξ - c)` with clamped boundary values and its Gaussian structure.
#[derive(Debug, Clone)]
pub struct QuadraticModel {
    pub n: usize,
    pub edges: Vec<QuadEdge>,
    pub offset: f64,
    /// Free vertices, in DOF order.
    pub free: Vec<usize>,
    /// `(ΣA over free-free blocks)`: `H(û + v) = H(û) + vᵀKv`.
    pub k: SparseSym,
    pub chol: Cholesky,
    /// Minimizer `û` on every vertex (clamped values elsewhere).
    pub minimizer: Deformation,
    pub h_min: f64,
    pub domain_volume: f64,
    vertex_edges: Vec<Vec<usize>>,
}

impl QuadraticModel {
    /// The Hamiltonian of a clamped cell problem with a quadratic pair potential and no volumetric term.
    pub fn from_problem(problem: &CellProblem) -> Result<Self> {
        let PairKind::Quadratic { matrix } = &problem.pair.kind else {
            return Err(Error::InvalidParams("the Gaussian model needs a quadratic pair potential".into()));
        };
        if !problem.vol.is_none() {
            return Err(Error::InvalidParams("the Gaussian model needs the volumetric term switched off".into()));
        }
        let asm = problem.assembly()?;
        let edges = asm
            .edges
            .iter()
            .map(|e| QuadEdge { i: e.i, j: e.j, stiffness: matrix.iter().map(|a| a * e.term.weight).collect(), center: vec![] })
            .collect();
        Self::build(problem, edges, 0.0, asm.domain_volume)
    }

    /// Quadratic Hamiltonian on `problem`'s graph and boundary data with explicit edge terms.
    pub fn build(problem: &CellProblem, edges: Vec<QuadEdge>, offset: f64, domain_volume: f64) -> Result<Self> {
        if problem.mode != BoundaryMode::Clamped {
            return Err(Error::InvalidParams("free energies use clamped boundary conditions".into()));
        }
        let n = problem.n();
        let base = problem.affine_state();
        let nv = base.len();
        let mut dof = vec![usize::MAX; nv];
        let free: Vec<usize> =
            (0..nv).filter(|&v| base.roles[v] == Role::Free && problem.region.contains(problem.graph.position(v))).collect();
        for (k, &v) in free.iter().enumerate() {
            dof[v] = k;
        }
        let m = free.len() * n;
        let mut k = SparseSym::new(m);
        // H(x) = xᵀKx + 2bᵀx + const in the free values x
        let mut b = vec![0.0; m];
        for e in &edges {
            let (fi, fj) = (dof[e.i], dof[e.j]);
            // clamped part of the increment, minus the center
            let mut g = vec![0.0; n];
            for c in 0..n {
                let ui = if fi == usize::MAX { base.values[e.i * n + c] } else { 0.0 };
                let uj = if fj == usize::MAX { base.values[e.j * n + c] } else { 0.0 };
                g[c] = ui - uj - e.center.get(c).copied().unwrap_or(0.0);
            }
            for r in 0..n {
                let ag: f64 = (0..n).map(|c| e.stiffness[r * n + c] * g[c]).sum();
                for c in 0..n {
                    let a = e.stiffness[r * n + c];
                    if fi != usize::MAX {
                        if fi * n + r >= fi * n + c {
                            k.add(fi * n + r, fi * n + c, a);
                        }
                    }
                    if fj != usize::MAX {
                        if fj * n + r >= fj * n + c {
                            k.add(fj * n + r, fj * n + c, a);
                        }
                    }
                    if fi != usize::MAX && fj != usize::MAX {
                        k.add(fi * n + r, fj * n + c, -a);
                    }
                }
                if fi != usize::MAX {
                    b[fi * n + r] += ag;
                }
                if fj != usize::MAX {
                    b[fj * n + r] -= ag;
                }
            }
        }
        let chol = k.cholesky()?;
        let x = chol.solve(&b.iter().map(|v| -v).collect::<Vec<_>>());
        let mut minimizer = base;
        for (kk, &v) in free.iter().enumerate() {
            minimizer.values[v * n..(v + 1) * n].copy_from_slice(&x[kk * n..(kk + 1) * n]);
        }
        let mut vertex_edges = vec![vec![]; nv];
        for (idx, e) in edges.iter().enumerate() {
            vertex_edges[e.i].push(idx);
            vertex_edges[e.j].push(idx);
        }
        let mut model = QuadraticModel {
            n,
            edges,
            offset,
            free,
            k,
            chol,
            minimizer,
            h_min: 0.0,
            domain_volume,
            vertex_edges,
        };
        model.h_min = model.energy(&model.minimizer.values)?;
        Ok(model)
    }

    /// Scalar degrees of freedom `m`.
    pub fn dofs(&self) -> usize {
        self.free.len() * self.n
    }

    pub fn log_det_k(&self) -> f64 {
        self.chol.log_det()
    }

    fn edge_energy(&self, e: &QuadEdge, u: &[f64], xi: &mut [f64]) -> f64 {
        let n = self.n;
        for c in 0..n {
            xi[c] = u[e.i * n + c] - u[e.j * n + c] - e.center.get(c).copied().unwrap_or(0.0);
        }
        let mut s = 0.0;
        for r in 0..n {
            for c in 0..n {
                s += xi[r] * e.stiffness[r * n + c] * xi[c];
            }
        }
        s
    }
}

impl Hamiltonian for QuadraticModel {
    fn energy(&self, u: &[f64]) -> Result<f64> {
        let mut xi = vec![0.0; self.n];
        Ok(self.offset + self.edges.iter().map(|e| self.edge_energy(e, u, &mut xi)).sum::<f64>())
    }

    fn energy_grad(&self, u: &[f64], grad: &mut [f64]) -> Result<f64> {
        let n = self.n;
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut xi = vec![0.0; n];
        let mut h = self.offset;
        for e in &self.edges {
            h += self.edge_energy(e, u, &mut xi);
            for r in 0..n {
                let g: f64 = 2.0 * (0..n).map(|c| e.stiffness[r * n + c] * xi[c]).sum::<f64>();
                grad[e.i * n + r] += g;
                grad[e.j * n + r] -= g;
            }
        }
        Ok(h)
    }

    fn local_energy(&self, u: &[f64], v: usize) -> Result<f64> {
        let mut xi = vec![0.0; self.n];
        Ok(self.vertex_edges[v].iter().map(|&k| self.edge_energy(&self.edges[k], u, &mut xi)).sum())
    }
}

/// `H(û)/|D_ε| + (log det(βK) - m log π) / (2β|D_ε|)`.
pub fn gaussian_free_energy(model: &QuadraticModel, beta: f64) -> Result<FreeEnergyEstimate> {
    if !(beta > 0.0) {
        return Err(Error::InvalidParams(format!("beta = {beta} must be positive")));
    }
    let m = model.dofs() as f64;
    let vol = model.domain_volume;
    let log_det = m * beta.ln() + model.log_det_k();
    let value = model.h_min / vol + (log_det - m * PI.ln()) / (2.0 * beta * vol);
    Ok(FreeEnergyEstimate {
        value,
        stderr: 0.0,
        method: Method::ExactGaussian,
        meta: EstimateMeta { beta, domain_volume: vol, dofs: model.dofs(), ..Default::default() },
    })
}
