use crate::error::{Error, Result};
use crate::geometry::{adjugate, det};
use crate::graph::{interior_voronoi_cells, ExtendedGraph, Window};

use super::deformation::{Deformation, Role};
use super::potential::{EdgeTerm, PairPotential, VolumetricPotential};

#[derive(Debug, Clone)]
pub struct AsmEdge {
    pub i: usize,
    pub j: usize,
    pub term: EdgeTerm,
}

#[derive(Debug, Clone)]
pub struct AsmSimplex {
    pub vertices: Vec<usize>,
    /// `1 / det(x_1 - x_0 | ... | x_d - x_0)`.
    pub inv_det: f64,
}

#[derive(Debug, Clone)]
pub struct AsmCell {
    pub vertex: usize,
    pub volume: f64,
    /// `(simplex, |T ∩ C| / |C|)`.
    pub weights: Vec<(usize, f64)>,
}

/// The terms of `H_ε(D, ·)` on a fixed graph, domain and potential pair.
#[derive(Debug, Clone)]
pub struct Assembly {
    pub n: usize,
    pub d: usize,
    pub pair: PairPotential,
    pub vol: VolumetricPotential,
    /// Graph vertices in `D_ε`, ascending.
    pub vertices: Vec<usize>,
    pub in_domain: Vec<bool>,
    pub edges: Vec<AsmEdge>,
    pub simplices: Vec<AsmSimplex>,
    pub cells: Vec<AsmCell>,
    /// `D_ε` volume.
    pub domain_volume: f64,
    vertex_edges: Vec<Vec<usize>>,
    vertex_cells: Vec<Vec<usize>>,
}

impl Assembly {
    /// Terms of `H_ε(D, ·)` for `u: D_ε ∩ L → ℝⁿ`.
    pub fn new(
        g: &ExtendedGraph,
        domain: &Window,
        eps: f64,
        n: usize,
        pair: &PairPotential,
        vol: &VolumetricPotential,
    ) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::InvalidParams(format!("scale eps = {eps} must be positive")));
        }
        if domain.dim() != g.dim() {
            return Err(Error::DimensionMismatch(format!(
                "domain has dimension {}, graph {}",
                domain.dim(),
                g.dim()
            )));
        }
        Self::on_region(g, &domain.scaled(1.0 / eps), n, pair, vol)
    }

    /// Same as [`Assembly::new`] with `D_ε` given directly in graph coordinates.
    pub fn on_region(
        g: &ExtendedGraph,
        region: &Window,
        n: usize,
        pair: &PairPotential,
        vol: &VolumetricPotential,
    ) -> Result<Self> {
        let d = g.dim();
        pair.check(n)?;
        vol.check()?;
        if !vol.is_none() {
            if n != d {
                return Err(Error::DimensionMismatch(format!("volumetric term needs n = d, got n = {n}, d = {d}")));
            }
            if vol.exponent < 1.0 {
                return Err(Error::InvalidParams("volumetric term needs p >= d".into()));
            }
        }
        let in_domain: Vec<bool> = (0..g.len()).map(|i| region.contains(g.position(i))).collect();
        let vertices: Vec<usize> = (0..g.len()).filter(|&i| in_domain[i]).collect();
        let mult = pair.multipliers();
        let mut edges = vec![];
        for (e, &(i, j)) in g.edges.iter().enumerate() {
            if in_domain[i] && in_domain[j] {
                let len = g.edge_length(e);
                if !(len > 0.0) {
                    return Err(Error::DegenerateEdge(i, j));
                }
                let m = mult.get(&(i, j)).copied().unwrap_or(1.0);
                edges.push(AsmEdge { i, j, term: pair.edge(len, m)? });
            }
        }
        let mut simplices = vec![];
        let mut cells = vec![];
        if !vol.is_none() {
            let mut local = std::collections::HashMap::new();
            // region is already in graph coordinates
            for v in interior_voronoi_cells(g, region, 1.0) {
                let vc = g.volumetric_cell(v).expect("interior cell of a volumetric vertex");
                let mut weights = vec![];
                for &(t, o) in &vc.overlaps {
                    let k = *local.entry(t).or_insert_with(|| {
                        let s = &g.simplices[t];
                        let x0 = g.position(s[0]);
                        let mut m = vec![0.0; d * d];
                        for c in 0..d {
                            let xc = g.position(s[c + 1]);
                            for r in 0..d {
                                m[r * d + c] = xc[r] - x0[r];
                            }
                        }
                        simplices.push(AsmSimplex { vertices: s.clone(), inv_det: 1.0 / det(&m, d) });
                        simplices.len() - 1
                    });
                    weights.push((k, o / vc.cell.volume));
                }
                cells.push(AsmCell { vertex: v, volume: vc.cell.volume, weights });
            }
        }
        let mut vertex_edges = vec![vec![]; g.len()];
        for (k, e) in edges.iter().enumerate() {
            vertex_edges[e.i].push(k);
            vertex_edges[e.j].push(k);
        }
        let mut simplex_cells = vec![vec![]; simplices.len()];
        for (c, cell) in cells.iter().enumerate() {
            for &(t, _) in &cell.weights {
                simplex_cells[t].push(c);
            }
        }
        let mut vertex_cells = vec![vec![]; g.len()];
        for (t, s) in simplices.iter().enumerate() {
            for &v in &s.vertices {
                vertex_cells[v].extend(simplex_cells[t].iter().copied());
            }
        }
        for vc in &mut vertex_cells {
            vc.sort_unstable();
            vc.dedup();
        }
        Ok(Assembly {
            n,
            d,
            pair: pair.clone(),
            vol: vol.clone(),
            vertices,
            in_domain,
            edges,
            simplices,
            cells,
            domain_volume: region.volume(),
            vertex_edges,
            vertex_cells,
        })
    }

    fn check_values(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.n * self.in_domain.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} vertices in dimension {}",
                u.len(),
                self.in_domain.len(),
                self.n
            )));
        }
        for &v in &self.vertices {
            if u[v * self.n..(v + 1) * self.n].iter().any(|x| x.is_nan()) {
                return Err(Error::MissingVertexValue(v));
            }
        }
        Ok(())
    }

    fn increment(&self, u: &[f64], e: &AsmEdge, xi: &mut [f64]) {
        let n = self.n;
        for c in 0..n {
            xi[c] = u[e.i * n + c] - u[e.j * n + c];
        }
    }

    fn simplex_matrix(&self, u: &[f64], s: &AsmSimplex, m: &mut [f64]) {
        let d = self.d;
        let v0 = s.vertices[0];
        for c in 0..d {
            let vc = s.vertices[c + 1];
            for r in 0..d {
                m[r * d + c] = u[vc * d + r] - u[v0 * d + r];
            }
        }
    }

    /// `det(∇u_aff)` on each simplex.
    pub fn simplex_dets(&self, u: &[f64]) -> Vec<f64> {
        let mut m = vec![0.0; self.d * self.d];
        self.simplices
            .iter()
            .map(|s| {
                self.simplex_matrix(u, s, &mut m);
                det(&m, self.d) * s.inv_det
            })
            .collect()
    }

    /// Cell-averaged determinants `det_C(∇u_aff)`, one per interior cell.
    pub fn cell_dets(&self, u: &[f64]) -> Vec<f64> {
        let dets = self.simplex_dets(u);
        self.cells.iter().map(|c| c.weights.iter().map(|&(t, w)| w * dets[t]).sum()).collect()
    }

    pub fn pair_part(&self, u: &[f64]) -> Result<f64> {
        self.check_values(u)?;
        let mut xi = vec![0.0; self.n];
        let mut h = 0.0;
        for e in &self.edges {
            self.increment(u, e, &mut xi);
            h += self.pair.eval(&e.term, &xi)?;
        }
        Ok(h)
    }

    pub fn volumetric_part(&self, u: &[f64]) -> Result<f64> {
        if self.cells.is_empty() {
            return Ok(0.0);
        }
        self.check_values(u)?;
        Ok(self.cell_dets(u).iter().zip(&self.cells).map(|(&t, c)| c.volume * self.vol.eval(t)).sum())
    }

    pub fn energy(&self, u: &[f64]) -> Result<f64> {
        Ok(self.pair_part(u)? + self.volumetric_part(u)?)
    }

    /// Energy and its gradient with respect to every vertex value (zero outside `D_ε`).
    pub fn energy_grad(&self, u: &[f64], grad: &mut [f64]) -> Result<f64> {
        self.check_values(u)?;
        let n = self.n;
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut xi = vec![0.0; n];
        let mut ge = vec![0.0; n];
        let mut h = 0.0;
        for e in &self.edges {
            self.increment(u, e, &mut xi);
            h += self.pair.eval_grad(&e.term, &xi, &mut ge)?;
            for c in 0..n {
                grad[e.i * n + c] += ge[c];
                grad[e.j * n + c] -= ge[c];
            }
        }
        if !self.cells.is_empty() {
            let d = self.d;
            let dets = self.simplex_dets(u);
            let mut coef = vec![0.0; self.simplices.len()];
            for c in &self.cells {
                let t: f64 = c.weights.iter().map(|&(k, w)| w * dets[k]).sum();
                h += c.volume * self.vol.eval(t);
                let dw = c.volume * self.vol.derivative(t);
                for &(k, w) in &c.weights {
                    coef[k] += dw * w;
                }
            }
            let mut m = vec![0.0; d * d];
            for (k, s) in self.simplices.iter().enumerate() {
                if coef[k] == 0.0 {
                    continue;
                }
                self.simplex_matrix(u, s, &mut m);
                let adj = adjugate(&m, d);
                let a = coef[k] * s.inv_det;
                let v0 = s.vertices[0];
                for c in 0..d {
                    let vc = s.vertices[c + 1];
                    for r in 0..d {
                        // ∂ det / ∂ m[r][c] = adj[c][r]
                        let gr = a * adj[c * d + r];
                        grad[vc * d + r] += gr;
                        grad[v0 * d + r] -= gr;
                    }
                }
            }
        }
        Ok(h)
    }

    /// Part of the energy that depends on the value at vertex `v`.
    pub fn local_energy(&self, u: &[f64], v: usize) -> Result<f64> {
        let mut xi = vec![0.0; self.n];
        let mut h = 0.0;
        for &k in &self.vertex_edges[v] {
            let e = &self.edges[k];
            self.increment(u, e, &mut xi);
            h += self.pair.eval(&e.term, &xi)?;
        }
        if !self.vertex_cells[v].is_empty() {
            let mut m = vec![0.0; self.d * self.d];
            for &c in &self.vertex_cells[v] {
                let cell = &self.cells[c];
                let t: f64 = cell
                    .weights
                    .iter()
                    .map(|&(k, w)| {
                        let s = &self.simplices[k];
                        self.simplex_matrix(u, s, &mut m);
                        w * det(&m, self.d) * s.inv_det
                    })
                    .sum();
                h += cell.volume * self.vol.eval(t);
            }
        }
        Ok(h)
    }

    /// Largest central-difference discrepancy over the coordinates of `D_ε`, relative to `max |∇H|`.
    pub fn gradient_check(&self, u: &[f64], h: f64) -> Result<f64> {
        let mut grad = vec![0.0; u.len()];
        self.energy_grad(u, &mut grad)?;
        let scale = self.vertices.iter().flat_map(|&v| &grad[v * self.n..(v + 1) * self.n]).fold(0.0f64, |m, g| m.max(g.abs()));
        let mut w = u.to_vec();
        let mut worst = 0.0f64;
        for &v in &self.vertices {
            for k in v * self.n..(v + 1) * self.n {
                w[k] = u[k] + h;
                let fp = self.energy(&w)?;
                w[k] = u[k] - h;
                let fm = self.energy(&w)?;
                w[k] = u[k];
                worst = worst.max(((fp - fm) / (2.0 * h) - grad[k]).abs());
            }
        }
        Ok(if scale > 0.0 { worst / scale } else { worst })
    }

    pub fn vertex_edges(&self, v: usize) -> &[usize] {
        &self.vertex_edges[v]
    }

    /// Vertex neighbours through edges and shared volumetric cells.
    pub fn coupled(&self, v: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.vertex_edges[v]
            .iter()
            .map(|&k| if self.edges[k].i == v { self.edges[k].j } else { self.edges[k].i })
            .collect();
        for &c in &self.vertex_cells[v] {
            for &(t, _) in &self.cells[c].weights {
                out.extend(self.simplices[t].vertices.iter().copied());
            }
        }
        out.retain(|&w| w != v);
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// `H_ε(D, u)`.
pub fn hamiltonian(
    g: &ExtendedGraph,
    domain: &Window,
    eps: f64,
    u: &Deformation,
    pair: &PairPotential,
    vol: &VolumetricPotential,
) -> Result<f64> {
    if u.len() != g.len() {
        return Err(Error::DimensionMismatch(format!("deformation has {} vertices, graph {}", u.len(), g.len())));
    }
    Assembly::new(g, domain, eps, u.n, pair, vol)?.energy(&u.values)
}

/// Gradient of `H_ε(D, ·)` at `u` with respect to the free vertex values, as `(vertex, ∂H/∂u(x))`.
pub fn hamiltonian_gradient(
    g: &ExtendedGraph,
    domain: &Window,
    eps: f64,
    u: &Deformation,
    pair: &PairPotential,
    vol: &VolumetricPotential,
) -> Result<Vec<(usize, Vec<f64>)>> {
    if u.len() != g.len() {
        return Err(Error::DimensionMismatch(format!("deformation has {} vertices, graph {}", u.len(), g.len())));
    }
    let asm = Assembly::new(g, domain, eps, u.n, pair, vol)?;
    let mut grad = vec![0.0; u.values.len()];
    asm.energy_grad(&u.values, &mut grad)?;
    Ok(asm
        .vertices
        .iter()
        .filter(|&&v| u.roles[v] == Role::Free)
        .map(|&v| (v, grad[v * u.n..(v + 1) * u.n].to_vec()))
        .collect())
}
