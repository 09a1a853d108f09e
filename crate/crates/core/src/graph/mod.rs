//! Random reference networks: point generation, Delaunay edges, Voronoi cells
//! of all points and of the volumetric points, and admissibility checks.

mod io;
mod validate;
mod voronoi;

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::delaunay::delaunay_points;
use crate::geometry::{dist, to_point, DelaunayMode, Point, Polytope, SpatialGrid};

pub use io::{read_graph, write_graph, GraphDocument, FORMAT_VERSION};
pub use validate::{validate_graph, validate_graph_with, ConditionCheck, ValidationReport};
pub use voronoi::{simplex_overlaps, voronoi, VoronoiCell};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Ensemble {
    /// Unit lattice with i.i.d. uniform jitter in `[-jitter, jitter]^d`.
    JitteredLattice { jitter: f64 },
    /// Random sequential adsorption of Poisson candidates with hard-core radius `r`.
    HardcorePoisson { intensity: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphParams {
    pub dim: usize,
    pub covering_radius: f64,
    pub hardcore_radius: f64,
    pub interaction_range: f64,
    pub monomer_length: f64,
    pub ensemble: Ensemble,
    #[serde(default = "one")]
    pub volumetric_fraction: f64,
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

impl Default for GraphParams {
    fn default() -> Self {
        GraphParams {
            dim: 2,
            covering_radius: 1.0,
            hardcore_radius: 0.5,
            interaction_range: 7.0,
            monomer_length: 0.1,
            ensemble: Ensemble::JitteredLattice { jitter: 0.2 },
            volumetric_fraction: 1.0,
            seed: 1,
        }
    }
}

impl GraphParams {
    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        let (r, big_r, c0) = (self.hardcore_radius, self.covering_radius, self.interaction_range);
        if !(1..=3).contains(&self.dim) {
            return bad(format!("dimension {} not in 1..=3", self.dim));
        }
        if !(r > 0.0) {
            return bad(format!("hard-core radius {r} must be positive"));
        }
        if !(big_r >= r / 2.0) {
            return bad(format!("covering radius {big_r} below r/2 = {}", r / 2.0));
        }
        if !(6.0 * big_r < c0) {
            return bad(format!("need 6R < C0, got R = {big_r}, C0 = {c0}"));
        }
        if !(self.monomer_length > 0.0) {
            return bad(format!("monomer length {} must be positive", self.monomer_length));
        }
        if !(self.volumetric_fraction > 0.0 && self.volumetric_fraction <= 1.0) {
            return bad(format!("volumetric fraction {} not in (0, 1]", self.volumetric_fraction));
        }
        match self.ensemble {
            Ensemble::JitteredLattice { jitter } => {
                if !(jitter >= 0.0 && jitter < (1.0 - r) / 2.0) {
                    return bad(format!("jitter {jitter} not in [0, (1 - r)/2) = [0, {})", (1.0 - r) / 2.0));
                }
            }
            Ensemble::HardcorePoisson { intensity } => {
                if !(intensity > 0.0 && intensity.is_finite()) {
                    return bad(format!("intensity {intensity} must be positive"));
                }
            }
        }
        Ok(())
    }

    /// Unjittered lattices: deterministic, but not in general position.
    pub fn is_fixture(&self) -> bool {
        matches!(self.ensemble, Ensemble::JitteredLattice { jitter } if jitter == 0.0)
    }

    /// Uniform bound `(1 + 2 C0 / r)^d` on vertex degrees.
    pub fn degree_bound(&self) -> f64 {
        (1.0 + 2.0 * self.interaction_range / self.hardcore_radius).powi(self.dim as i32)
    }
}

/// Axis-aligned half-open box `[lo, hi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Window {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() || lo.len() > 3 {
            return Err(Error::DimensionMismatch(format!("box corners {lo:?} and {hi:?}")));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::InvalidParams(format!("empty box [{lo:?}, {hi:?})")));
        }
        Ok(Window { lo, hi })
    }

    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        Window { lo: vec![lo; dim], hi: vec![hi; dim] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn side(&self, c: usize) -> f64 {
        self.hi[c] - self.lo[c]
    }

    pub fn min_side(&self) -> f64 {
        (0..self.dim()).map(|c| self.side(c)).fold(f64::INFINITY, f64::min)
    }

    pub fn max_side(&self) -> f64 {
        (0..self.dim()).map(|c| self.side(c)).fold(0.0, f64::max)
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|c| self.side(c)).product()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        (0..self.dim()).all(|c| p[c] >= self.lo[c] && p[c] < self.hi[c])
    }

    pub fn contains_closed(&self, p: &[f64]) -> bool {
        (0..self.dim()).all(|c| p[c] >= self.lo[c] && p[c] <= self.hi[c])
    }

    /// Signed distance to the boundary, positive inside.
    pub fn boundary_distance(&self, p: &[f64]) -> f64 {
        (0..self.dim())
            .map(|c| (p[c] - self.lo[c]).min(self.hi[c] - p[c]))
            .fold(f64::INFINITY, f64::min)
    }

    /// The box `{x / eps : x in self}`.
    pub fn scaled(&self, factor: f64) -> Window {
        Window {
            lo: self.lo.iter().map(|v| v * factor).collect(),
            hi: self.hi.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn expanded(&self, margin: f64) -> Window {
        Window {
            lo: self.lo.iter().map(|v| v - margin).collect(),
            hi: self.hi.iter().map(|v| v + margin).collect(),
        }
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn polytope(&self) -> Polytope {
        Polytope::cuboid(&self.lo, &self.hi)
    }

    pub fn is_subset_of(&self, other: &Window) -> bool {
        (0..self.dim()).all(|c| self.lo[c] >= other.lo[c] && self.hi[c] <= other.hi[c])
    }
}

/// Voronoi cell of a volumetric point together with its overlaps with the
/// Delaunay simplices of the volumetric points.
#[derive(Debug, Clone)]
pub struct VolumetricCell {
    pub cell: VoronoiCell,
    /// `(simplex index, |T ∩ C1(x)|)` for every simplex meeting the cell in positive volume.
    pub overlaps: Vec<(usize, f64)>,
}

impl VolumetricCell {
    pub fn vertex(&self) -> usize {
        self.cell.site
    }

    pub fn covered_volume(&self) -> f64 {
        self.overlaps.iter().map(|o| o.1).sum()
    }

    /// Away from the window and fully tiled by simplices.
    pub fn is_interior(&self) -> bool {
        !self.cell.touches_window && (self.covered_volume() - self.cell.volume).abs() <= 1e-9 * self.cell.volume
    }
}

#[derive(Debug, Clone)]
pub struct ExtendedGraph {
    pub params: GraphParams,
    pub window: Window,
    pub positions: Vec<Point>,
    pub volumetric: Vec<bool>,
    /// Canonically ordered `(i, j)` with `i < j`, sorted.
    pub edges: Vec<(usize, usize)>,
    /// Delaunay simplices of the volumetric points, as vertex indices.
    pub simplices: Vec<Vec<usize>>,
    /// Voronoi cells of all vertices, indexed by vertex.
    pub cells: Vec<VoronoiCell>,
    pub volumetric_cells: Vec<VolumetricCell>,
    /// Built from a degenerate lattice; general position is not checked.
    pub fixture_only: bool,
    adjacency: Vec<Vec<usize>>,
    volumetric_index: Vec<Option<usize>>,
}

impl ExtendedGraph {
    /// Assembles a graph from explicit parts and computes its cells. When
    /// `simplices` is `None` the volumetric points are triangulated.
    pub fn from_parts(
        params: GraphParams,
        window: Window,
        positions: Vec<Point>,
        volumetric: Vec<bool>,
        edges: Vec<(usize, usize)>,
        simplices: Option<Vec<Vec<usize>>>,
        fixture_only: bool,
    ) -> Result<Self> {
        let d = params.dim;
        let n = positions.len();
        if window.dim() != d {
            return Err(Error::DimensionMismatch(format!("window has dimension {}, params {}", window.dim(), d)));
        }
        if volumetric.len() != n {
            return Err(Error::DimensionMismatch(format!("{} flags for {} vertices", volumetric.len(), n)));
        }
        let mut edges: Vec<(usize, usize)> = edges.into_iter().map(|(a, b)| (a.min(b), a.max(b))).collect();
        edges.sort_unstable();
        edges.dedup();
        for &(a, b) in &edges {
            if b >= n {
                return Err(Error::DegenerateInput(format!("edge ({a}, {b}) references a missing vertex")));
            }
            if a == b || dist(&positions[a][..d], &positions[b][..d]) == 0.0 {
                return Err(Error::DegenerateEdge(a, b));
            }
        }
        let l1: Vec<usize> = (0..n).filter(|&i| volumetric[i]).collect();
        let simplices = match simplices {
            Some(s) => {
                for t in &s {
                    if t.len() != d + 1 || t.iter().any(|&i| i >= n || !volumetric[i]) {
                        return Err(Error::DegenerateInput(format!("simplex {t:?} is not a simplex of volumetric points")));
                    }
                }
                s
            }
            None => {
                let mode = if fixture_only { DelaunayMode::AllowDegenerate } else { DelaunayMode::Strict };
                let pts: Vec<Point> = l1.iter().map(|&i| positions[i]).collect();
                delaunay_points(&pts, d, mode)?
                    .simplices
                    .into_iter()
                    .map(|s| s.into_iter().map(|k| l1[k]).collect())
                    .collect()
            }
        };
        let cells = voronoi(&positions, d, &window)?;
        let l1_pts: Vec<Point> = l1.iter().map(|&i| positions[i]).collect();
        let mut l1_cells = voronoi(&l1_pts, d, &window)?;
        for c in l1_cells.iter_mut() {
            c.site = l1[c.site];
        }
        let overlaps = simplex_overlaps(&positions, d, &simplices, &l1_cells);
        let volumetric_cells = l1_cells
            .into_iter()
            .zip(overlaps)
            .map(|(cell, overlaps)| VolumetricCell { cell, overlaps })
            .collect();
        let mut adjacency = vec![vec![]; n];
        for &(a, b) in &edges {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        let mut volumetric_index = vec![None; n];
        for (k, &i) in l1.iter().enumerate() {
            volumetric_index[i] = Some(k);
        }
        Ok(ExtendedGraph {
            params,
            window,
            positions,
            volumetric,
            edges,
            simplices,
            cells,
            volumetric_cells,
            fixture_only,
            adjacency,
            volumetric_index,
        })
    }

    pub fn dim(&self) -> usize {
        self.params.dim
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i][..self.dim()]
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Index into `volumetric_cells` for a volumetric vertex.
    pub fn volumetric_cell(&self, vertex: usize) -> Option<&VolumetricCell> {
        self.volumetric_index[vertex].map(|k| &self.volumetric_cells[k])
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let (a, b) = self.edges[e];
        dist(self.position(a), self.position(b))
    }

    /// Number of connected components of the edge graph.
    pub fn components(&self) -> usize {
        let n = self.len();
        let mut seen = vec![false; n];
        let mut count = 0;
        let mut stack = vec![];
        for s in 0..n {
            if seen[s] {
                continue;
            }
            count += 1;
            seen[s] = true;
            stack.push(s);
            while let Some(v) = stack.pop() {
                for &w in &self.adjacency[v] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        count
    }

    /// Removes edges for which `keep` is false, recomputing adjacency.
    pub fn retain_edges(&mut self, mut keep: impl FnMut(usize, usize) -> bool) {
        self.edges.retain(|&(a, b)| keep(a, b));
        for adj in self.adjacency.iter_mut() {
            adj.clear();
        }
        for &(a, b) in &self.edges {
            self.adjacency[a].push(b);
            self.adjacency[b].push(a);
        }
    }

    /// Vertices with `dist(x, ∂box) <= width`, inside the closed box.
    pub fn boundary_band(&self, domain: &Window, width: f64) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| {
                let p = self.position(i);
                domain.contains_closed(p) && domain.boundary_distance(p) <= width
            })
            .collect()
    }
}

/// Volumetric cells (as vertex indices) all of whose touching simplices lie in `D / eps`.
pub fn interior_voronoi_cells(g: &ExtendedGraph, domain: &Window, eps: f64) -> Vec<usize> {
    let d_eps = domain.scaled(1.0 / eps);
    g.volumetric_cells
        .iter()
        .filter(|vc| {
            vc.is_interior()
                && !vc.overlaps.is_empty()
                && vc
                    .overlaps
                    .iter()
                    .all(|&(t, _)| g.simplices[t].iter().all(|&i| d_eps.contains(g.position(i))))
        })
        .map(|vc| vc.vertex())
        .collect()
}

fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Samples a graph in `window` and assembles its Delaunay edges and cells.
pub fn generate_graph(params: &GraphParams, window: &Window) -> Result<ExtendedGraph> {
    params.check()?;
    let d = params.dim;
    if window.dim() != d {
        return Err(Error::DimensionMismatch(format!("window has dimension {}, params {}", window.dim(), d)));
    }
    let fixture = params.is_fixture();
    let required = 4.0 * params.interaction_range;
    if !fixture && window.min_side() < required {
        return Err(Error::WindowTooSmall { side: window.min_side(), required });
    }
    let positions = match params.ensemble {
        Ensemble::JitteredLattice { jitter } => jittered_lattice(d, jitter, window, params.seed),
        Ensemble::HardcorePoisson { intensity } => {
            let pts = hardcore_poisson(d, intensity, params.hardcore_radius, window, params.seed)?;
            let all = vec![true; pts.len()];
            let (gap, probe) = validate::covering_gap(&pts, &all, d, window, params.hardcore_radius / 4.0, params.covering_radius);
            if gap > params.covering_radius {
                return Err(Error::CoveringRepairFailed {
                    probe: probe[..d].to_vec(),
                    gap,
                    radius: params.covering_radius,
                });
            }
            pts
        }
    };
    if positions.len() < d + 1 {
        return Err(Error::DegenerateInput(format!("only {} points in the window", positions.len())));
    }
    let volumetric = draw_volumetric(&positions, params, window)?;
    let mode = if fixture { DelaunayMode::AllowDegenerate } else { DelaunayMode::Strict };
    let tri = delaunay_points(&positions, d, mode)?;
    let mut edges = vec![];
    for s in &tri.simplices {
        for a in 0..s.len() {
            for b in a + 1..s.len() {
                let (i, j) = (s[a].min(s[b]), s[a].max(s[b]));
                if dist(&positions[i][..d], &positions[j][..d]) <= params.interaction_range {
                    edges.push((i, j));
                }
            }
        }
    }
    let simplices = if volumetric.iter().all(|&f| f) { Some(tri.simplices) } else { None };
    ExtendedGraph::from_parts(params.clone(), window.clone(), positions, volumetric, edges, simplices, fixture)
}

/// Lattice sites `z` in the window, displaced by i.i.d. uniform jitter; points
/// leaving the window are dropped.
fn jittered_lattice(d: usize, jitter: f64, window: &Window, seed: u64) -> Vec<Point> {
    let mut rng = rng_stream(seed, 0);
    let lo: Vec<i64> = window.lo.iter().map(|v| v.ceil() as i64).collect();
    let hi: Vec<i64> = window.hi.iter().map(|v| v.ceil() as i64 - 1).collect();
    let mut out = vec![];
    let mut z = lo.clone();
    if (0..d).any(|c| lo[c] > hi[c]) {
        return out;
    }
    loop {
        let mut p = [0.0; 3];
        for c in 0..d {
            let u: f64 = rng.random();
            p[c] = z[c] as f64 + jitter * (2.0 * u - 1.0);
        }
        if window.contains(&p[..d]) {
            out.push(p);
        }
        let mut c = 0;
        loop {
            if c == d {
                return out;
            }
            z[c] += 1;
            if z[c] <= hi[c] {
                break;
            }
            z[c] = lo[c];
            c += 1;
        }
    }
}

fn cell_key(p: &[f64], h: f64) -> [i64; 3] {
    let mut k = [0i64; 3];
    for (c, v) in p.iter().enumerate() {
        k[c] = (v / h).floor() as i64;
    }
    k
}

/// Incrementally filled hash grid for exclusion and nearest queries.
struct HashGrid {
    d: usize,
    h: f64,
    map: HashMap<[i64; 3], Vec<usize>>,
}

impl HashGrid {
    fn new(d: usize, h: f64) -> Self {
        HashGrid { d, h, map: HashMap::new() }
    }

    fn insert(&mut self, p: &Point, i: usize) {
        self.map.entry(cell_key(&p[..self.d], self.h)).or_default().push(i);
    }

    /// Nearest stored point within `reach` cells of `q`.
    fn nearest(&self, pts: &[Point], q: &[f64], reach: i64) -> Option<(usize, f64)> {
        let k = cell_key(q, self.h);
        let mut best: Option<(usize, f64)> = None;
        let r = |c: usize| if c < self.d { -reach..=reach } else { 0..=0 };
        for a in r(0) {
            for b in r(1) {
                for c in r(2) {
                    if let Some(v) = self.map.get(&[k[0] + a, k[1] + b, k[2] + c]) {
                        for &i in v {
                            let dd = dist(&pts[i][..self.d], q);
                            if best.is_none_or(|(_, bd)| dd < bd) {
                                best = Some((i, dd));
                            }
                        }
                    }
                }
            }
        }
        best
    }
}

fn hardcore_poisson(d: usize, intensity: f64, r: f64, window: &Window, seed: u64) -> Result<Vec<Point>> {
    let mut rng = rng_stream(seed, 0);
    let mean = intensity * window.volume();
    let count = Poisson::new(mean)
        .map_err(|e| Error::InvalidParams(format!("intensity {intensity}: {e}")))?
        .sample(&mut rng) as usize;
    let mut grid = HashGrid::new(d, r);
    let mut out: Vec<Point> = vec![];
    for _ in 0..count {
        let mut p = [0.0; 3];
        for c in 0..d {
            p[c] = window.lo[c] + rng.random::<f64>() * window.side(c);
        }
        if grid.nearest(&out, &p[..d], 1).is_none_or(|(_, dd)| dd >= r) {
            grid.insert(&p, out.len());
            out.push(p);
        }
    }
    Ok(out)
}

/// Bernoulli(q) flags, then greedy repair so that the flagged points cover
/// the window (eroded by `R`) with radius `R`.
fn draw_volumetric(positions: &[Point], params: &GraphParams, window: &Window) -> Result<Vec<bool>> {
    let q = params.volumetric_fraction;
    if q >= 1.0 {
        return Ok(vec![true; positions.len()]);
    }
    let d = params.dim;
    let big_r = params.covering_radius;
    let mut rng = rng_stream(params.seed, 1);
    let mut flags: Vec<bool> = positions.iter().map(|_| rng.random::<f64>() < q).collect();
    let reach = 1;
    let mut flagged = HashGrid::new(d, big_r);
    for (i, p) in positions.iter().enumerate() {
        if flags[i] {
            flagged.insert(p, i);
        }
    }
    let all = SpatialGrid::new(positions, d, big_r);
    let mask = flags.clone();
    for probe in validate::uncovered_probes(positions, &mask, d, window, params.hardcore_radius / 4.0, big_r) {
        if flagged.nearest(positions, &probe[..d], reach).is_some_and(|(_, g)| g <= big_r) {
            continue;
        }
        // nearest unflagged vertex
        let mut best: Option<(usize, f64)> = None;
        all.for_each_within(positions, &probe, big_r, |i| {
            let g = dist(&positions[i][..d], &probe[..d]);
            if !flags[i] && best.is_none_or(|(_, bg)| g < bg) {
                best = Some((i, g));
            }
        });
        match best {
            Some((i, _)) => {
                flags[i] = true;
                flagged.insert(&positions[i], i);
            }
            None => {
                let gap = all.nearest(positions, &probe, window.max_side()).map_or(f64::INFINITY, |x| x.1);
                return Err(Error::CoveringRepairFailed { probe: probe[..d].to_vec(), gap, radius: big_r });
            }
        }
    }
    Ok(flags)
}

/// Integer lattice `{0..shape[0]} x ...` with nearest-neighbour axis edges, every vertex volumetric.
///
/// A deterministic fixture for quadratic oracles; the window pads the points by 1/2.
pub fn axis_lattice(shape: &[usize]) -> Result<ExtendedGraph> {
    let d = shape.len();
    if !(1..=3).contains(&d) || shape.iter().any(|&s| s < 2) {
        return Err(Error::InvalidParams(format!("lattice shape {shape:?} needs 1 to 3 sides of at least 2")));
    }
    let params = GraphParams { dim: d, ensemble: Ensemble::JitteredLattice { jitter: 0.0 }, ..GraphParams::default() };
    let total: usize = shape.iter().product();
    let mut strides = vec![1; d];
    for c in (0..d - 1).rev() {
        strides[c] = strides[c + 1] * shape[c + 1];
    }
    let mut positions = Vec::with_capacity(total);
    let mut edges = vec![];
    for k in 0..total {
        let idx: Vec<usize> = (0..d).map(|c| k / strides[c] % shape[c]).collect();
        positions.push(to_point(&idx.iter().map(|&i| i as f64).collect::<Vec<_>>()));
        for c in 0..d {
            if idx[c] + 1 < shape[c] {
                edges.push((k, k + strides[c]));
            }
        }
    }
    let window = Window::new(vec![-0.5; d], shape.iter().map(|&s| s as f64 - 0.5).collect())?;
    ExtendedGraph::from_parts(params, window, positions, vec![true; total], edges, None, true)
}

/// Convenience: coordinates as a zero-padded point.
pub fn point(coords: &[f64]) -> Point {
    to_point(coords)
}

#[cfg(test)]
mod tests;
