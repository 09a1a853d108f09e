//! Incremental Bowyer–Watson Delaunay triangulation in dimensions 1 to 3.
//!
//! The convex hull is closed off with a single symbolic vertex at infinity,
//! so no bounding super-simplex (and none of its round-off trouble) is needed.
//! Points are inserted in lexicographic order; in `AllowDegenerate` mode exact
//! ties (cospherical points) are therefore resolved deterministically.

use std::collections::HashMap;

use super::{circumsphere, det, dist2, orient, solve_small, to_point, Point, SpatialGrid, MAX_DIM};
use crate::error::{Error, Result};

const INF: usize = usize::MAX;
const MAXV: usize = MAX_DIM + 1;

/// Relative general-position tolerance: circumsphere clearance below this
/// fraction of the median circumradius counts as a tie.
pub const TAU_GP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DelaunayMode {
    /// Reject inputs that are not in general position.
    Strict,
    /// Accept ties (e.g. unjittered lattices) and break them by insertion order.
    AllowDegenerate,
}

#[derive(Debug, Clone)]
pub struct Triangulation {
    pub dim: usize,
    /// Finite simplices as lists of `dim + 1` input indices.
    pub simplices: Vec<Vec<usize>>,
    /// Smallest clearance `|q - c| - r` of a non-member point to a circumsphere,
    /// relative to the median circumradius; `+inf` if no point is near any circumsphere.
    pub min_clearance: f64,
}

#[derive(Debug, Clone)]
struct Cell {
    v: [usize; MAXV],
    n: [usize; MAXV],
    alive: bool,
    /// Sign of the lifted determinant for a point inside the circumsphere;
    /// zero for flat or infinite cells.
    inside: f64,
}

impl Cell {
    fn is_infinite(&self, d: usize) -> bool {
        self.v[..=d].contains(&INF)
    }
}

struct Builder<'a> {
    d: usize,
    pts: &'a [Point],
    cells: Vec<Cell>,
    free: Vec<usize>,
    stamp: Vec<u32>,
    epoch: u32,
    hint: usize,
    scale: f64,
}

/// Delaunay triangulation of `points` (each of length `d`).
pub fn delaunay(points: &[Vec<f64>], d: usize, mode: DelaunayMode) -> Result<Triangulation> {
    let pts: Vec<Point> = points.iter().map(|p| to_point(p)).collect();
    delaunay_points(&pts, d, mode)
}

pub(crate) fn delaunay_points(pts: &[Point], d: usize, mode: DelaunayMode) -> Result<Triangulation> {
    if !(1..=MAX_DIM).contains(&d) {
        return Err(Error::DimensionMismatch(format!("delaunay supports d in 1..=3, got {d}")));
    }
    if pts.len() < d + 1 {
        return Err(Error::DegenerateInput(format!(
            "{} points cannot span a {d}-simplex",
            pts.len()
        )));
    }
    let mut order: Vec<usize> = (0..pts.len()).collect();
    order.sort_by(|&a, &b| {
        for c in 0..d {
            match pts[a][c].total_cmp(&pts[b][c]) {
                std::cmp::Ordering::Equal => continue,
                o => return o,
            }
        }
        std::cmp::Ordering::Equal
    });
    for w in order.windows(2) {
        if dist2(&pts[w[0]][..d], &pts[w[1]][..d]) == 0.0 {
            return Err(Error::DegenerateInput(format!("duplicate points {} and {}", w[0], w[1])));
        }
    }
    let mut span = 0.0f64;
    for c in 0..d {
        let lo = pts.iter().map(|p| p[c]).fold(f64::INFINITY, f64::min);
        let hi = pts.iter().map(|p| p[c]).fold(f64::NEG_INFINITY, f64::max);
        span = span.max(hi - lo);
    }
    let mut b = Builder {
        d,
        pts,
        cells: Vec::new(),
        free: Vec::new(),
        stamp: Vec::new(),
        epoch: 0,
        hint: 0,
        scale: span.max(f64::MIN_POSITIVE),
    };
    let initial = b.initial_simplex(&order)?;
    for &i in &order {
        if !initial.contains(&i) {
            b.insert(i)?;
        }
    }
    b.finish(mode)
}

impl<'a> Builder<'a> {
    fn p(&self, i: usize) -> &[f64] {
        &self.pts[i][..self.d]
    }

    fn alloc(&mut self, cell: Cell) -> usize {
        if let Some(id) = self.free.pop() {
            self.cells[id] = cell;
            id
        } else {
            self.cells.push(cell);
            self.stamp.push(0);
            self.cells.len() - 1
        }
    }

    fn make_cell(&self, v: [usize; MAXV]) -> Cell {
        let d = self.d;
        let inside = if v[..=d].contains(&INF) {
            0.0
        } else {
            let mut g = [0.0; MAX_DIM];
            for &i in &v[..=d] {
                for c in 0..d {
                    g[c] += self.p(i)[c] / (d + 1) as f64;
                }
            }
            let (det, _) = self.lifted(&v[..=d], &g[..d]);
            if det == 0.0 {
                0.0
            } else {
                det.signum()
            }
        };
        Cell { v, n: [INF; MAXV], alive: true, inside }
    }

    /// Determinant of the rows `[p_i - q, |p_i - q|^2]` and the product of the row norms.
    fn lifted(&self, v: &[usize], q: &[f64]) -> (f64, f64) {
        let d = self.d;
        let n = d + 1;
        let mut m = [0.0; MAXV * MAXV];
        let mut bound = 1.0;
        for (r, &i) in v.iter().enumerate() {
            let p = self.p(i);
            let mut s = 0.0;
            for c in 0..d {
                let t = p[c] - q[c];
                m[r * n + c] = t;
                s += t * t;
            }
            m[r * n + d] = s;
            bound *= (s + s * s).sqrt();
        }
        (det(&m[..n * n], n), bound)
    }

    fn initial_simplex(&mut self, order: &[usize]) -> Result<Vec<usize>> {
        let d = self.d;
        let mut chosen = vec![order[0]];
        for &i in &order[1..] {
            if chosen.len() == d + 1 {
                break;
            }
            let mut trial = chosen.clone();
            trial.push(i);
            let ps: Vec<&[f64]> = trial.iter().map(|&k| self.p(k)).collect();
            if circumsphere(&ps, d).is_some() {
                chosen = trial;
            }
        }
        if chosen.len() < d + 1 {
            return Err(Error::GeneralPositionViolated(
                "all points lie in a common hyperplane".into(),
            ));
        }
        let mut v = [INF; MAXV];
        v[..=d].copy_from_slice(&chosen);
        let c0 = self.make_cell(v);
        let root = self.alloc(c0);
        let mut inf_ids = vec![];
        for i in 0..=d {
            let mut vi = v;
            vi[i] = INF;
            let c = self.make_cell(vi);
            let id = self.alloc(c);
            inf_ids.push(id);
        }
        for i in 0..=d {
            self.cells[root].n[i] = inf_ids[i];
            self.cells[inf_ids[i]].n[i] = root;
            for j in 0..=d {
                if j != i {
                    self.cells[inf_ids[i]].n[j] = inf_ids[j];
                }
            }
        }
        self.hint = root;
        Ok(chosen)
    }

    /// `det[f_k - q]` over the `d` facet points `f`.
    fn orient_facet(&self, facet: &[usize], q: &[f64]) -> f64 {
        let mut ps: Vec<&[f64]> = Vec::with_capacity(self.d + 1);
        ps.push(q);
        ps.extend(facet.iter().map(|&i| self.p(i)));
        orient(&ps, self.d)
    }

    fn orient_tol(&self) -> f64 {
        1e-13 * self.scale.powi(self.d as i32)
    }

    fn facet_of(&self, c: usize, skip: usize) -> Vec<usize> {
        let cell = &self.cells[c];
        (0..=self.d).filter(|&k| k != skip).map(|k| cell.v[k]).collect()
    }

    fn conflict(&self, c: usize, q: &[f64]) -> bool {
        let d = self.d;
        let cell = &self.cells[c];
        if let Some(inf_slot) = cell.v[..=d].iter().position(|&v| v == INF) {
            let facet = self.facet_of(c, inf_slot);
            let nb = cell.n[inf_slot];
            let nbc = &self.cells[nb];
            let apex_slot = (0..=d).find(|&k| !facet.contains(&nbc.v[k])).unwrap();
            let apex = self.p(nbc.v[apex_slot]);
            let sq = self.orient_facet(&facet, q);
            let sa = self.orient_facet(&facet, apex);
            if sq.abs() > self.orient_tol() {
                sq * sa < 0.0
            } else {
                let ps: Vec<&[f64]> = facet.iter().map(|&i| self.p(i)).collect();
                match circumsphere(&ps, d) {
                    Some((cen, r2)) => dist2(&cen[..d], q) < r2 * (1.0 - 1e-12),
                    None => false,
                }
            }
        } else {
            let (det, bound) = self.lifted(&cell.v[..=d], q);
            det * cell.inside > 1e-12 * bound
        }
    }

    fn barycentric(&self, c: usize, q: &[f64]) -> Option<Vec<f64>> {
        let d = self.d;
        let cell = &self.cells[c];
        let p0 = self.p(cell.v[0]);
        let mut m = vec![0.0; d * d];
        for k in 0..d {
            let pk = self.p(cell.v[k + 1]);
            for r in 0..d {
                m[r * d + k] = pk[r] - p0[r];
            }
        }
        let rhs: Vec<f64> = (0..d).map(|r| q[r] - p0[r]).collect();
        let lam = solve_small(&m, &rhs, d, 1e-14)?;
        let mut out = Vec::with_capacity(d + 1);
        out.push(1.0 - lam.iter().sum::<f64>());
        out.extend(lam);
        Some(out)
    }

    fn locate(&self, q: &[f64]) -> Option<usize> {
        let d = self.d;
        let mut c = self.hint;
        let max_steps = self.cells.len() + 10;
        let mut turn = 0usize;
        for _ in 0..max_steps {
            let cell = &self.cells[c];
            if !cell.alive {
                break;
            }
            if cell.is_infinite(d) {
                if self.conflict(c, q) {
                    return Some(c);
                }
                break;
            }
            let lam = self.barycentric(c, q)?;
            let negative: Vec<usize> = (0..=d).filter(|&k| lam[k] < -1e-12).collect();
            if negative.is_empty() {
                return Some(c);
            }
            turn = turn.wrapping_mul(1103515245).wrapping_add(12345);
            let k = negative[(turn >> 8) % negative.len()];
            c = cell.n[k];
        }
        None
    }

    fn insert(&mut self, qi: usize) -> Result<()> {
        let d = self.d;
        let q: Vec<f64> = self.p(qi).to_vec();
        let start = match self.locate(&q) {
            Some(c) if self.conflict(c, &q) => c,
            _ => (0..self.cells.len())
                .find(|&c| self.cells[c].alive && self.conflict(c, &q))
                .ok_or_else(|| {
                    Error::GeneralPositionViolated(format!("point {qi} conflicts with no simplex"))
                })?,
        };
        self.epoch += 1;
        let epoch = self.epoch;
        let mut cavity = vec![start];
        self.stamp[start] = epoch;
        let mut k = 0;
        while k < cavity.len() {
            let c = cavity[k];
            k += 1;
            for s in 0..=d {
                let nb = self.cells[c].n[s];
                if self.stamp[nb] != epoch && self.conflict(nb, &q) {
                    self.stamp[nb] = epoch;
                    cavity.push(nb);
                }
            }
        }
        // Grow the cavity until every boundary facet sees q properly.
        let boundary = loop {
            let mut boundary = vec![];
            let mut grow = None;
            'scan: for &c in &cavity {
                for s in 0..=d {
                    let nb = self.cells[c].n[s];
                    if self.stamp[nb] == epoch {
                        continue;
                    }
                    if !self.boundary_ok(c, s, nb, &q) {
                        grow = Some(nb);
                        break 'scan;
                    }
                    boundary.push((c, s, nb));
                }
            }
            match grow {
                Some(nb) => {
                    self.stamp[nb] = epoch;
                    cavity.push(nb);
                    if cavity.len() > self.cells.len() {
                        return Err(Error::GeneralPositionViolated(format!(
                            "cavity repair for point {qi} did not terminate"
                        )));
                    }
                }
                None => break boundary,
            }
        };
        let mut created = Vec::with_capacity(boundary.len());
        for &(c, s, nb) in &boundary {
            let mut v = self.cells[c].v;
            v[s] = qi;
            let mut cell = self.make_cell(v);
            cell.n[s] = nb;
            let id = self.alloc(cell);
            let slot = (0..=d).find(|&j| self.cells[nb].n[j] == c).unwrap();
            self.cells[nb].n[slot] = id;
            created.push((id, s));
        }
        let mut ridges: HashMap<[usize; MAXV], (usize, usize)> = HashMap::new();
        for &(id, qslot) in &created {
            for s in 0..=d {
                if s == qslot {
                    continue;
                }
                let mut key = [INF; MAXV];
                let mut m = 0;
                for j in 0..=d {
                    if j != s {
                        key[m] = self.cells[id].v[j];
                        m += 1;
                    }
                }
                key[..d].sort_unstable();
                if let Some((other, os)) = ridges.remove(&key) {
                    self.cells[id].n[s] = other;
                    self.cells[other].n[os] = id;
                } else {
                    ridges.insert(key, (id, s));
                }
            }
        }
        if !ridges.is_empty() {
            return Err(Error::GeneralPositionViolated(format!(
                "inconsistent cavity while inserting point {qi}"
            )));
        }
        for &c in &cavity {
            self.cells[c].alive = false;
            self.free.push(c);
        }
        if let Some(&(id, _)) = created.iter().find(|(id, _)| !self.cells[*id].is_infinite(d)) {
            self.hint = id;
        } else {
            self.hint = created[0].0;
        }
        Ok(())
    }

    /// Whether replacing the cavity cell `c` across its facet `s` by a cone from
    /// `q` yields a properly oriented, non-flat cell.
    fn boundary_ok(&self, c: usize, s: usize, nb: usize, q: &[f64]) -> bool {
        let d = self.d;
        let facet = self.facet_of(c, s);
        if facet.contains(&INF) {
            let finite: Vec<&[f64]> = facet.iter().filter(|&&i| i != INF).map(|&i| self.p(i)).collect();
            let mut ps = vec![q];
            ps.extend(finite);
            return circumsphere(&ps, d).is_some();
        }
        let sq = self.orient_facet(&facet, q);
        if sq.abs() <= self.orient_tol() {
            return false;
        }
        let nbc = &self.cells[nb];
        let apex_out = (0..=d).map(|k| nbc.v[k]).find(|v| !facet.contains(v)).unwrap();
        if apex_out == INF {
            let apex_in = self.cells[c].v[s];
            let si = self.orient_facet(&facet, self.p(apex_in));
            sq * si > 0.0
        } else {
            let so = self.orient_facet(&facet, self.p(apex_out));
            sq * so < 0.0
        }
    }

    fn finish(self, mode: DelaunayMode) -> Result<Triangulation> {
        let d = self.d;
        let mut simplices = vec![];
        let mut spheres = vec![];
        for cell in &self.cells {
            if cell.alive && !cell.is_infinite(d) {
                let v: Vec<usize> = cell.v[..=d].to_vec();
                let ps: Vec<&[f64]> = v.iter().map(|&i| self.p(i)).collect();
                let vol = orient(&ps, d).abs();
                if vol <= 1e-12 * self.scale.powi(d as i32) {
                    return Err(Error::GeneralPositionViolated(format!(
                        "simplex {v:?} is flat (volume factor {vol:e})"
                    )));
                }
                let sphere = circumsphere(&ps, d)
                    .ok_or_else(|| Error::GeneralPositionViolated(format!("simplex {v:?} has no circumsphere")))?;
                simplices.push(v);
                spheres.push(sphere);
            }
        }
        let min_clearance = clearance(self.pts, d, &simplices, &spheres);
        if min_clearance < -1e-7 {
            return Err(Error::GeneralPositionViolated(format!(
                "empty-circumsphere property fails by relative clearance {min_clearance:e}"
            )));
        }
        if mode == DelaunayMode::Strict && min_clearance < TAU_GP {
            return Err(Error::GeneralPositionViolated(format!(
                "cospherical points: relative circumsphere clearance {min_clearance:e} < {TAU_GP:e}"
            )));
        }
        let mut order: Vec<usize> = (0..simplices.len()).collect();
        order.sort_by(|&a, &b| {
            let mut sa = simplices[a].clone();
            let mut sb = simplices[b].clone();
            sa.sort_unstable();
            sb.sort_unstable();
            sa.cmp(&sb)
        });
        let simplices = order.into_iter().map(|i| simplices[i].clone()).collect();
        Ok(Triangulation { dim: d, simplices, min_clearance })
    }
}

/// Smallest clearance `|q - c| - r` of any non-member point `q` to the
/// circumsphere of any simplex, in units of the median circumradius.
///
/// Measuring in a common unit keeps the huge spheres of flat hull simplices
/// from reporting spurious near-ties.
pub(crate) fn clearance(pts: &[Point], d: usize, simplices: &[Vec<usize>], spheres: &[(Point, f64)]) -> f64 {
    if simplices.is_empty() {
        return f64::INFINITY;
    }
    let mut radii: Vec<f64> = spheres.iter().map(|s| s.1.sqrt()).collect();
    radii.sort_by(f64::total_cmp);
    let unit = radii[radii.len() / 2].max(1e-300);
    let grid = SpatialGrid::new(pts, d, unit);
    let mut worst = f64::INFINITY;
    for (s, (cen, r2)) in simplices.iter().zip(spheres) {
        let r = r2.sqrt();
        grid.for_each_within(pts, cen, r + 1e-6 * unit, |i| {
            if !s.contains(&i) {
                let q2 = dist2(&pts[i][..d], &cen[..d]);
                let c = (q2 - r2) / (q2.sqrt() + r) / unit;
                worst = worst.min(c);
            }
        });
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn brute_force_is_delaunay(points: &[Vec<f64>], d: usize, simplices: &[Vec<usize>]) -> bool {
        simplices.iter().all(|s| {
            let ps: Vec<&[f64]> = s.iter().map(|&i| points[i].as_slice()).collect();
            let (c, r2) = circumsphere(&ps, d).unwrap();
            points
                .iter()
                .enumerate()
                .all(|(i, p)| s.contains(&i) || dist2(&c[..d], p) >= r2 * (1.0 - 1e-9))
        })
    }

    fn hull_area_2d(points: &[Vec<f64>]) -> f64 {
        // monotone chain
        let mut p: Vec<(f64, f64)> = points.iter().map(|v| (v[0], v[1])).collect();
        p.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
            (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
        };
        let mut h: Vec<(f64, f64)> = vec![];
        for pass in 0..2 {
            let start = h.len();
            let it: Box<dyn Iterator<Item = &(f64, f64)>> =
                if pass == 0 { Box::new(p.iter()) } else { Box::new(p.iter().rev()) };
            for &q in it {
                while h.len() >= start + 2 && cross(h[h.len() - 2], h[h.len() - 1], q) <= 0.0 {
                    h.pop();
                }
                h.push(q);
            }
            h.pop();
        }
        let n = h.len();
        (0..n).map(|i| h[i].0 * h[(i + 1) % n].1 - h[(i + 1) % n].0 * h[i].1).sum::<f64>() / 2.0
    }

    #[test]
    fn single_triangle() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let t = delaunay(&pts, 2, DelaunayMode::Strict).unwrap();
        assert_eq!(t.simplices.len(), 1);
        assert_eq!(t.simplices[0].iter().copied().collect::<BTreeSet<_>>(), [0, 1, 2].into());
    }

    #[test]
    fn cocircular_square_is_rejected_in_strict_mode() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        assert!(matches!(
            delaunay(&pts, 2, DelaunayMode::Strict),
            Err(Error::GeneralPositionViolated(_))
        ));
        let t = delaunay(&pts, 2, DelaunayMode::AllowDegenerate).unwrap();
        assert_eq!(t.simplices.len(), 2);
    }

    #[test]
    fn too_few_points() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0]];
        assert!(matches!(delaunay(&pts, 2, DelaunayMode::Strict), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn random_points_2d_partition_hull() {
        let mut s = 12345u64;
        let mut rnd = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        };
        let pts: Vec<Vec<f64>> = (0..300).map(|_| vec![rnd() * 10.0, rnd() * 6.0]).collect();
        let t = delaunay(&pts, 2, DelaunayMode::Strict).unwrap();
        assert!(brute_force_is_delaunay(&pts, 2, &t.simplices));
        let area: f64 = t
            .simplices
            .iter()
            .map(|s| super::super::simplex_volume(&[&pts[s[0]], &pts[s[1]], &pts[s[2]]], 2))
            .sum();
        assert!((area - hull_area_2d(&pts)).abs() < 1e-9 * area);
        // Euler: for n points with h on the hull, 2n - 2 - h triangles; just bound it
        assert!(t.simplices.len() <= 2 * pts.len());
    }

    #[test]
    fn random_points_3d_and_1d() {
        let mut s = 99u64;
        let mut rnd = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        };
        let pts: Vec<Vec<f64>> = (0..120).map(|_| vec![rnd() * 4.0, rnd() * 4.0, rnd() * 4.0]).collect();
        let t = delaunay(&pts, 3, DelaunayMode::Strict).unwrap();
        assert!(brute_force_is_delaunay(&pts, 3, &t.simplices));
        let pts1: Vec<Vec<f64>> = vec![vec![3.0], vec![0.5], vec![2.0], vec![-1.0]];
        let t1 = delaunay(&pts1, 1, DelaunayMode::Strict).unwrap();
        assert_eq!(t1.simplices.len(), 3);
    }

    #[test]
    fn zero_jitter_lattice_triangulates() {
        let pts: Vec<Vec<f64>> = (0..5)
            .flat_map(|i| (0..4).map(move |j| vec![i as f64, j as f64]))
            .collect();
        let t = delaunay(&pts, 2, DelaunayMode::AllowDegenerate).unwrap();
        assert_eq!(t.simplices.len(), 2 * 4 * 3);
        assert!(brute_force_is_delaunay(&pts, 2, &t.simplices));
    }
}
