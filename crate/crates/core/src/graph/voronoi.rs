use crate::error::{Error, Result};
use crate::geometry::{dist, dot, facet_halfspace, Point, Polytope, SpatialGrid};

use rayon::prelude::*;

use super::Window;

#[derive(Debug, Clone)]
pub struct VoronoiCell {
    pub site: usize,
    pub polytope: Polytope,
    pub volume: f64,
    pub touches_window: bool,
}

impl VoronoiCell {
    /// Largest distance from the site to a cell vertex.
    pub fn outer_radius(&self, site: &[f64]) -> f64 {
        self.polytope.vertices().iter().map(|v| dist(&v[..site.len()], site)).fold(0.0, f64::max)
    }
}

fn reach(poly: &Polytope, x: &[f64]) -> f64 {
    poly.vertices().iter().map(|v| dist(&v[..x.len()], x)).fold(0.0, f64::max)
}

/// Voronoi cells of `points` clipped to `window`.
///
/// Each cell is cut by bisectors of neighbors in order of distance; the search
/// radius is doubled until it exceeds twice the cell's outer radius, which
/// makes the result exact.
pub fn voronoi(points: &[Point], d: usize, window: &Window) -> Result<Vec<VoronoiCell>> {
    let n = points.len();
    if n == 0 {
        return Ok(vec![]);
    }
    let spacing = (window.volume() / n as f64).powf(1.0 / d as f64);
    let grid = SpatialGrid::new(points, d, spacing);
    let bbox = window.polytope();
    let tol = 1e-9 * window.max_side();
    (0..n).into_par_iter().map(|i| {
        let x = &points[i][..d];
        let mut poly = bbox.clone();
        let mut done = -1.0;
        let mut rho = 2.0 * spacing;
        loop {
            let mut nb: Vec<(f64, usize)> = vec![];
            grid.for_each_within(points, &points[i], rho, |j| {
                let dj = dist(&points[j][..d], x);
                if j != i && dj > done {
                    nb.push((dj, j));
                }
            });
            nb.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut out = reach(&poly, x);
            for (dj, j) in nb {
                if dj >= 2.0 * out {
                    break;
                }
                let y = &points[j][..d];
                let normal: Vec<f64> = (0..d).map(|c| y[c] - x[c]).collect();
                let b = 0.5 * (dot(y, y) - dot(x, x));
                poly = poly.clip(&normal, b);
                if poly.is_empty() {
                    return Err(Error::DegenerateCell(i));
                }
                out = reach(&poly, x);
            }
            done = rho;
            if 2.0 * out <= rho {
                break;
            }
            rho = 2.0 * out * (1.0 + 1e-12);
        }
        let volume = poly.volume();
        if !(volume > 0.0) {
            return Err(Error::DegenerateCell(i));
        }
        let touches_window = poly.vertices().iter().any(|v| window.boundary_distance(&v[..d]) <= tol);
        Ok(VoronoiCell { site: i, polytope: poly, volume, touches_window })
    })
    .collect()
}

/// For each cell, the simplices meeting it in positive volume with the
/// intersection volume `|T ∩ C|`.
pub fn simplex_overlaps(
    positions: &[Point],
    d: usize,
    simplices: &[Vec<usize>],
    cells: &[VoronoiCell],
) -> Vec<Vec<(usize, f64)>> {
    if simplices.is_empty() {
        return vec![vec![]; cells.len()];
    }
    // bounding balls around centroids
    let balls: Vec<(Point, f64)> = simplices
        .iter()
        .map(|s| {
            let mut c = [0.0; 3];
            for &v in s {
                for k in 0..d {
                    c[k] += positions[v][k] / s.len() as f64;
                }
            }
            let r = s.iter().map(|&v| dist(&positions[v][..d], &c[..d])).fold(0.0, f64::max);
            (c, r)
        })
        .collect();
    let mut radii: Vec<f64> = balls.iter().map(|b| b.1).collect();
    radii.sort_by(f64::total_cmp);
    let median = radii[radii.len() / 2].max(1e-12);
    let small_cut = 4.0 * median;
    let small: Vec<usize> = (0..balls.len()).filter(|&t| balls[t].1 <= small_cut).collect();
    let big: Vec<usize> = (0..balls.len()).filter(|&t| balls[t].1 > small_cut).collect();
    let boxes: Vec<([f64; 3], [f64; 3])> = simplices.iter().map(|s| aabb(s.iter().map(|&v| positions[v]), d)).collect();
    let centers: Vec<Point> = small.iter().map(|&t| balls[t].0).collect();
    let grid = SpatialGrid::new(&centers, d, 2.0 * median);
    let halfspaces: Vec<Vec<(Vec<f64>, f64)>> = simplices
        .iter()
        .map(|s| {
            (0..=d)
                .map(|k| {
                    let facet: Vec<&[f64]> = (0..=d).filter(|&m| m != k).map(|m| &positions[s[m]][..d]).collect();
                    let (n, b) = facet_halfspace(&facet, &positions[s[k]][..d], d);
                    (n[..d].to_vec(), b)
                })
                .collect()
        })
        .collect();
    cells
        .par_iter()
        .map(|cell| {
            let x = &positions[cell.site];
            let out = cell.outer_radius(&x[..d]);
            let cverts = cell.polytope.vertices();
            let cbox = aabb(cverts.iter().copied(), d);
            let ctol = 1e-12 * (1.0 + out + dist(&x[..d], &[0.0; 3][..d]));
            let mut cand = vec![];
            grid.for_each_within(&centers, x, out + small_cut, |k| cand.push(small[k]));
            cand.extend(big.iter().copied());
            cand.sort_unstable();
            let mut res = vec![];
            for t in cand {
                if dist(&balls[t].0[..d], &x[..d]) > out + balls[t].1 || !boxes_meet(&cbox, &boxes[t], d) {
                    continue;
                }
                // separating facet of T
                if halfspaces[t]
                    .iter()
                    .any(|(n, b)| cverts.iter().all(|v| dot(n, &v[..d]) - b >= -ctol * (1.0 + dot(n, n).sqrt())))
                {
                    continue;
                }
                let mut p = cell.polytope.clone();
                for (n, b) in &halfspaces[t] {
                    p = p.clip(n, *b);
                    if p.is_empty() {
                        break;
                    }
                }
                let v = p.volume();
                if v > 1e-12 * cell.volume {
                    res.push((t, v));
                }
            }
            res
        })
        .collect()
}

fn aabb(pts: impl Iterator<Item = Point>, d: usize) -> ([f64; 3], [f64; 3]) {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in pts {
        for c in 0..d {
            lo[c] = lo[c].min(p[c]);
            hi[c] = hi[c].max(p[c]);
        }
    }
    (lo, hi)
}

fn boxes_meet(a: &([f64; 3], [f64; 3]), b: &([f64; 3], [f64; 3]), d: usize) -> bool {
    (0..d).all(|c| a.0[c] <= b.1[c] && b.0[c] <= a.1[c])
}
