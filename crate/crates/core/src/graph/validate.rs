use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::geometry::delaunay::{clearance, TAU_GP};
use crate::geometry::{circumsphere, dist, Point, SpatialGrid};

use super::{ExtendedGraph, Window};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionCheck {
    pub passed: bool,
    pub witness: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    /// (i) largest distance from a probe to the volumetric points.
    pub covering: ConditionCheck,
    /// (ii) smallest pairwise vertex distance.
    pub separation: ConditionCheck,
    /// (iii) longest edge.
    pub edge_range: ConditionCheck,
    /// (iv) widest corridor needed by a sampled pair.
    pub corridor: ConditionCheck,
    /// (v) smallest relative circumsphere clearance.
    pub general_position: ConditionCheck,
    pub components: usize,
    pub verdict: bool,
}

impl ValidationReport {
    pub fn checks(&self) -> [(&'static str, &ConditionCheck); 5] {
        [
            ("covering", &self.covering),
            ("separation", &self.separation),
            ("edge_range", &self.edge_range),
            ("corridor", &self.corridor),
            ("general_position", &self.general_position),
        ]
    }
}

/// Per-axis probe coordinates with spacing at most `h` over the box eroded by `margin`.
fn probe_axes(window: &Window, d: usize, h: f64, margin: f64) -> Vec<Vec<f64>> {
    (0..d)
        .map(|c| {
            let (a, b) = (window.lo[c] + margin, window.hi[c] - margin);
            if a > b {
                return vec![];
            }
            let k = ((b - a) / h).ceil().max(1.0) as usize;
            (0..=k).map(|i| a + (b - a) * i as f64 / k as f64).collect()
        })
        .collect()
}

fn for_each_probe(axes: &[Vec<f64>], first: f64, mut f: impl FnMut(&Point)) {
    let d = axes.len();
    let mut p = [first, 0.0, 0.0];
    match d {
        1 => f(&p),
        2 => {
            for &y in &axes[1] {
                p[1] = y;
                f(&p);
            }
        }
        _ => {
            for &y in &axes[1] {
                for &z in &axes[2] {
                    p[1] = y;
                    p[2] = z;
                    f(&p);
                }
            }
        }
    }
}

/// Probes (window eroded by `radius`, spacing at most `h`) farther than
/// `radius` from every masked point, in grid order.
pub(crate) fn uncovered_probes(
    positions: &[Point],
    mask: &[bool],
    d: usize,
    window: &Window,
    h: f64,
    radius: f64,
) -> Vec<Point> {
    let pts: Vec<Point> = positions.iter().zip(mask).filter(|(_, &m)| m).map(|(p, _)| *p).collect();
    let axes = probe_axes(window, d, h, radius);
    let first = axes.first().map(Vec::as_slice).unwrap_or(&[]);
    if pts.is_empty() {
        let mut out = vec![];
        for &x in first {
            for_each_probe(&axes, x, |p| out.push(*p));
        }
        return out;
    }
    let grid = SpatialGrid::new(&pts, d, radius);
    first
        .par_iter()
        .map(|&x| {
            let mut out = vec![];
            for_each_probe(&axes, x, |p| {
                let mut hit = false;
                grid.for_each_within(&pts, p, radius, |_| hit = true);
                if !hit {
                    out.push(*p);
                }
            });
            out
        })
        .flatten()
        .collect()
}

/// Largest nearest-point distance over the probe grid, and where it occurs.
///
/// Points beyond the window do not exist, so the probes stay at distance `radius`
/// from the window boundary.
pub(crate) fn covering_gap(
    positions: &[Point],
    mask: &[bool],
    d: usize,
    window: &Window,
    h: f64,
    radius: f64,
) -> (f64, Point) {
    let pts: Vec<Point> = positions.iter().zip(mask).filter(|(_, &m)| m).map(|(p, _)| *p).collect();
    if pts.is_empty() {
        return (f64::INFINITY, [0.0; 3]);
    }
    let grid = SpatialGrid::new(&pts, d, radius);
    let axes = probe_axes(window, d, h, radius);
    let far = 2.0 * window.max_side() + 1.0;
    axes.first()
        .map(Vec::as_slice)
        .unwrap_or(&[])
        .par_iter()
        .map(|&x| {
            let mut worst = (0.0f64, [0.0; 3]);
            for_each_probe(&axes, x, |p| {
                let g = grid.nearest(&pts, p, far).map_or(f64::INFINITY, |n| n.1);
                if g > worst.0 {
                    worst = (g, *p);
                }
            });
            worst
        })
        .reduce(|| (0.0, [0.0; 3]), |a, b| if b.0 > a.0 { b } else { a })
}

fn min_pair_distance(positions: &[Point], d: usize, r: f64, window: &Window) -> (f64, (usize, usize)) {
    let n = positions.len();
    if n < 2 {
        return (f64::INFINITY, (0, 0));
    }
    let diam = window.max_side() * (d as f64).sqrt() + 1.0;
    let mut radius = r.max(1e-12);
    loop {
        let grid = SpatialGrid::new(positions, d, radius);
        let mut best = (f64::INFINITY, (0, 0));
        for i in 0..n {
            grid.for_each_within(positions, &positions[i], radius, |j| {
                if j > i {
                    let dd = dist(&positions[i][..d], &positions[j][..d]);
                    if dd < best.0 {
                        best = (dd, (i, j));
                    }
                }
            });
        }
        if best.0.is_finite() || radius > diam {
            return best;
        }
        radius *= 2.0;
    }
}

fn segment_distance(p: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let d = p.len();
    let ab: Vec<f64> = (0..d).map(|c| b[c] - a[c]).collect();
    let l2: f64 = ab.iter().map(|v| v * v).sum();
    let t = if l2 == 0.0 {
        0.0
    } else {
        ((0..d).map(|c| (p[c] - a[c]) * ab[c]).sum::<f64>() / l2).clamp(0.0, 1.0)
    };
    let proj: Vec<f64> = (0..d).map(|c| a[c] + t * ab[c]).collect();
    dist(p, &proj)
}

/// Smallest `w` such that a path from `s` to `t` stays within `w` of the segment `[s, t]`.
fn corridor_width(g: &ExtendedGraph, s: usize, t: usize) -> f64 {
    let (a, b) = (g.position(s), g.position(t));
    let mut best = vec![f64::INFINITY; g.len()];
    let mut heap = BinaryHeap::new();
    best[s] = 0.0;
    heap.push(Reverse((0.0f64.to_bits(), s)));
    while let Some(Reverse((bits, v))) = heap.pop() {
        let w = f64::from_bits(bits);
        if w > best[v] {
            continue;
        }
        if v == t {
            return w;
        }
        for &u in g.neighbors(v) {
            let c = w.max(segment_distance(g.position(u), a, b));
            if c < best[u] {
                best[u] = c;
                heap.push(Reverse((c.to_bits(), u)));
            }
        }
    }
    f64::INFINITY
}

pub fn validate_graph(g: &ExtendedGraph) -> ValidationReport {
    validate_graph_with(g, 200, g.params.seed ^ 0x5eed_c0de)
}

/// Checks conditions (i)-(v); the corridor condition on `samples` seeded vertex pairs.
pub fn validate_graph_with(g: &ExtendedGraph, samples: usize, seed: u64) -> ValidationReport {
    let p = &g.params;
    let d = p.dim;
    let (r, big_r, c0) = (p.hardcore_radius, p.covering_radius, p.interaction_range);

    let (gap, at) = covering_gap(&g.positions, &g.volumetric, d, &g.window, r / 4.0, big_r);
    let covering = ConditionCheck {
        passed: gap <= big_r,
        witness: gap,
        detail: format!("max covering gap {gap:.6} at {:?} (R = {big_r})", &at[..d]),
    };

    let (sep, pair) = min_pair_distance(&g.positions, d, r, &g.window);
    let separation = ConditionCheck {
        passed: sep >= r,
        witness: sep,
        detail: format!("min pairwise distance {sep:.6} between {} and {} (r = {r})", pair.0, pair.1),
    };

    let (longest, which) = (0..g.edges.len())
        .map(|e| (g.edge_length(e), e))
        .fold((0.0, usize::MAX), |a, b| if b.0 > a.0 { b } else { a });
    let edge_range = ConditionCheck {
        passed: longest <= c0,
        witness: longest,
        detail: if which == usize::MAX {
            "no edges".into()
        } else {
            format!("longest edge {longest:.6} = {:?} (C0 = {c0})", g.edges[which])
        },
    };

    let components = g.components();
    let n = g.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<(usize, usize)> = if n < 2 {
        vec![]
    } else {
        (0..samples)
            .map(|_| {
                let a = rng.random_range(0..n);
                let mut b = rng.random_range(0..n - 1);
                if b >= a {
                    b += 1;
                }
                (a, b)
            })
            .collect()
    };
    let widths: Vec<f64> = pairs.par_iter().map(|&(a, b)| corridor_width(g, a, b)).collect();
    let (worst, worst_pair) = widths
        .iter()
        .zip(&pairs)
        .fold((0.0f64, (0, 0)), |a, (&w, &pp)| if w > a.0 { (w, pp) } else { a });
    let failed = widths.iter().filter(|&&w| w > c0).count();
    let corridor = ConditionCheck {
        passed: failed == 0 && components <= 1,
        witness: worst,
        detail: format!(
            "{failed} of {} sampled pairs lack a corridor path; widest needed {worst:.6} for {worst_pair:?}; {components} component(s) (C0 = {c0})",
            pairs.len()
        ),
    };

    let general_position = if g.fixture_only {
        ConditionCheck { passed: true, witness: f64::NAN, detail: "skipped: fixture-only graph".into() }
    } else {
        let l1: Vec<usize> = (0..n).filter(|&i| g.volumetric[i]).collect();
        let mut local = vec![usize::MAX; n];
        for (k, &i) in l1.iter().enumerate() {
            local[i] = k;
        }
        let pts: Vec<Point> = l1.iter().map(|&i| g.positions[i]).collect();
        let simplices: Vec<Vec<usize>> = g.simplices.iter().map(|s| s.iter().map(|&i| local[i]).collect()).collect();
        let spheres: Option<Vec<_>> = simplices
            .iter()
            .map(|s| {
                let ps: Vec<&[f64]> = s.iter().map(|&k| &pts[k][..d]).collect();
                circumsphere(&ps, d)
            })
            .collect();
        match spheres {
            Some(sp) => {
                let c = clearance(&pts, d, &simplices, &sp);
                ConditionCheck {
                    passed: c >= TAU_GP,
                    witness: c,
                    detail: format!("smallest relative circumsphere clearance {c:e} (tolerance {TAU_GP:e})"),
                }
            }
            None => ConditionCheck {
                passed: false,
                witness: f64::NEG_INFINITY,
                detail: "a simplex has affinely dependent vertices".into(),
            },
        }
    };

    let verdict = covering.passed && separation.passed && edge_range.passed && corridor.passed && general_position.passed;
    ValidationReport { covering, separation, edge_range, corridor, general_position, components, verdict }
}
