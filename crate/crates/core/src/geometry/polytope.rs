//! Bounded convex polytopes in dimensions 1 to 3, clipped by half-spaces.

use super::{dot, Point};

#[derive(Debug, Clone, PartialEq)]
pub enum Polytope {
    Empty,
    Interval(f64, f64),
    /// Counter-clockwise vertex loop.
    Polygon(Vec<[f64; 2]>),
    /// Faces as vertex loops (orientation not tracked).
    Polyhedron(Vec<Vec<[f64; 3]>>),
}

const EPS: f64 = 1e-12;

impl Polytope {
    /// Axis-aligned box `[lo, hi]`.
    pub fn cuboid(lo: &[f64], hi: &[f64]) -> Self {
        match lo.len() {
            1 => Polytope::Interval(lo[0], hi[0]),
            2 => Polytope::Polygon(vec![[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]]),
            3 => {
                let v = |i: usize| {
                    [
                        if i & 1 == 0 { lo[0] } else { hi[0] },
                        if i & 2 == 0 { lo[1] } else { hi[1] },
                        if i & 4 == 0 { lo[2] } else { hi[2] },
                    ]
                };
                let faces = [[0, 2, 6, 4], [1, 5, 7, 3], [0, 4, 5, 1], [2, 3, 7, 6], [0, 1, 3, 2], [4, 6, 7, 5]];
                Polytope::Polyhedron(faces.iter().map(|f| f.iter().map(|&i| v(i)).collect()).collect())
            }
            d => panic!("polytopes are implemented for d <= 3, got {d}"),
        }
    }

    /// Convex hull of a simplex given by its `d + 1` vertices.
    pub fn simplex(pts: &[&[f64]]) -> Self {
        match pts.len() {
            2 => Polytope::Interval(pts[0][0].min(pts[1][0]), pts[0][0].max(pts[1][0])),
            3 => {
                let mut v: Vec<[f64; 2]> = pts.iter().map(|p| [p[0], p[1]]).collect();
                let area = (v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[1][1] - v[0][1]) * (v[2][0] - v[0][0]);
                if area < 0.0 {
                    v.swap(1, 2);
                }
                Polytope::Polygon(v)
            }
            4 => {
                let v: Vec<[f64; 3]> = pts.iter().map(|p| [p[0], p[1], p[2]]).collect();
                let faces = [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]];
                Polytope::Polyhedron(faces.iter().map(|f| f.iter().map(|&i| v[i]).collect()).collect())
            }
            n => panic!("simplex with {n} vertices is not supported"),
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            Polytope::Empty => true,
            Polytope::Interval(a, b) => b <= a,
            Polytope::Polygon(v) => v.len() < 3,
            Polytope::Polyhedron(f) => f.len() < 4,
        }
    }

    pub fn vertices(&self) -> Vec<Point> {
        match self {
            Polytope::Empty => vec![],
            Polytope::Interval(a, b) => vec![[*a, 0.0, 0.0], [*b, 0.0, 0.0]],
            Polytope::Polygon(v) => v.iter().map(|p| [p[0], p[1], 0.0]).collect(),
            Polytope::Polyhedron(faces) => {
                let mut out: Vec<Point> = vec![];
                for f in faces {
                    for p in f {
                        if !out.iter().any(|q| (0..3).all(|c| (q[c] - p[c]).abs() < 1e-10)) {
                            out.push(*p);
                        }
                    }
                }
                out
            }
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            Polytope::Empty => 0.0,
            Polytope::Interval(a, b) => (b - a).max(0.0),
            Polytope::Polygon(v) => {
                let n = v.len();
                if n < 3 {
                    return 0.0;
                }
                let s: f64 = (0..n).map(|i| v[i][0] * v[(i + 1) % n][1] - v[(i + 1) % n][0] * v[i][1]).sum();
                (s / 2.0).abs()
            }
            Polytope::Polyhedron(faces) => {
                let verts = self.vertices();
                if verts.len() < 4 {
                    return 0.0;
                }
                let mut c = [0.0; 3];
                for v in &verts {
                    for k in 0..3 {
                        c[k] += v[k] / verts.len() as f64;
                    }
                }
                let mut vol = 0.0;
                for f in faces {
                    for i in 1..f.len().saturating_sub(1) {
                        vol += tet_volume(&c, &f[0], &f[i], &f[i + 1]);
                    }
                }
                vol
            }
        }
    }

    /// Distance from an interior point `x` to the boundary (minimum over the
    /// supporting hyperplanes of the facets).
    pub fn inner_distance(&self, x: &[f64]) -> f64 {
        match self {
            Polytope::Empty => 0.0,
            Polytope::Interval(a, b) => (x[0] - a).min(b - x[0]),
            Polytope::Polygon(v) => {
                let n = v.len();
                (0..n)
                    .map(|i| {
                        let (p, q) = (v[i], v[(i + 1) % n]);
                        let t = [q[0] - p[0], q[1] - p[1]];
                        let l = (t[0] * t[0] + t[1] * t[1]).sqrt();
                        ((x[0] - p[0]) * t[1] - (x[1] - p[1]) * t[0]).abs() / l
                    })
                    .fold(f64::INFINITY, f64::min)
            }
            Polytope::Polyhedron(faces) => faces
                .iter()
                .filter(|f| f.len() >= 3)
                .map(|f| {
                    let a = [f[1][0] - f[0][0], f[1][1] - f[0][1], f[1][2] - f[0][2]];
                    let b = [f[2][0] - f[0][0], f[2][1] - f[0][1], f[2][2] - f[0][2]];
                    let n = [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
                    let l = norm(&n);
                    if l == 0.0 {
                        return f64::INFINITY;
                    }
                    let r = [x[0] - f[0][0], x[1] - f[0][1], x[2] - f[0][2]];
                    dot(&n, &r).abs() / l
                })
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Intersection with the half-space `{x : n.x <= b}`.
    pub fn clip(&self, n: &[f64], b: f64) -> Polytope {
        match self {
            Polytope::Empty => Polytope::Empty,
            Polytope::Interval(lo, hi) => {
                let (mut lo, mut hi) = (*lo, *hi);
                if n[0] > 0.0 {
                    hi = hi.min(b / n[0]);
                } else if n[0] < 0.0 {
                    lo = lo.max(b / n[0]);
                } else if b < 0.0 {
                    return Polytope::Empty;
                }
                if hi - lo <= EPS * (1.0 + lo.abs()) {
                    Polytope::Empty
                } else {
                    Polytope::Interval(lo, hi)
                }
            }
            Polytope::Polygon(v) => {
                let scale = poly_scale(v.iter().map(|p| &p[..]));
                let tol = EPS * scale * norm(n);
                match side(v.iter().map(|p| dot(n, p) - b), tol) {
                    Side::Inside => return self.clone(),
                    Side::Outside => return Polytope::Empty,
                    Side::Cut => {}
                }
                let out = clip_loop(v, n, b, tol);
                if out.len() < 3 || Polytope::Polygon(out.clone()).volume() <= EPS * scale * scale {
                    Polytope::Empty
                } else {
                    Polytope::Polygon(out)
                }
            }
            Polytope::Polyhedron(faces) => {
                let scale = poly_scale(faces.iter().flatten().map(|p| &p[..]));
                let tol = EPS * scale * norm(n);
                match side(faces.iter().flatten().map(|p| dot(n, p) - b), tol) {
                    Side::Inside => return self.clone(),
                    Side::Outside => return Polytope::Empty,
                    Side::Cut => {}
                }
                let mut new_faces = vec![];
                let mut cap: Vec<[f64; 3]> = vec![];
                for f in faces {
                    let clipped = clip_loop(f, n, b, tol);
                    for p in &clipped {
                        if (dot(n, p) - b).abs() <= tol * 10.0
                            && !cap.iter().any(|q| (0..3).all(|k| (q[k] - p[k]).abs() <= 1e-10 * scale))
                        {
                            cap.push(*p);
                        }
                    }
                    if clipped.len() >= 3 {
                        new_faces.push(clipped);
                    }
                }
                if cap.len() >= 3 {
                    new_faces.push(order_planar_loop(cap, n));
                }
                let poly = Polytope::Polyhedron(new_faces);
                if poly.is_empty() || poly.volume() <= EPS * scale.powi(3) {
                    Polytope::Empty
                } else {
                    poly
                }
            }
        }
    }
}

enum Side {
    Inside,
    Outside,
    Cut,
}

fn side(signed: impl Iterator<Item = f64>, tol: f64) -> Side {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in signed {
        lo = lo.min(s);
        hi = hi.max(s);
    }
    if hi <= tol {
        Side::Inside
    } else if lo >= -tol {
        Side::Outside
    } else {
        Side::Cut
    }
}

fn norm(n: &[f64]) -> f64 {
    dot(n, n).sqrt()
}

fn poly_scale<'a>(pts: impl Iterator<Item = &'a [f64]>) -> f64 {
    pts.flat_map(|p| p.iter().map(|v| v.abs())).fold(1.0, f64::max)
}

fn tet_volume(a: &[f64; 3], b: &[f64; 3], c: &[f64; 3], d: &[f64; 3]) -> f64 {
    let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
    let w = [d[0] - a[0], d[1] - a[1], d[2] - a[2]];
    (u[0] * (v[1] * w[2] - v[2] * w[1]) - u[1] * (v[0] * w[2] - v[2] * w[0]) + u[2] * (v[0] * w[1] - v[1] * w[0]))
        .abs()
        / 6.0
}

/// Sutherland–Hodgman clip of one closed vertex loop.
fn clip_loop<const N: usize>(v: &[[f64; N]], n: &[f64], b: f64, tol: f64) -> Vec<[f64; N]> {
    let m = v.len();
    let mut out = Vec::with_capacity(m + 2);
    for i in 0..m {
        let p = v[i];
        let q = v[(i + 1) % m];
        let sp = dot(n, &p) - b;
        let sq = dot(n, &q) - b;
        let p_in = sp <= tol;
        if p_in {
            out.push(p);
        }
        if (sp < -tol && sq > tol) || (sp > tol && sq < -tol) {
            let t = sp / (sp - sq);
            let mut x = [0.0; N];
            for k in 0..N {
                x[k] = p[k] + t * (q[k] - p[k]);
            }
            out.push(x);
        }
    }
    out.dedup_by(|a, b| (0..N).all(|k| (a[k] - b[k]).abs() < 1e-14 * (1.0 + b[k].abs())));
    if out.len() > 1 {
        let (first, last) = (out[0], out[out.len() - 1]);
        if (0..N).all(|k| (first[k] - last[k]).abs() < 1e-14 * (1.0 + first[k].abs())) {
            out.pop();
        }
    }
    out
}

fn order_planar_loop(mut pts: Vec<[f64; 3]>, n: &[f64]) -> Vec<[f64; 3]> {
    let mut c = [0.0; 3];
    for p in &pts {
        for k in 0..3 {
            c[k] += p[k] / pts.len() as f64;
        }
    }
    // orthonormal frame (e1, e2) of the plane
    let nn = norm(n);
    let nu = [n[0] / nn, n[1] / nn, n[2] / nn];
    let a = if nu[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let mut e1 = [
        a[1] * nu[2] - a[2] * nu[1],
        a[2] * nu[0] - a[0] * nu[2],
        a[0] * nu[1] - a[1] * nu[0],
    ];
    let l = norm(&e1);
    e1.iter_mut().for_each(|x| *x /= l);
    let e2 = [
        nu[1] * e1[2] - nu[2] * e1[1],
        nu[2] * e1[0] - nu[0] * e1[2],
        nu[0] * e1[1] - nu[1] * e1[0],
    ];
    pts.sort_by(|p, q| {
        let dp = [p[0] - c[0], p[1] - c[1], p[2] - c[2]];
        let dq = [q[0] - c[0], q[1] - c[1], q[2] - c[2]];
        let ap = dot(&dp, &e2).atan2(dot(&dp, &e1));
        let aq = dot(&dq, &e2).atan2(dot(&dq, &e1));
        ap.total_cmp(&aq)
    });
    pts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_clipped_by_diagonal() {
        let sq = Polytope::cuboid(&[0.0, 0.0], &[2.0, 2.0]);
        assert!((sq.volume() - 4.0).abs() < 1e-14);
        let half = sq.clip(&[1.0, 1.0], 2.0);
        assert!((half.volume() - 2.0).abs() < 1e-14);
        assert!(sq.clip(&[1.0, 0.0], -1.0).is_empty());
    }

    #[test]
    fn cube_clips_match_analytic_volumes() {
        let cube = Polytope::cuboid(&[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0]);
        assert!((cube.volume() - 1.0).abs() < 1e-14);
        let slab = cube.clip(&[0.0, 0.0, 1.0], 0.25);
        assert!((slab.volume() - 0.25).abs() < 1e-13);
        // corner tetrahedron x + y + z <= 1 has volume 1/6
        let corner = cube.clip(&[1.0, 1.0, 1.0], 1.0);
        assert!((corner.volume() - 1.0 / 6.0).abs() < 1e-13);
        // then cut it in half by x <= y
        let piece = corner.clip(&[1.0, -1.0, 0.0], 0.0);
        assert!((piece.volume() - 1.0 / 12.0).abs() < 1e-13);
    }

    #[test]
    fn interval_and_simplex() {
        let i = Polytope::cuboid(&[0.0], &[3.0]).clip(&[-1.0], -1.0);
        assert_eq!(i, Polytope::Interval(1.0, 3.0));
        let t = Polytope::simplex(&[&[0.0, 0.0], &[0.0, 1.0], &[1.0, 0.0]]);
        assert!((t.volume() - 0.5).abs() < 1e-15);
        let tet = Polytope::simplex(&[&[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        assert!((tet.volume() - 1.0 / 6.0).abs() < 1e-15);
    }
}
