//! Low-level geometry for point sets in dimensions 1 to 3: small dense
//! linear algebra, circumspheres, a cell-list neighbor grid, Bowyer–Watson
//! Delaunay triangulation and convex polytope clipping.

pub mod delaunay;
pub mod polytope;
pub mod spatial;

pub use delaunay::{delaunay, DelaunayMode, Triangulation};
pub use polytope::Polytope;
pub use spatial::SpatialGrid;

/// Largest supported ambient dimension.
pub const MAX_DIM: usize = 3;

pub type Point = [f64; MAX_DIM];

pub fn to_point(coords: &[f64]) -> Point {
    let mut p = [0.0; MAX_DIM];
    p[..coords.len()].copy_from_slice(coords);
    p
}

#[inline]
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Volume of the unit ball in dimension `d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        2 => std::f64::consts::PI,
        3 => 4.0 / 3.0 * std::f64::consts::PI,
        _ => 2.0 * std::f64::consts::PI / d as f64 * unit_ball_volume(d - 2),
    }
}

pub fn factorial(d: usize) -> f64 {
    (1..=d).map(|k| k as f64).product()
}

/// Determinant of a row-major `d x d` matrix.
pub fn det(m: &[f64], d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => m[0],
        2 => m[0] * m[3] - m[1] * m[2],
        3 => {
            m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
                + m[2] * (m[3] * m[7] - m[4] * m[6])
        }
        _ => {
            let mut a = m.to_vec();
            lu_det(&mut a, d)
        }
    }
}

fn lu_det(a: &mut [f64], n: usize) -> f64 {
    let mut sign = 1.0;
    for k in 0..n {
        let piv = (k..n)
            .max_by(|&i, &j| a[i * n + k].abs().total_cmp(&a[j * n + k].abs()))
            .unwrap();
        if a[piv * n + k] == 0.0 {
            return 0.0;
        }
        if piv != k {
            for c in 0..n {
                a.swap(k * n + c, piv * n + c);
            }
            sign = -sign;
        }
        for i in k + 1..n {
            let f = a[i * n + k] / a[k * n + k];
            for c in k..n {
                a[i * n + c] -= f * a[k * n + c];
            }
        }
    }
    sign * (0..n).map(|k| a[k * n + k]).product::<f64>()
}

/// Adjugate (transposed cofactor matrix) of a row-major `d x d` matrix, `d <= 3`.
///
/// `adj(M) M = det(M) I`, so `d det(M) / d M_ij = adj(M)_ji`.
pub fn adjugate(m: &[f64], d: usize) -> Vec<f64> {
    match d {
        1 => vec![1.0],
        2 => vec![m[3], -m[1], -m[2], m[0]],
        3 => {
            let c = |r0: usize, c0: usize, r1: usize, c1: usize| {
                m[r0 * 3 + c0] * m[r1 * 3 + c1] - m[r0 * 3 + c1] * m[r1 * 3 + c0]
            };
            // adj[i][j] = cofactor[j][i]
            vec![
                c(1, 1, 2, 2),
                -c(0, 1, 2, 2),
                c(0, 1, 1, 2),
                -c(1, 0, 2, 2),
                c(0, 0, 2, 2),
                -c(0, 0, 1, 2),
                c(1, 0, 2, 1),
                -c(0, 0, 2, 1),
                c(0, 0, 1, 1),
            ]
        }
        _ => panic!("adjugate is implemented for d <= 3"),
    }
}

/// Solves `a x = b` for a small dense row-major system with partial pivoting.
/// Returns `None` when a pivot falls below `tol` times the largest entry.
pub fn solve_small(a: &[f64], b: &[f64], n: usize, tol: f64) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    let scale = m.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(f64::MIN_POSITIVE);
    for k in 0..n {
        let piv = (k..n).max_by(|&i, &j| m[i * n + k].abs().total_cmp(&m[j * n + k].abs()))?;
        if m[piv * n + k].abs() <= tol * scale {
            return None;
        }
        if piv != k {
            for c in 0..n {
                m.swap(k * n + c, piv * n + c);
            }
            x.swap(k, piv);
        }
        for i in k + 1..n {
            let f = m[i * n + k] / m[k * n + k];
            for c in k..n {
                m[i * n + c] -= f * m[k * n + c];
            }
            x[i] -= f * x[k];
        }
    }
    for k in (0..n).rev() {
        let mut s = x[k];
        for c in k + 1..n {
            s -= m[k * n + c] * x[c];
        }
        x[k] = s / m[k * n + k];
    }
    Some(x)
}

/// Circumsphere of a `k`-simplex (`k + 1` points) embedded in `R^d`, `k <= d`.
///
/// The center lies in the affine hull of the points. Returns `(center, radius^2)`,
/// or `None` for affinely dependent points.
pub fn circumsphere(pts: &[&[f64]], d: usize) -> Option<(Point, f64)> {
    let k = pts.len() - 1;
    let p0 = pts[0];
    if k == 0 {
        return Some((to_point(p0), 0.0));
    }
    let e: Vec<Vec<f64>> = pts[1..]
        .iter()
        .map(|p| (0..d).map(|c| p[c] - p0[c]).collect())
        .collect();
    if k == d {
        // full-dimensional: 2 e_i . x = |e_i|^2 directly, which is better
        // conditioned than the Gram system for flat simplices
        let mut m = vec![0.0; d * d];
        let mut rhs = vec![0.0; d];
        for i in 0..d {
            for c in 0..d {
                m[i * d + c] = 2.0 * e[i][c];
            }
            rhs[i] = dot(&e[i], &e[i]);
        }
        let x = solve_small(&m, &rhs, d, 1e-15)?;
        let mut c = to_point(p0);
        for i in 0..d {
            c[i] += x[i];
        }
        return Some((c, dot(&x, &x)));
    }
    let mut g = vec![0.0; k * k];
    let mut rhs = vec![0.0; k];
    for i in 0..k {
        for j in 0..k {
            g[i * k + j] = 2.0 * dot(&e[i], &e[j]);
        }
        rhs[i] = dot(&e[i], &e[i]);
    }
    let alpha = solve_small(&g, &rhs, k, 1e-13)?;
    let mut c = to_point(p0);
    for (i, a) in alpha.iter().enumerate() {
        for (cc, ec) in c.iter_mut().zip(&e[i]) {
            *cc += a * ec;
        }
    }
    let r2 = dist2(&c[..d], p0);
    Some((c, r2))
}

/// Signed volume factor `det[p1 - p0, ..., pd - p0]` (rows), i.e. `d!` times the
/// signed simplex volume.
pub fn orient(pts: &[&[f64]], d: usize) -> f64 {
    let p0 = pts[0];
    let mut m = vec![0.0; d * d];
    for i in 0..d {
        for c in 0..d {
            m[i * d + c] = pts[i + 1][c] - p0[c];
        }
    }
    det(&m, d)
}

pub fn simplex_volume(pts: &[&[f64]], d: usize) -> f64 {
    orient(pts, d).abs() / factorial(d)
}

/// Half-space `{x : n.x <= b}` bounded by the hyperplane through `facet`
/// (`d` points) and containing `apex`.
pub fn facet_halfspace(facet: &[&[f64]], apex: &[f64], d: usize) -> (Point, f64) {
    let mut n = [0.0; MAX_DIM];
    match d {
        1 => n[0] = 1.0,
        2 => {
            let t = [facet[1][0] - facet[0][0], facet[1][1] - facet[0][1]];
            n[0] = t[1];
            n[1] = -t[0];
        }
        3 => {
            let a: Vec<f64> = (0..3).map(|c| facet[1][c] - facet[0][c]).collect();
            let b: Vec<f64> = (0..3).map(|c| facet[2][c] - facet[0][c]).collect();
            n[0] = a[1] * b[2] - a[2] * b[1];
            n[1] = a[2] * b[0] - a[0] * b[2];
            n[2] = a[0] * b[1] - a[1] * b[0];
        }
        _ => panic!("facet_halfspace is implemented for d <= 3"),
    }
    let mut b = dot(&n[..d], facet[0]);
    if dot(&n[..d], apex) > b {
        for v in n.iter_mut() {
            *v = -*v;
        }
        b = -b;
    }
    (n, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adjugate_times_matrix_is_det_identity() {
        let m = [2.0, -1.0, 0.5, 0.3, 4.0, 1.0, -2.0, 0.7, 3.0];
        let a = adjugate(&m, 3);
        let dm = det(&m, 3);
        for i in 0..3 {
            for j in 0..3 {
                let s: f64 = (0..3).map(|k| a[i * 3 + k] * m[k * 3 + j]).sum();
                let want = if i == j { dm } else { 0.0 };
                assert!((s - want).abs() < 1e-12);
            }
        }
        let m2 = [1.5, 2.0, -0.5, 3.0];
        let a2 = adjugate(&m2, 2);
        assert!((a2[0] * m2[0] + a2[1] * m2[2] - det(&m2, 2)).abs() < 1e-14);
    }

    #[test]
    fn circumsphere_of_right_triangle() {
        let (c, r2) = circumsphere(&[&[0.0, 0.0], &[2.0, 0.0], &[0.0, 2.0]], 2).unwrap();
        assert!((c[0] - 1.0).abs() < 1e-14 && (c[1] - 1.0).abs() < 1e-14);
        assert!((r2 - 2.0).abs() < 1e-14);
        // segment embedded in the plane: center is the midpoint
        let (c, r2) = circumsphere(&[&[0.0, 0.0], &[2.0, 2.0]], 2).unwrap();
        assert!((c[0] - 1.0).abs() < 1e-14 && (r2 - 2.0).abs() < 1e-14);
        assert!(circumsphere(&[&[0.0, 0.0], &[1.0, 1.0], &[2.0, 2.0]], 2).is_none());
    }

    #[test]
    fn lu_det_matches_closed_form() {
        let m = [2.0, -1.0, 0.5, 0.3, 4.0, 1.0, -2.0, 0.7, 3.0];
        let mut a = m.to_vec();
        assert!((lu_det(&mut a, 3) - det(&m, 3)).abs() < 1e-12);
    }

    #[test]
    fn halfspace_contains_apex() {
        let (n, b) = facet_halfspace(&[&[0.0, 0.0], &[1.0, 0.0]], &[0.3, 0.5], 2);
        assert!(dot(&n[..2], &[0.3, 0.5]) <= b);
        assert!(dot(&n[..2], &[0.3, -0.5]) > b);
    }
}
