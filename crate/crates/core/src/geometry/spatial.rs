use super::{dist2, Point, MAX_DIM};

/// Uniform cell-list over a fixed point set for radius queries.
#[derive(Debug, Clone)]
pub struct SpatialGrid {
    dim: usize,
    cell: f64,
    origin: Point,
    counts: [usize; MAX_DIM],
    starts: Vec<usize>,
    items: Vec<usize>,
}

impl SpatialGrid {
    pub fn new(points: &[Point], dim: usize, cell: f64) -> Self {
        assert!(cell > 0.0, "grid cell size must be positive");
        let mut origin = [0.0; MAX_DIM];
        let mut upper = [0.0; MAX_DIM];
        if !points.is_empty() {
            for c in 0..dim {
                origin[c] = points.iter().map(|p| p[c]).fold(f64::INFINITY, f64::min);
                upper[c] = points.iter().map(|p| p[c]).fold(f64::NEG_INFINITY, f64::max);
            }
        }
        let mut counts = [1usize; MAX_DIM];
        for c in 0..dim {
            counts[c] = (((upper[c] - origin[c]) / cell).floor() as usize + 1).min(1 << 20);
        }
        let total: usize = counts[..dim].iter().product();
        let mut grid = SpatialGrid {
            dim,
            cell,
            origin,
            counts,
            starts: vec![0; total + 1],
            items: Vec::with_capacity(points.len()),
        };
        let keys: Vec<usize> = points.iter().map(|p| grid.key(&grid.coords(p))).collect();
        for &k in &keys {
            grid.starts[k + 1] += 1;
        }
        for i in 0..total {
            grid.starts[i + 1] += grid.starts[i];
        }
        let mut fill = grid.starts.clone();
        grid.items = vec![0; points.len()];
        for (i, &k) in keys.iter().enumerate() {
            grid.items[fill[k]] = i;
            fill[k] += 1;
        }
        grid
    }

    fn coords(&self, p: &Point) -> [isize; MAX_DIM] {
        let mut out = [0isize; MAX_DIM];
        for c in 0..self.dim {
            let v = ((p[c] - self.origin[c]) / self.cell).floor() as isize;
            out[c] = v.clamp(0, self.counts[c] as isize - 1);
        }
        out
    }

    fn key(&self, c: &[isize; MAX_DIM]) -> usize {
        let mut k = 0usize;
        for a in (0..self.dim).rev() {
            k = k * self.counts[a] + c[a] as usize;
        }
        k
    }

    /// Calls `f(index)` for every point within `radius` of `q` (inclusive).
    pub fn for_each_within(&self, points: &[Point], q: &Point, radius: f64, mut f: impl FnMut(usize)) {
        let r2 = radius * radius;
        let mut lo = [0isize; MAX_DIM];
        let mut hi = [0isize; MAX_DIM];
        for c in 0..self.dim {
            let a = ((q[c] - radius - self.origin[c]) / self.cell).floor() as isize;
            let b = ((q[c] + radius - self.origin[c]) / self.cell).floor() as isize;
            lo[c] = a.max(0);
            hi[c] = b.min(self.counts[c] as isize - 1);
            if lo[c] > hi[c] {
                return;
            }
        }
        let mut cur = lo;
        loop {
            let k = self.key(&cur);
            for &i in &self.items[self.starts[k]..self.starts[k + 1]] {
                if dist2(&points[i][..self.dim], &q[..self.dim]) <= r2 {
                    f(i);
                }
            }
            let mut a = 0;
            loop {
                if a == self.dim {
                    return;
                }
                cur[a] += 1;
                if cur[a] <= hi[a] {
                    break;
                }
                cur[a] = lo[a];
                a += 1;
            }
        }
    }

    /// Nearest point to `q` and its distance, searching outward up to `max_radius`.
    pub fn nearest(&self, points: &[Point], q: &Point, max_radius: f64) -> Option<(usize, f64)> {
        let mut radius = self.cell;
        loop {
            let mut best: Option<(usize, f64)> = None;
            self.for_each_within(points, q, radius, |i| {
                let d2 = dist2(&points[i][..self.dim], &q[..self.dim]);
                if best.is_none_or(|(_, b)| d2 < b) {
                    best = Some((i, d2));
                }
            });
            if let Some((i, d2)) = best {
                return Some((i, d2.sqrt()));
            }
            if radius >= max_radius {
                return None;
            }
            radius = (radius * 2.0).min(max_radius);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radius_query_matches_brute_force() {
        let pts: Vec<Point> = (0..200)
            .map(|i| {
                let t = i as f64;
                [(t * 0.618).fract() * 10.0, (t * 0.377).fract() * 7.0, 0.0]
            })
            .collect();
        let grid = SpatialGrid::new(&pts, 2, 0.9);
        let q = [4.2, 3.3, 0.0];
        let mut got = vec![];
        grid.for_each_within(&pts, &q, 1.7, |i| got.push(i));
        got.sort();
        let want: Vec<usize> = (0..pts.len())
            .filter(|&i| dist2(&pts[i][..2], &q[..2]) <= 1.7 * 1.7)
            .collect();
        assert_eq!(got, want);
        let (i, d) = grid.nearest(&pts, &q, 20.0).unwrap();
        let bf = (0..pts.len())
            .min_by(|&a, &b| dist2(&pts[a][..2], &q[..2]).total_cmp(&dist2(&pts[b][..2], &q[..2])))
            .unwrap();
        assert_eq!(i, bf);
        assert!((d - dist2(&pts[bf][..2], &q[..2]).sqrt()).abs() < 1e-15);
    }
}
