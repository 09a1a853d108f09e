use crate::graph::{ExtendedGraph, Window};

/// `‖u‖_{ℓ^p_ε(O)}` and `‖∇_B u‖_{ℓ^p_ε(O)}` over the vertices and edges in `O_ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteNorms {
    pub vertex: f64,
    pub edge: f64,
}

/// Discrete `ℓ^p` norms of a flat field `u` with `n` components per vertex.
pub fn discrete_norms(g: &ExtendedGraph, u: &[f64], n: usize, p: f64, region: &Window, eps: f64) -> DiscreteNorms {
    let r = region.scaled(1.0 / eps);
    let inside: Vec<bool> = (0..g.len()).map(|i| r.contains(g.position(i))).collect();
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x.sqrt().powf(p)).sum::<f64>().powf(1.0 / p);
    let vertex = norm(
        &mut (0..g.len()).filter(|&i| inside[i]).map(|i| u[i * n..(i + 1) * n].iter().map(|x| x * x).sum::<f64>()),
    );
    let edge = norm(&mut g.edges.iter().filter(|&&(i, j)| inside[i] && inside[j]).map(|&(i, j)| {
        (0..n).map(|c| (u[i * n + c] - u[j * n + c]).powi(2)).sum::<f64>()
    }));
    DiscreteNorms { vertex, edge }
}
