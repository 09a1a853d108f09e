//! Small graphs shared by unit tests.

use crate::graph::{axis_lattice, generate_graph, point, Ensemble, ExtendedGraph, GraphParams, Window};

pub fn two_points() -> ExtendedGraph {
    let params = GraphParams { ensemble: Ensemble::JitteredLattice { jitter: 0.0 }, ..GraphParams::default() };
    ExtendedGraph::from_parts(
        params,
        Window::cube(2, 0.0, 2.0),
        vec![point(&[0.5, 0.5]), point(&[1.5, 0.5])],
        vec![false, false],
        vec![(0, 1)],
        Some(vec![]),
        true,
    )
    .unwrap()
}

pub fn chain(m: usize) -> ExtendedGraph {
    let params = GraphParams {
        dim: 1,
        ensemble: Ensemble::JitteredLattice { jitter: 0.0 },
        ..GraphParams::default()
    };
    ExtendedGraph::from_parts(
        params,
        Window::cube(1, -0.5, m as f64 + 0.5),
        (0..=m).map(|i| point(&[i as f64])).collect(),
        vec![false; m + 1],
        (0..m).map(|i| (i, i + 1)).collect(),
        Some(vec![]),
        true,
    )
    .unwrap()
}

/// Square lattice with axis-aligned nearest-neighbour edges only.
pub fn harmonic_lattice(side: usize) -> ExtendedGraph {
    grid(side, side)
}

pub fn grid(nx: usize, ny: usize) -> ExtendedGraph {
    axis_lattice(&[nx, ny]).unwrap()
}

/// Jittered lattice whose window pads `[0, side)` so that it meets the 4 C0 minimum.
pub fn jittered(side: f64, seed: u64) -> ExtendedGraph {
    let pad = ((28.0 - side) / 2.0).max(0.0);
    generate_graph(&GraphParams { seed, ..GraphParams::default() }, &Window::cube(2, -pad, side + pad)).unwrap()
}

