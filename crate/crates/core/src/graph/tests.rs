use super::*;
use crate::geometry::{circumsphere, delaunay, dist2, unit_ball_volume};

fn lattice_params(jitter: f64) -> GraphParams {
    GraphParams { ensemble: Ensemble::JitteredLattice { jitter }, ..GraphParams::default() }
}

fn delaunay_edges(points: &[Point], d: usize, c0: f64) -> Vec<(usize, usize)> {
    let tri = crate::geometry::delaunay::delaunay_points(points, d, DelaunayMode::AllowDegenerate).unwrap();
    let mut edges = vec![];
    for s in &tri.simplices {
        for a in 0..s.len() {
            for b in a + 1..s.len() {
                if dist(&points[s[a]][..d], &points[s[b]][..d]) <= c0 {
                    edges.push((s[a], s[b]));
                }
            }
        }
    }
    edges
}

#[test]
fn zero_jitter_lattice_fixture() {
    let g = generate_graph(&lattice_params(0.0), &Window::cube(2, 0.0, 4.0)).unwrap();
    assert_eq!(g.len(), 16);
    assert!(g.fixture_only);
    for p in &g.positions {
        assert_eq!(p[0], p[0].round());
        assert_eq!(p[1], p[1].round());
    }
    assert_eq!(g.components(), 1);
    let rep = validate_graph(&g);
    assert!(rep.verdict, "{rep:?}");
    assert_eq!(rep.separation.witness, 1.0);
    assert!((rep.edge_range.witness - 2f64.sqrt()).abs() < 1e-15);
}

#[test]
fn jittered_lattice_passes_validation() {
    let g = generate_graph(&GraphParams::default(), &Window::cube(2, 0.0, 30.0)).unwrap();
    let rep = validate_graph(&g);
    assert!(rep.verdict, "{rep:#?}");
    assert!(rep.separation.witness >= 0.5);
    assert!(rep.covering.witness <= 1.0);
    assert!(rep.general_position.witness >= crate::geometry::delaunay::TAU_GP);
}

#[test]
fn equal_seeds_give_identical_graphs() {
    let p = GraphParams { seed: 77, ..GraphParams::default() };
    let w = Window::cube(2, 0.0, 28.0);
    let a = generate_graph(&p, &w).unwrap();
    let b = generate_graph(&p, &w).unwrap();
    assert_eq!(a.len(), b.len());
    for (x, y) in a.positions.iter().zip(&b.positions) {
        for c in 0..3 {
            assert_eq!(x[c].to_bits(), y[c].to_bits());
        }
    }
    assert_eq!(a.edges, b.edges);
    assert_eq!(a.simplices, b.simplices);
    let c = generate_graph(&GraphParams { seed: 78, ..p }, &w).unwrap();
    assert_ne!(a.positions[0][0].to_bits(), c.positions[0][0].to_bits());
}

#[test]
fn window_and_params_are_checked() {
    let err = generate_graph(&GraphParams::default(), &Window::cube(2, 0.0, 20.0)).unwrap_err();
    assert!(matches!(err, Error::WindowTooSmall { .. }));
    let bad = GraphParams { interaction_range: 5.0, ..GraphParams::default() };
    assert!(matches!(bad.check(), Err(Error::InvalidParams(_))));
    let bad = lattice_params(0.3);
    assert!(matches!(bad.check(), Err(Error::InvalidParams(_))));
    let bad = GraphParams { volumetric_fraction: 0.0, ..GraphParams::default() };
    assert!(bad.check().is_err());
}

#[test]
fn jittered_square_has_two_triangles_on_the_delaunay_diagonal() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let pts: Vec<Vec<f64>> = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]
            .iter()
            .map(|p| vec![p[0] + 0.01 * (rng.random::<f64>() - 0.5), p[1] + 0.01 * (rng.random::<f64>() - 0.5)])
            .collect();
        let tri = delaunay(&pts, 2, DelaunayMode::Strict).unwrap();
        assert_eq!(tri.simplices.len(), 2);
        // oracle: the diagonal whose two triangles have empty circumcircles
        let empty = |a: usize, b: usize, c: usize, other: usize| {
            let (cen, r2) = circumsphere(&[&pts[a], &pts[b], &pts[c]], 2).unwrap();
            dist2(&cen[..2], &pts[other]) > r2
        };
        let diag02 = empty(0, 1, 2, 3) && empty(0, 2, 3, 1);
        let shared: Vec<usize> = tri.simplices[0].iter().filter(|v| tri.simplices[1].contains(v)).copied().collect();
        let mut shared = shared;
        shared.sort();
        assert_eq!(shared, if diag02 { vec![0, 2] } else { vec![1, 3] });
    }
}

#[test]
fn lattice_interior_cells_are_unit_squares() {
    let g = generate_graph(&lattice_params(0.0), &Window::cube(2, -0.5, 7.5)).unwrap();
    let mut interior = 0;
    for c in &g.cells {
        if !c.touches_window {
            interior += 1;
            assert!((c.volume - 1.0).abs() < 1e-12);
        }
    }
    assert_eq!(interior, 36);
    let total: f64 = g.cells.iter().map(|c| c.volume).sum();
    assert!((total - 64.0).abs() < 1e-9 * 64.0);
}

#[test]
fn voronoi_partitions_the_window() {
    let p = GraphParams { seed: 3, ..GraphParams::default() };
    let w = Window::cube(2, 0.0, 8.0);
    let pts = jittered_lattice(2, 0.2, &w, p.seed);
    let cells = voronoi(&pts, 2, &w).unwrap();
    let total: f64 = cells.iter().map(|c| c.volume).sum();
    assert!((total - 64.0).abs() <= 1e-9 * 64.0, "{total}");
    let w3 = Window::cube(3, 0.0, 5.0);
    let pts3 = jittered_lattice(3, 0.2, &w3, 4);
    let cells3 = voronoi(&pts3, 3, &w3).unwrap();
    let total3: f64 = cells3.iter().map(|c| c.volume).sum();
    assert!((total3 - 125.0).abs() <= 1e-9 * 125.0, "{total3}");
    let w1 = Window::cube(1, 0.0, 10.0);
    let pts1 = jittered_lattice(1, 0.2, &w1, 4);
    let total1: f64 = voronoi(&pts1, 1, &w1).unwrap().iter().map(|c| c.volume).sum();
    assert!((total1 - 10.0).abs() <= 1e-9 * 10.0);
}

#[test]
fn two_point_bisector_split() {
    // window [0,4) x [0,2); bisector of (1,0.5) and (2.5,1.5)
    let w = Window::new(vec![0.0, 0.0], vec![4.0, 2.0]).unwrap();
    let a = [1.0, 0.5, 0.0];
    let b = [2.5, 1.5, 0.0];
    let cells = voronoi(&[a, b], 2, &w).unwrap();
    // n.x <= c with n = b - a = (1.5, 1), c = (|b|^2 - |a|^2)/2 = 3.625
    // region of a: x <= (3.625 - y)/1.5; area = int_0^2 (3.625 - y)/1.5 dy = (7.25 - 2)/1.5
    let want = 5.25 / 1.5;
    assert!((cells[0].volume - want).abs() < 1e-12);
    assert!((cells[1].volume - (8.0 - want)).abs() < 1e-12);
}

#[test]
fn deleting_an_interior_lattice_vertex_keeps_covering() {
    let g = generate_graph(&lattice_params(0.0), &Window::cube(2, 0.0, 9.0)).unwrap();
    let victim = g.positions.iter().position(|p| p[0] == 4.0 && p[1] == 4.0).unwrap();
    let positions: Vec<Point> = g.positions.iter().enumerate().filter(|&(i, _)| i != victim).map(|(_, p)| *p).collect();
    let edges = delaunay_edges(&positions, 2, 7.0);
    let n = positions.len();
    let h = ExtendedGraph::from_parts(g.params.clone(), g.window.clone(), positions, vec![true; n], edges, None, true).unwrap();
    let rep = validate_graph(&h);
    // oracle: the probe at the deleted site is at distance 1 from its four neighbors
    assert!((rep.covering.witness - 1.0).abs() < 1e-12, "{}", rep.covering.witness);
    assert!(rep.covering.passed);
    let tight = ExtendedGraph {
        params: GraphParams { covering_radius: 0.9, ..h.params.clone() },
        ..h.clone()
    };
    assert!(!validate_graph(&tight).covering.passed);
}

#[test]
fn disconnecting_the_graph_fails_the_corridor_condition() {
    let mut g = generate_graph(&GraphParams::default(), &Window::cube(2, 0.0, 28.0)).unwrap();
    assert!(validate_graph(&g).corridor.passed);
    let positions = g.positions.clone();
    g.retain_edges(|a, b| (positions[a][0] < 14.0) == (positions[b][0] < 14.0));
    assert_eq!(g.components(), 2);
    let rep = validate_graph(&g);
    assert!(!rep.corridor.passed);
    assert!(!rep.verdict);
    assert!(rep.corridor.witness.is_infinite());
}

#[test]
fn interior_cells_match_brute_force() {
    let g = generate_graph(&GraphParams::default(), &Window::cube(2, 0.0, 30.0)).unwrap();
    let big_r = g.params.covering_radius;
    let domain = Window::cube(2, 2.0 * big_r, 30.0 - 2.0 * big_r);
    let got = interior_voronoi_cells(&g, &domain, 1.0);
    // oracle: clip every cell against every simplex
    let mut want = vec![];
    for vc in &g.volumetric_cells {
        let mut touching = vec![];
        let mut covered = 0.0;
        for (t, s) in g.simplices.iter().enumerate() {
            let pts: Vec<&[f64]> = s.iter().map(|&i| g.position(i)).collect();
            let mut p = vc.cell.polytope.clone();
            for k in 0..3 {
                let facet: Vec<&[f64]> = (0..3).filter(|&m| m != k).map(|m| pts[m]).collect();
                let (n, b) = crate::geometry::facet_halfspace(&facet, pts[k], 2);
                p = p.clip(&n[..2], b);
            }
            let v = p.volume();
            if v > 1e-12 * vc.cell.volume {
                touching.push(t);
                covered += v;
            }
        }
        let full = (covered - vc.cell.volume).abs() <= 1e-9 * vc.cell.volume;
        if !vc.cell.touches_window
            && full
            && !touching.is_empty()
            && touching.iter().all(|&t| g.simplices[t].iter().all(|&i| domain.contains(g.position(i))))
        {
            want.push(vc.vertex());
        }
    }
    assert!(!want.is_empty());
    assert_eq!(got, want);

    let far = Window::cube(2, 100.0, 120.0);
    assert!(interior_voronoi_cells(&g, &far, 1.0).is_empty());

    let shrunk = Window::cube(2, 2.0 * big_r + 1.3, 30.0 - 2.0 * big_r - 1.3);
    let smaller = interior_voronoi_cells(&g, &shrunk, 1.0);
    assert!(smaller.len() < got.len());
    assert!(smaller.iter().all(|v| got.contains(v)));

    // scaling: D = [0.1, 0.9)^2 at eps = 1/30 is [3, 27)^2
    let unit = Window::cube(2, 0.1, 0.9);
    let a = interior_voronoi_cells(&g, &unit, 1.0 / 30.0);
    let b = interior_voronoi_cells(&g, &Window::cube(2, 3.0, 27.0), 1.0);
    assert_eq!(a, b);
}

#[test]
fn overlaps_sum_to_simplex_volumes() {
    let g = generate_graph(&GraphParams::default(), &Window::cube(2, 0.0, 28.0)).unwrap();
    let mut per_simplex = vec![0.0; g.simplices.len()];
    for vc in &g.volumetric_cells {
        for &(t, v) in &vc.overlaps {
            per_simplex[t] += v;
        }
    }
    for (t, s) in g.simplices.iter().enumerate() {
        let pts: Vec<&[f64]> = s.iter().map(|&i| g.position(i)).collect();
        let vol = crate::geometry::simplex_volume(&pts, 2);
        assert!((per_simplex[t] - vol).abs() < 1e-9 * vol.max(1.0), "{t}: {} vs {vol}", per_simplex[t]);
    }
}

#[test]
fn delone_sandwich_and_degree_bound() {
    for seed in [1, 2, 3] {
        let p = GraphParams { seed, ..GraphParams::default() };
        let g = generate_graph(&p, &Window::cube(2, 0.0, 28.0)).unwrap();
        let (r, big_r) = (p.hardcore_radius, p.covering_radius);
        let mut checked = 0;
        // covering is only guaranteed on the window eroded by R
        let deep = |c: &&VoronoiCell| c.polytope.vertices().iter().all(|v| g.window.boundary_distance(&v[..2]) >= big_r);
        for c in g.cells.iter().filter(|c| !c.touches_window).filter(deep) {
            let x = g.position(c.site);
            assert!(c.polytope.inner_distance(x) >= r / 2.0 - 1e-12);
            assert!(c.outer_radius(x) <= big_r + 1e-12, "seed {seed} site {x:?} outer {} verts {:?}", c.outer_radius(x), c.polytope.vertices());
            assert!(c.volume >= unit_ball_volume(2) * (r / 2.0).powi(2));
            assert!(c.volume <= unit_ball_volume(2) * big_r.powi(2));
            checked += 1;
        }
        assert!(checked > 400);
        assert!((g.max_degree() as f64) <= p.degree_bound());
    }
}

#[test]
fn delaunay_voronoi_duality_on_volumetric_points() {
    let g = generate_graph(&GraphParams { seed: 9, ..GraphParams::default() }, &Window::cube(2, 0.0, 28.0)).unwrap();
    let mut simplex_pairs = std::collections::BTreeSet::new();
    for s in &g.simplices {
        for a in 0..3 {
            for b in a + 1..3 {
                simplex_pairs.insert((s[a].min(s[b]), s[a].max(s[b])));
            }
        }
    }
    let interior: Vec<&VolumetricCell> = g.volumetric_cells.iter().filter(|c| c.is_interior()).collect();
    let mut checked = 0;
    for a in &interior {
        for b in &interior {
            let (i, j) = (a.vertex(), b.vertex());
            if i >= j || dist(g.position(i), g.position(j)) > 3.0 {
                continue;
            }
            // shared face: vertices of cell i on the bisector plane of (i, j), spanning positive length
            let (x, y) = (g.position(i), g.position(j));
            let n = [y[0] - x[0], y[1] - x[1]];
            let c = 0.5 * (y[0] * y[0] + y[1] * y[1] - x[0] * x[0] - x[1] * x[1]);
            let on: Vec<Point> = a
                .cell
                .polytope
                .vertices()
                .into_iter()
                .filter(|v| (n[0] * v[0] + n[1] * v[1] - c).abs() < 1e-9)
                .collect();
            let face = on.len() >= 2 && dist(&on[0][..2], &on[1][..2]) > 1e-9;
            assert_eq!(face, simplex_pairs.contains(&(i, j)), "pair {i} {j}");
            checked += 1;
        }
    }
    assert!(checked > 1000);
}

#[test]
fn volumetric_decimation_repairs_covering() {
    let p = GraphParams { volumetric_fraction: 0.3, seed: 4, ..GraphParams::default() };
    let g = generate_graph(&p, &Window::cube(2, 0.0, 30.0)).unwrap();
    let flagged = g.volumetric.iter().filter(|&&f| f).count();
    assert!(flagged < g.len());
    assert!(flagged as f64 > 0.3 * g.len() as f64);
    let rep = validate_graph(&g);
    assert!(rep.covering.passed, "{:?}", rep.covering);
    assert!(rep.verdict, "{rep:#?}");
    assert_eq!(g.volumetric_cells.len(), flagged);
}

#[test]
fn hardcore_poisson_ensemble() {
    let p = GraphParams { ensemble: Ensemble::HardcorePoisson { intensity: 12.0 }, seed: 2, ..GraphParams::default() };
    let g = generate_graph(&p, &Window::cube(2, 0.0, 28.0)).unwrap();
    let rep = validate_graph(&g);
    assert!(rep.verdict, "{rep:#?}");
    let sparse = GraphParams { ensemble: Ensemble::HardcorePoisson { intensity: 0.3 }, ..p };
    let err = generate_graph(&sparse, &Window::cube(2, 0.0, 28.0)).unwrap_err();
    assert!(matches!(err, Error::CoveringRepairFailed { .. }), "{err:?}");
}

#[test]
fn three_dimensional_graph() {
    // covering gap of a jittered cube lattice is at most (1/2 + a) sqrt(3)
    let p = GraphParams {
        dim: 3,
        interaction_range: 6.5,
        ensemble: Ensemble::JitteredLattice { jitter: 0.05 },
        ..GraphParams::default()
    };
    let g = generate_graph(&p, &Window::cube(3, 0.0, 26.0)).unwrap();
    let rep = validate_graph_with(&g, 50, 1);
    assert!(rep.verdict, "{rep:#?}");
    let total: f64 = g.cells.iter().map(|c| c.volume).sum();
    assert!((total - 26f64.powi(3)).abs() < 1e-9 * 26f64.powi(3));
}

#[test]
fn json_round_trip_is_bit_faithful() {
    let g = generate_graph(&GraphParams { volumetric_fraction: 0.6, ..GraphParams::default() }, &Window::cube(2, 0.0, 28.0)).unwrap();
    let s = g.to_json().unwrap();
    let h = ExtendedGraph::from_json(&s).unwrap();
    assert_eq!(g.to_document(), h.to_document());
    assert_eq!(h.volumetric_cells.len(), g.volumetric_cells.len());
    let mut doc: serde_json::Value = serde_json::from_str(&s).unwrap();
    doc["version"] = serde_json::json!(99);
    assert!(matches!(ExtendedGraph::from_json(&doc.to_string()), Err(Error::Parse(_))));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.json");
    write_graph(&g, &path).unwrap();
    assert_eq!(read_graph(&path).unwrap().to_document(), g.to_document());
}


