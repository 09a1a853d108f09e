use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::graph::{interior_voronoi_cells, ExtendedGraph, Window};
use crate::testing::{chain, harmonic_lattice, jittered, two_points};
use crate::Error;

fn kg() -> PairPotential {
    PairPotential::kuhn_grun(KgMode::P10, 100.0, 0.1)
}

fn random_field(g: &ExtendedGraph, lambda: &[f64], noise: f64, seed: u64) -> Deformation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = Deformation::affine(g, lambda).unwrap();
    for v in u.values.iter_mut() {
        *v += noise * (2.0 * rng.random::<f64>() - 1.0);
    }
    u
}

#[test]
fn pair_energy_examples() {
    let q = PairPotential::isotropic(1.0, 2);
    assert_eq!(pair_energy(&q, &[0.0, 0.0], &[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
    assert_eq!(pair_energy(&kg(), &[0.0, 0.0], &[1.0, 0.0], &[0.0, 0.0]).unwrap(), 0.0);
    // |x - y| = sqrt(100) * 0.1 = 1, so N_xy = N° and the argument is 1 / sqrt(100)
    let got = pair_energy(&kg(), &[0.0, 0.0], &[0.6, 0.8], &[0.0, 1.0]).unwrap();
    let t: f64 = 0.1;
    let want = 1.5 * t.powi(2) + 0.45 * t.powi(4) + 9.0 / 350.0 * t.powi(6) + 81.0 / 7000.0 * t.powi(8)
        + 243.0 / 673750.0 * t.powi(10);
    assert!((got - want).abs() < 1e-16, "{got} vs {want}");
    assert!(matches!(pair_energy(&q, &[1.0, 1.0], &[1.0, 1.0], &[1.0, 0.0]), Err(Error::DegenerateEdge(..))));
}

#[test]
fn kuhn_grun_depends_on_norm_only() {
    let p = kg();
    let a = pair_energy(&p, &[0.0, 0.0], &[1.3, 0.2], &[3.0, 4.0]).unwrap();
    let b = pair_energy(&p, &[0.0, 0.0], &[1.3, 0.2], &[5.0, 0.0]).unwrap();
    assert!((a - b).abs() <= 1e-15 * a);
}

#[test]
fn single_edge_identity_energy() {
    let g = two_points();
    let u = Deformation::affine(&g, &[1.0, 0.0, 0.0, 1.0]).unwrap();
    let h = hamiltonian(&g, &g.window, 1.0, &u, &PairPotential::isotropic(1.0, 2), &VolumetricPotential::none())
        .unwrap();
    assert_eq!(h, 1.0);
}

#[test]
fn missing_values_and_dimension_checks() {
    let g = two_points();
    let mut u = Deformation::missing(2, 2);
    u.set(0, &[0.0, 0.0]);
    let q = PairPotential::isotropic(1.0, 2);
    assert_eq!(
        hamiltonian(&g, &g.window, 1.0, &u, &q, &VolumetricPotential::none()),
        Err(Error::MissingVertexValue(1))
    );
    let u1 = Deformation::affine(&g, &[1.0, 0.0]).unwrap();
    let vol = VolumetricPotential::convex_well(10.0, 2, 1.0);
    assert!(matches!(
        hamiltonian(&g, &g.window, 1.0, &u1, &PairPotential::isotropic(1.0, 1), &vol),
        Err(Error::DimensionMismatch(_))
    ));
}

#[test]
fn affine_cell_determinants() {
    let g = jittered(14.0, 3);
    let domain = Window::cube(2, 1.0, 13.0);
    let lambda = [1.3, 0.4, -0.2, 0.9];
    let asm = Assembly::new(&g, &domain, 1.0, 2, &kg(), &VolumetricPotential::convex_well(10.0, 2, 1.0)).unwrap();
    assert!(asm.cells.len() > 50);
    let u = Deformation::affine(&g, &lambda).unwrap();
    let dl = 1.3 * 0.9 + 0.4 * 0.2;
    for t in asm.cell_dets(&u.values) {
        assert!((t - dl).abs() < 1e-12, "{t}");
    }
    let total: f64 = asm.cells.iter().map(|c| c.volume).sum();
    let w = VolumetricPotential::convex_well(10.0, 2, 1.0).eval(dl);
    assert!((asm.volumetric_part(&u.values).unwrap() - w * total).abs() < 1e-10 * w * total);
}

/// Direct re-implementation of the volumetric sum with nalgebra gradients.
fn brute_volumetric(g: &ExtendedGraph, domain: &Window, u: &Deformation, vol: &VolumetricPotential) -> f64 {
    let mut h = 0.0;
    for v in interior_voronoi_cells(g, domain, 1.0) {
        let vc = g.volumetric_cell(v).unwrap();
        let mut avg = 0.0;
        for &(t, o) in &vc.overlaps {
            let s = &g.simplices[t];
            let x = DMatrix::from_fn(2, 2, |r, c| g.position(s[c + 1])[r] - g.position(s[0])[r]);
            let y = DMatrix::from_fn(2, 2, |r, c| u.value(s[c + 1])[r] - u.value(s[0])[r]);
            let f = y * x.try_inverse().unwrap();
            avg += f.determinant() * o / vc.cell.volume;
        }
        h += vc.cell.volume * vol.eval(avg);
    }
    h
}

#[test]
fn volumetric_sum_matches_brute_force() {
    let g = jittered(12.0, 5);
    let domain = Window::cube(2, 1.0, 11.0);
    let vol = VolumetricPotential::convex_well(10.0, 2, 1.0);
    let none = PairPotential::isotropic(1e-300, 2);
    let mut u = Deformation::affine(&g, &[1.0, 0.0, 0.0, 1.0]).unwrap();
    let asm = Assembly::new(&g, &domain, 1.0, 2, &none, &vol).unwrap();
    assert!(asm.volumetric_part(&u.values).unwrap() < 1e-20);
    let v = asm.cells[asm.cells.len() / 2].vertex;
    let p = u.value(v).to_vec();
    u.set(v, &[p[0] + 0.01, p[1] - 0.01]);
    let got = asm.volumetric_part(&u.values).unwrap();
    let want = brute_volumetric(&g, &domain, &u, &vol);
    assert!(got > 0.0);
    assert!((got - want).abs() < 1e-12 * want.max(1e-12), "{got} vs {want}");
}

#[test]
fn chain_gradient_by_hand() {
    let g = chain(2);
    let lam = 0.7;
    let mut u = Deformation::affine(&g, &[1.0]).unwrap();
    u.set(0, &[0.0]);
    u.set(2, &[2.0 * lam]);
    u.roles[0] = Role::Clamped;
    u.roles[2] = Role::Clamped;
    let q = PairPotential::isotropic(1.0, 1);
    for u1 in [0.3, lam, 2.0] {
        u.set(1, &[u1]);
        let gr = hamiltonian_gradient(&g, &g.window, 1.0, &u, &q, &VolumetricPotential::none()).unwrap();
        assert_eq!(gr.len(), 1);
        assert_eq!(gr[0].0, 1);
        let want = 2.0 * u1 + 2.0 * (u1 - 2.0 * lam);
        assert!((gr[0].1[0] - want).abs() < 1e-14);
    }
}

fn fd_error(asm: &Assembly, u: &[f64], h: f64) -> f64 {
    let mut grad = vec![0.0; u.len()];
    asm.energy_grad(u, &mut grad).unwrap();
    let mut w = u.to_vec();
    let mut worst = 0.0f64;
    let scale = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    for &v in &asm.vertices {
        for c in 0..asm.n {
            let k = v * asm.n + c;
            w[k] = u[k] + h;
            let fp = asm.energy(&w).unwrap();
            w[k] = u[k] - h;
            let fm = asm.energy(&w).unwrap();
            w[k] = u[k];
            worst = worst.max(((fp - fm) / (2.0 * h) - grad[k]).abs() / scale);
        }
    }
    worst
}

#[test]
fn gradient_matches_finite_differences() {
    let vol = VolumetricPotential::convex_well(10.0, 2, 1.0);
    for seed in 0..3 {
        let g = jittered(10.0, seed);
        let domain = Window::cube(2, 1.0, 9.0);
        let u = random_field(&g, &[1.2, 0.1, -0.1, 0.9], 0.15, seed);
        for pair in [kg(), PairPotential::kuhn_grun(KgMode::Exact, 100.0, 0.1), PairPotential::isotropic(0.5, 2)] {
            let asm = Assembly::new(&g, &domain, 1.0, 2, &pair, &vol).unwrap();
            let err = fd_error(&asm, &u.values, 1e-5);
            assert!(err < 1e-6, "seed {seed}: {err}");
        }
    }
}

#[test]
fn affine_state_is_critical_on_harmonic_lattice() {
    let g = harmonic_lattice(9);
    let theta: f64 = 0.4;
    let lambda = [theta.cos(), -theta.sin(), theta.sin(), theta.cos()];
    let u = Deformation::affine(&g, &lambda).unwrap();
    let vol = VolumetricPotential::convex_well(10.0, 2, 1.0);
    let asm = Assembly::new(&g, &g.window, 1.0, 2, &PairPotential::isotropic(1.0, 2), &vol).unwrap();
    assert!(!asm.cells.is_empty());
    let mut grad = vec![0.0; u.values.len()];
    asm.energy_grad(&u.values, &mut grad).unwrap();
    for &v in &asm.vertices {
        if g.neighbors(v).len() == 4 {
            assert!(grad[2 * v].hypot(grad[2 * v + 1]) <= 1e-10);
        }
    }
}

#[test]
fn translation_and_frame_invariance() {
    let g = jittered(12.0, 9);
    let domain = Window::cube(2, 1.0, 11.0);
    let vol = VolumetricPotential::convex_well(10.0, 2, 1.0);
    let asm = Assembly::new(&g, &domain, 1.0, 2, &kg(), &vol).unwrap();
    let u = random_field(&g, &[1.1, 0.0, 0.2, 0.8], 0.2, 1);
    let h0 = asm.energy(&u.values).unwrap();
    let shifted: Vec<f64> = u.values.iter().enumerate().map(|(k, v)| v + if k % 2 == 0 { 3.5 } else { -1.25 }).collect();
    assert!((asm.energy(&shifted).unwrap() - h0).abs() <= 1e-12 * h0);
    let (c, s) = (0.6f64, 0.8f64);
    let rotated: Vec<f64> = u
        .values
        .chunks(2)
        .flat_map(|p| [c * p[0] - s * p[1], s * p[0] + c * p[1]])
        .collect();
    assert!((asm.energy(&rotated).unwrap() - h0).abs() <= 1e-12 * h0);
}

#[test]
fn energy_is_monotone_in_domain() {
    let g = jittered(14.0, 2);
    let vol = VolumetricPotential::convex_well(10.0, 2, 1.0);
    let u = random_field(&g, &[1.0, 0.3, 0.0, 1.0], 0.3, 4);
    let mut last = f64::INFINITY;
    for k in 0..4 {
        let domain = Window::cube(2, 1.0 + k as f64, 13.0 - k as f64);
        let h = hamiltonian(&g, &domain, 1.0, &u, &kg(), &vol).unwrap();
        assert!(h <= last);
        last = h;
    }
}

#[test]
fn local_energy_accounts_for_every_term() {
    let g = jittered(10.0, 6);
    let domain = Window::cube(2, 1.0, 9.0);
    let vol = VolumetricPotential::convex_well(10.0, 2, 1.0);
    let asm = Assembly::new(&g, &domain, 1.0, 2, &kg(), &vol).unwrap();
    let mut u = random_field(&g, &[1.0, 0.0, 0.0, 1.0], 0.2, 3);
    for &v in asm.vertices.iter().step_by(7) {
        let (h0, l0) = (asm.energy(&u.values).unwrap(), asm.local_energy(&u.values, v).unwrap());
        let p = u.value(v).to_vec();
        u.set(v, &[p[0] + 0.05, p[1] - 0.03]);
        let (h1, l1) = (asm.energy(&u.values).unwrap(), asm.local_energy(&u.values, v).unwrap());
        assert!(((h1 - h0) - (l1 - l0)).abs() < 1e-12 * h0);
        u.set(v, &p);
    }
}

#[test]
fn norm_examples() {
    let g = jittered(10.0, 1);
    let region = Window::cube(2, 0.0, 10.0);
    let c = vec![2.5; 2 * g.len()];
    assert_eq!(discrete_norms(&g, &c, 2, 3.0, &region, 1.0).edge, 0.0);

    let e = two_points();
    let u = [0.0, 0.0, 2.0, 0.0];
    assert!((discrete_norms(&e, &u, 2, 2.0, &e.window, 1.0).edge - 2.0).abs() < 1e-15);

    let lambda = [1.2, 0.5, -0.3, 0.7];
    let a = Deformation::affine(&g, &lambda).unwrap();
    let p = 4.0;
    let sub = Window::cube(2, 2.0, 8.0);
    let got = discrete_norms(&g, &a.values, 2, p, &sub, 1.0).edge.powf(p);
    let mut want = 0.0;
    for &(i, j) in &g.edges {
        if sub.contains(g.position(i)) && sub.contains(g.position(j)) {
            let z: Vec<f64> = (0..2).map(|k| g.position(i)[k] - g.position(j)[k]).collect();
            let lz = apply_linear(&lambda, &z);
            want += (lz[0] * lz[0] + lz[1] * lz[1]).sqrt().powf(p);
        }
    }
    assert!((got - want).abs() < 1e-10 * want);
}

#[test]
fn growth_kuhn_grun() {
    let p = kg();
    let r = growth_check(&p, &VolumetricPotential::convex_well(10.0, 2, 1.0), 2, &GrowthGrid::for_potential(&p)).unwrap();
    assert_eq!(r.p, 10.0);
    assert_eq!(r.consistent, Some(true), "{r:?}");
    assert!(r.c2 > 0.0 && r.cp > 0.0 && r.c2_upper >= r.c2 && r.cp_upper >= r.cp);
    assert!(r.volumetric_constant.unwrap() > 0.0);
    assert!(r.lower_tightness > 0.0 && r.lower_tightness <= 1.0 && r.upper_tightness >= 1.0);
}

#[test]
fn growth_quadratic_and_sublinear() {
    let q = PairPotential::quadratic(vec![2.0, 0.5, 0.5, 1.0]);
    let r = growth_check(&q, &VolumetricPotential::none(), 2, &GrowthGrid::for_potential(&q)).unwrap();
    assert!(r.p2_only);
    assert_eq!(r.cp, 0.0);
    assert!(r.c2 > 0.0 && r.c2_upper > r.c2);
    let lin = PairPotential::new(PairKind::Polynomial { terms: vec![[1.0, 1.0]] });
    let e = growth_check(&lin, &VolumetricPotential::none(), 2, &GrowthGrid::for_potential(&lin));
    match e {
        Err(Error::SandwichViolated(m)) => assert!(m.starts_with("lower bound")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn deformation_file_round_trip() {
    let g = jittered(8.0, 1);
    let mut u = random_field(&g, &[1.0, 0.0, 0.0, 1.0], 0.3, 2);
    u.roles[3] = Role::Clamped;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("u.bin");
    u.write(&path).unwrap();
    assert_eq!(Deformation::read(&path).unwrap(), u);
}
