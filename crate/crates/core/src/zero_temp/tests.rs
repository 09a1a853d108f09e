use std::sync::Arc;

use super::*;
use crate::energy::{KgMode, VolumetricKind};
use crate::graph::{generate_graph, GraphParams};
use crate::testing::{chain, harmonic_lattice};

fn kg() -> PairPotential {
    PairPotential::kuhn_grun(KgMode::P10, 100.0, 0.1)
}

fn padded(side: f64, seed: u64) -> ExtendedGraph {
    generate_graph(&GraphParams { seed, ..GraphParams::default() }, &Window::cube(2, -8.0, side + 8.0)).unwrap()
}

fn well() -> VolumetricPotential {
    // (t - 1)^2 with no extra penalty for inverted cells
    VolumetricPotential { kind: VolumetricKind::ConvexWell, c_neg: 0.0, exponent: 1.0, weight: 1.0 }
}

fn quick() -> SolverParams {
    SolverParams { restarts: 2, ..Default::default() }
}

#[test]
fn chain_minimizer_is_linear() {
    let m = 10;
    let g = chain(m);
    let lam = 0.7;
    let region = Window::new(vec![0.0], vec![m as f64 + 1e-7]).unwrap();
    let p = CellProblem::on_region(
        &g,
        region,
        Datum::linear(vec![lam]),
        PairPotential::isotropic(1.0, 1),
        VolumetricPotential::none(),
    )
    .unwrap()
    .with_band(1e-6);
    let mut start = p.affine_state();
    // the solver starts from the datum; check it also recovers from a perturbed start
    let r = minimize_cell(&p, &SolverParams { sigma_init: 0.5, ..Default::default() }).unwrap();
    assert!((r.energy - m as f64 * lam * lam).abs() < 1e-12, "{r:?}");
    assert!((r.density - lam * lam).abs() < 1e-7);
    assert!(r.restart_spread < 1e-12);
    for i in 0..=m {
        assert!((r.deformation.value(i)[0] - lam * i as f64).abs() < 1e-8);
    }
    assert_eq!(r.free_dofs, m - 1);
    start.values[0] = 1.0;
    assert!(start.check_roles().is_err());
}

#[test]
fn zero_datum_gives_zero_energy() {
    let g = padded(16.0, 1);
    let region = Window::cube(2, 0.0, 16.0);
    let p = CellProblem::on_region(&g, region, Datum::linear(vec![0.0; 4]), kg(), VolumetricPotential::none()).unwrap();
    let r = minimize_cell(&p, &quick()).unwrap();
    assert_eq!(r.energy, 0.0);
    assert_eq!(r.density, 0.0);
}

#[test]
fn minimum_below_affine_competitor() {
    let g = padded(20.0, 2);
    let p = CellProblem::on_region(&g, Window::cube(2, 0.0, 20.0), Datum::linear(vec![1.0, 0.0, 0.0, 1.0]), kg(), well())
        .unwrap();
    let asm = p.assembly().unwrap();
    let affine = p.affine_state();
    // at the identity every determinant is 1, so only chains contribute
    assert!(asm.volumetric_part(&affine.values).unwrap().abs() < 1e-20);
    let pair_only: f64 = asm
        .edges
        .iter()
        .map(|e| {
            let xi: Vec<f64> = (0..2).map(|c| affine.values[e.i * 2 + c] - affine.values[e.j * 2 + c]).collect();
            kg().eval(&e.term, &xi).unwrap()
        })
        .sum();
    let r = minimize_cell(&p, &quick()).unwrap();
    assert!((r.affine_energy - pair_only).abs() < 1e-12 * pair_only);
    assert!(r.energy <= r.affine_energy);
    assert!(r.energy < 0.9999 * r.affine_energy, "chains should relax: {} vs {}", r.energy, r.affine_energy);
    assert!(r.grad_norm <= r.tol_grad);
}

#[test]
fn shift_invariance() {
    let g = padded(16.0, 3);
    let lam = vec![1.2, 0.1, -0.2, 0.9];
    let base = CellProblem::on_region(&g, Window::cube(2, 0.0, 16.0), Datum::linear(lam.clone()), kg(), well()).unwrap();
    let shifted = CellProblem { datum: Datum::linear(lam).with_offset(vec![3.7, -1.2]), ..base.clone() };
    let a = minimize_cell(&base, &quick()).unwrap();
    let b = minimize_cell(&shifted, &quick()).unwrap();
    assert!((a.energy - b.energy).abs() < 1e-9 * a.energy, "{} vs {}", a.energy, b.energy);
}

#[test]
fn soft_boundary_relaxes_and_converges() {
    let lam = vec![1.3, 0.0, 0.0, 0.8];
    let mut gaps = vec![];
    for side in [16.0, 32.0] {
        let g = padded(side, 4);
        let p = CellProblem::on_region(&g, Window::cube(2, 0.0, side), Datum::linear(lam.clone()), kg(), well()).unwrap();
        let c = minimize_cell(&p, &quick()).unwrap();
        let s = minimize_cell(&p.clone().with_mode(BoundaryMode::Soft), &quick()).unwrap();
        assert!(s.energy <= c.energy + 1e-12);
        s.deformation.check_roles().unwrap();
        gaps.push(c.density - s.density);
    }
    assert!(gaps[1] <= gaps[0], "{gaps:?}");
}

fn lattice_setup(origin: f64) -> CellSetup {
    let g = Arc::new(harmonic_lattice(80));
    let mut s = CellSetup::new(GraphSource::Fixed(g), PairPotential::isotropic(1.0, 2), VolumetricPotential::none());
    s.origin = origin;
    s.solver = quick();
    s
}

#[test]
fn extrapolation_matches_periodic_value() {
    let setup = lattice_setup(8.0);
    let lam = [1.1, 0.3, -0.4, 0.7];
    // per unit cell: one edge along each axis
    let periodic = (lam[0] * lam[0] + lam[2] * lam[2]) + (lam[1] * lam[1] + lam[3] * lam[3]);
    let est = estimate_w_inf(&setup, &lam, &[8.0, 16.0, 32.0], &[0]).unwrap();
    assert!((est.extrapolated - periodic).abs() < 1e-10 * periodic, "{} vs {periodic}", est.extrapolated);
    assert!(est.residual < 1e-10);
    let wide = estimate_w_inf(&setup, &lam, &[16.0, 32.0, 64.0], &[0]).unwrap();
    assert!(wide.cauchy_gap < est.cauchy_gap);
    let zero = estimate_w_inf(&setup, &[0.0; 4], &[8.0, 16.0, 32.0], &[0]).unwrap();
    assert!(zero.extrapolated.abs() < 1e-14);
    assert!(matches!(estimate_w_inf(&setup, &lam, &[8.0, 16.0], &[0]), Err(Error::GridTooSmall(_))));
}

#[test]
fn generated_graphs_across_seeds() {
    let mut setup = CellSetup::new(GraphSource::generate(GraphParams::default()), kg(), VolumetricPotential::none());
    setup.solver = quick();
    let est = estimate_w_inf(&setup, &[1.0, 0.0, 0.0, 1.0], &[16.0, 20.0, 24.0], &[1, 2]).unwrap();
    for p in &est.points {
        assert_eq!(p.densities.len(), 2);
        assert!(p.stderr > 0.0);
        assert!(p.restart_spread < 1e-6);
    }
    // same seeds, same answer
    let again = estimate_w_inf(&setup, &[1.0, 0.0, 0.0, 1.0], &[16.0, 20.0, 24.0], &[1, 2]).unwrap();
    assert_eq!(est, again);
}

#[test]
fn subadditivity_on_quadratic_lattice() {
    let setup = lattice_setup(0.0);
    let g = match &setup.source {
        GraphSource::Fixed(g) => g.clone(),
        _ => unreachable!(),
    };
    let whole = Window::cube(2, 10.0, 42.0);
    let half = |a: f64, b: f64, c: f64, d: f64| Window::new(vec![a, c], vec![b, d]).unwrap();
    let quads = [
        half(10.0, 26.0, 10.0, 26.0),
        half(26.0, 42.0, 10.0, 26.0),
        half(10.0, 26.0, 26.0, 42.0),
        half(26.0, 42.0, 26.0, 42.0),
    ];
    let lam = [1.2, 0.4, 0.0, 0.9];
    let r = subadditivity_check(&g, &lam, &whole, &quads, &setup).unwrap();
    assert!((r.surface - 128.0).abs() < 1e-12);
    assert!(r.slack >= -1e-8, "{r:?}");
    assert!(r.sigma_whole <= r.stitched_energy + 1e-9);
    // the glued competitor is exactly the parts plus the interface energy
    let parts: f64 = r.sigma_parts.iter().sum();
    assert!((r.stitched_energy - parts - r.c_lambda * r.surface).abs() < 1e-9 * r.stitched_energy);

    let zero = subadditivity_check(&g, &[0.0; 4], &whole, &quads[..2].iter().cloned().chain([half(10.0, 42.0, 26.0, 42.0)]).collect::<Vec<_>>(), &setup).unwrap();
    assert_eq!(zero.sigma_whole, 0.0);
    assert!(zero.slack >= 0.0);

    let overlapping = [half(10.0, 30.0, 10.0, 42.0), half(26.0, 42.0, 10.0, 42.0)];
    assert!(matches!(subadditivity_check(&g, &lam, &whole, &overlapping, &setup), Err(Error::PartitionInvalid(_))));
}

#[test]
fn rank_one_on_quadratic_is_exactly_quadratic() {
    let mut setup = CellSetup::new(
        GraphSource::generate(GraphParams::default()),
        PairPotential::isotropic(1.0, 2),
        VolumetricPotential::none(),
    );
    setup.solver = quick();
    let est = |m: &[f64]| -> Result<Vec<f64>> { Ok(vec![setup.minimize(m, 16.0, 5)?.density]) };
    let ts = [-0.4, -0.2, 0.0, 0.2, 0.4];
    let r = rank_one_probe(&[1.0, 0.0, 0.0, 1.0], &[1.0, 0.0], &[0.0, 1.0], &ts, 1e-8, est).unwrap();
    let consecutive: Vec<&RankOneDefect> = r.defects.iter().filter(|d| (d.t[2] - d.t[0] - 0.4).abs() < 1e-12).collect();
    assert_eq!(consecutive.len(), 3);
    for d in &consecutive {
        assert!(d.defect <= 1e-8);
        assert!((d.defect - consecutive[0].defect).abs() < 1e-9);
        assert!(d.within_tolerance);
    }
}

#[test]
fn rank_one_symmetric_for_kuhn_grun() {
    let mut setup = CellSetup::new(GraphSource::generate(GraphParams::default()), kg(), VolumetricPotential::none());
    setup.solver = quick();
    let est = |m: &[f64]| -> Result<Vec<f64>> { Ok(vec![setup.minimize(m, 16.0, 6)?.density]) };
    let r = rank_one_probe(&[0.0; 4], &[1.0, 0.0], &[0.0, 1.0], &[-1.0, 0.0, 1.0], 0.0, est).unwrap();
    assert!((r.g[0] - r.g[2]).abs() < 1e-9 * r.g[0]);
    assert!(r.defects[0].defect < 0.0);
    assert!(matches!(
        rank_one_probe(&[0.0; 4], &[0.0, 0.0], &[0.0, 1.0], &[0.0], 0.0, |_| Ok(vec![0.0])),
        Err(Error::InvalidParams(_))
    ));
}

#[test]
fn sandwich_constants() {
    let pts: Vec<(f64, f64)> = (1..=6).map(|k| (k as f64, 0.3 * (k as f64).powi(10) + 2.0)).collect();
    let f = growth_sandwich(&pts, 10.0).unwrap();
    assert!(f.holds && (f.c - 0.3).abs() < 1e-6);
}
