use proptest::prelude::*;

use polyhom::energy::{hamiltonian, Deformation, KgMode, PairPotential, VolumetricPotential};
use polyhom::finite_temp::{gaussian_free_energy, metropolis_accept, QuadraticModel};
use polyhom::graph::{axis_lattice, generate_graph, ExtendedGraph, GraphParams, Window};
use polyhom::studies::{config_hash, fit_scaling, PartitionSpec, ScalingModel, StudyConfig};
use polyhom::zero_temp::{CellProblem, Datum};

fn small_graph(seed: u64) -> ExtendedGraph {
    generate_graph(&GraphParams { seed, ..Default::default() }, &Window::cube(2, 0.0, 28.0)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn power_log_fit_recovers_coefficient(c in 0.01f64..100.0) {
        let x = [std::f64::consts::E, 10.0, 100.0, 1000.0, 1e4];
        let y: Vec<f64> = x.iter().map(|b| c * b.ln() / b).collect();
        let f = fit_scaling(&x, &y, None, ScalingModel::PowerLog, 3.0).unwrap();
        prop_assert!((f.coef[0] - c).abs() <= 1e-10 * c);
        prop_assert!(f.verdict);
    }

    #[test]
    fn inverse_l_fit_recovers_coefficients(a in -10.0f64..10.0, b in -50.0f64..50.0) {
        let x = [8.0, 16.0, 32.0, 64.0, 128.0];
        let y: Vec<f64> = x.iter().map(|l| a + b / l).collect();
        let f = fit_scaling(&x, &y, None, ScalingModel::InverseL, 3.0).unwrap();
        prop_assert!((f.coef[0] - a).abs() <= 1e-10 * (1.0 + a.abs()));
        prop_assert!((f.coef[1] - b).abs() <= 1e-10 * (1.0 + b.abs()) * 128.0);
    }

    #[test]
    fn partitions_tile_the_box(rows in 1usize..5, cols in 1usize..5, side in 4.0f64..40.0) {
        let p: PartitionSpec = serde_json::from_str(&format!("\"{rows}x{cols}\"")).unwrap();
        let whole = Window::cube(2, 0.0, side);
        let boxes = p.boxes(&whole);
        prop_assert_eq!(boxes.len(), rows * cols);
        let total: f64 = boxes.iter().map(|b| b.volume()).sum();
        prop_assert!((total - whole.volume()).abs() <= 1e-12 * whole.volume());
        prop_assert!(boxes.iter().all(|b| b.is_subset_of(&whole)));
    }

    #[test]
    fn metropolis_always_accepts_downhill(delta in -1e3f64..0.0, beta in 0.01f64..1e3, u in 0.0f64..1.0) {
        prop_assert!(metropolis_accept(delta, beta, u));
    }

    #[test]
    fn metropolis_threshold_is_the_boltzmann_factor(delta in 0.0f64..10.0, beta in 0.1f64..10.0) {
        let p = (-beta * delta).exp();
        prop_assert!(metropolis_accept(delta, beta, 0.999 * p));
        prop_assert!(!metropolis_accept(delta, beta, (1.001 * p).min(1.0 - 1e-12)) || p >= 1.0 - 1e-9);
    }

    #[test]
    fn phantom_identity_for_random_lambda(l in prop::array::uniform4(-2.0f64..2.0), beta in 0.5f64..500.0) {
        let g = axis_lattice(&[6, 6]).unwrap();
        let problem = |lam: Vec<f64>| {
            CellProblem::on_region(&g, Window::cube(2, -0.5, 5.5), Datum::linear(lam), PairPotential::quadratic(vec![1.0, 0.3, 0.3, 0.7]), VolumetricPotential::none())
                .unwrap()
                .with_band(1.0)
        };
        let a = QuadraticModel::from_problem(&problem(l.to_vec())).unwrap();
        let z = QuadraticModel::from_problem(&problem(vec![0.0; 4])).unwrap();
        let lhs = gaussian_free_energy(&a, beta).unwrap().value - gaussian_free_energy(&z, beta).unwrap().value;
        let rhs = (a.h_min - z.h_min) / a.domain_volume;
        prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1e-12));
    }

    #[test]
    fn config_hash_ignores_output_only(seed in 0u64..1000, out in "[a-z]{1,8}") {
        let text = format!(r#"{{"kind":"phantom","graph":{{"lattice":{{"shape":[5,4]}}}},"pair":{{"kind":"quadratic","matrix":[1,0,0,1]}},"lambdas":[[1,0,0,1]],"windows":[4],"betas":[10],"seeds":[{seed}]}}"#);
        let mut c = StudyConfig::from_json(&text).unwrap();
        let h = config_hash(&c).unwrap();
        c.output = Some(out.into());
        prop_assert_eq!(config_hash(&c).unwrap(), h.clone());
        let back = StudyConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        prop_assert_eq!(&back, &c);
        c.seeds = vec![seed + 1];
        prop_assert_ne!(config_hash(&c).unwrap(), h);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn graph_json_round_trip_is_exact(seed in 0u64..10_000) {
        let g = small_graph(seed);
        let back = ExtendedGraph::from_json(&g.to_json().unwrap()).unwrap();
        prop_assert_eq!(back.positions, g.positions);
        prop_assert_eq!(back.edges, g.edges);
        prop_assert_eq!(back.volumetric, g.volumetric);
    }

    #[test]
    fn energy_is_frame_indifferent(seed in 0u64..100, theta in -3.1f64..3.1, shift in prop::array::uniform2(-5.0f64..5.0)) {
        let g = small_graph(seed);
        let domain = Window::cube(2, 8.0, 20.0);
        let lam = [1.1, 0.2, -0.1, 0.95];
        let u = Deformation::affine(&g, &lam).unwrap();
        let (c, s) = (theta.cos(), theta.sin());
        let mut v = u.clone();
        for k in 0..g.len() {
            let p = u.value(k);
            v.set(k, &[c * p[0] - s * p[1] + shift[0], s * p[0] + c * p[1] + shift[1]]);
        }
        let pair = PairPotential::kuhn_grun(KgMode::P10, 100.0, 0.1);
        let vol = VolumetricPotential::convex_well(10.0, 2, 1.0);
        let h0 = hamiltonian(&g, &domain, 1.0, &u, &pair, &vol).unwrap();
        let h1 = hamiltonian(&g, &domain, 1.0, &v, &pair, &vol).unwrap();
        prop_assert!((h0 - h1).abs() <= 1e-9 * h0.abs());
    }
}
