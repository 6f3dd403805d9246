use pigano_core::autodiff::{Tape, Tensor};
use pigano_core::data::{generate, GenConfig, Problem, Sample};
use pigano_core::models::{Architecture, Fusion, GeoInput, ModelInput, ModelKind, ModelState, ALL_POOLS};
use pigano_core::physics::{points_tensor, predict_points, sample_loss, Physics};
use pigano_core::stochastic::{stream_rng, uniform};
use proptest::prelude::*;
use rand::seq::SliceRandom;

fn small(kind: ModelKind, problem: Problem) -> Architecture {
    Architecture {
        width: 8,
        ..Architecture::new(kind, problem)
    }
}

fn toy(problem: Problem, seed: u64) -> Vec<Sample> {
    let mut cfg = GenConfig::new(problem, 5, seed);
    cfg.interior = 40;
    cfg.boundary = match problem {
        Problem::Darcy => vec![20],
        Problem::Plate => vec![12, 6, 6, 16],
    };
    cfg.eval_points = 0;
    generate(&cfg).unwrap()
}

fn random_rows(seed: u64, rows: usize, cols: usize) -> Tensor {
    let mut rng = stream_rng(seed, 9);
    Tensor::matrix(rows, cols, (0..rows * cols).map(|_| uniform(&mut rng, -1.0, 1.0)).collect()).unwrap()
}

#[test]
fn dcon_ignores_geometry_but_gano_does_not() {
    let samples = toy(Problem::Darcy, 4);
    let (a, b) = (&samples[0], &samples[1]);
    assert_ne!(a.domain.parametric(), b.domain.parametric());
    let x = random_rows(1, 6, 2);
    for seed in 0..100 {
        let dcon = ModelState::init(small(ModelKind::Dcon, Problem::Darcy), seed).unwrap();
        let gano = ModelState::init(small(ModelKind::Gano, Problem::Darcy), seed).unwrap();

        // Same coordinates and parameter embedding, different domains.
        let branch = ModelInput::build(dcon.arch(), a).unwrap().branch;
        let outputs: Vec<Vec<f64>> = [a, b]
            .iter()
            .map(|_| {
                let mut tape = Tape::new();
                let m = dcon.bind(&mut tape);
                let bvar = m.encode_parameters(&mut tape, &branch).unwrap();
                let xv = tape.constant(x.clone());
                let u = m.dcon_forward(&mut tape, xv, bvar, None).unwrap();
                tape.value(u).data().to_vec()
            })
            .collect();
        assert_eq!(outputs[0], outputs[1]);

        let geo: Vec<Vec<f64>> = [a, b]
            .iter()
            .map(|s| {
                let input = ModelInput::build(gano.arch(), s).unwrap();
                let mut tape = Tape::new();
                let m = gano.bind(&mut tape);
                let bvar = m.encode_parameters(&mut tape, &branch).unwrap();
                let g = m.encode_geometry(&mut tape, input.geometry.as_ref().unwrap()).unwrap();
                let xv = tape.constant(x.clone());
                let u = m.dcon_forward(&mut tape, xv, bvar, Some(g)).unwrap();
                tape.value(u).data().to_vec()
            })
            .collect();
        let gap = geo[0].iter().zip(&geo[1]).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(gap > 1e-12, "seed {seed}: gap {gap:e}");
    }
}

#[test]
fn every_option_runs_end_to_end() {
    for problem in [Problem::Darcy, Problem::Plate] {
        let samples = toy(problem, 2);
        for pooling in ALL_POOLS {
            for fusion in Fusion::ALL {
                for geo_input in GeoInput::ALL {
                    let arch = Architecture {
                        pooling,
                        fusion: *fusion,
                        geo_input: *geo_input,
                        ..small(ModelKind::Gano, problem)
                    };
                    let state = ModelState::init(arch, 0).unwrap();
                    for s in &samples {
                        let mut tape = Tape::new();
                        let m = state.bind(&mut tape);
                        let rows: Vec<usize> = (0..10).collect();
                        let parts = sample_loss(&mut tape, &m, s, &rows, &Physics::default()).unwrap();
                        let loss = tape.value(parts.total).item().unwrap();
                        assert!(loss.is_finite());
                        tape.grad(parts.total, m.param_vars()).unwrap();
                    }
                }
            }
        }
    }
}

#[test]
fn baselines_run_end_to_end() {
    for problem in [Problem::Darcy, Problem::Plate] {
        let samples = toy(problem, 3);
        let rows = samples[0].problem.loaded_groups().iter().map(|g| samples[0].group(g).unwrap().points.len()).sum();
        for kind in ModelKind::ALL {
            let arch = Architecture {
                branch_rows: rows,
                ..small(*kind, problem)
            };
            let state = ModelState::init(arch, 1).unwrap();
            for s in &samples {
                let mut tape = Tape::new();
                let m = state.bind(&mut tape);
                let parts = sample_loss(&mut tape, &m, s, &[0, 3, 5], &Physics::default()).unwrap();
                assert!(tape.value(parts.total).item().unwrap().is_finite(), "{kind}");
                let out = predict_points(&state, s, &s.interior[..4]).unwrap();
                assert_eq!(out.shape(), &[4, problem.out_dim()]);
            }
        }
    }
}

#[test]
fn pointnet_prediction_on_cloud_matches_query_decoding() {
    let samples = toy(Problem::Darcy, 5);
    let state = ModelState::init(small(ModelKind::PointNet, Problem::Darcy), 2).unwrap();
    let s = &samples[0];
    let cloud = pigano_core::models::cloud_points(s);
    let mut tape = Tape::new();
    let m = state.bind(&mut tape);
    let x = tape.constant(points_tensor(&cloud));
    let u = m.pointnet_forward(&mut tape, x, None).unwrap();
    let direct = tape.value(u).clone();
    let queried = predict_points(&state, s, &cloud[..5]).unwrap();
    for r in 0..5 {
        assert!((direct.get(r, 0) - queried.get(r, 0)).abs() < 1e-14);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn encoders_are_permutation_invariant(seed in 0u64..1000, pool in 0usize..3, n in 2usize..30) {
        let arch = Architecture { pooling: ALL_POOLS[pool], ..small(ModelKind::Gano, Problem::Darcy) };
        let state = ModelState::init(arch, seed).unwrap();
        let branch = random_rows(seed, n, 3);
        let geo = random_rows(seed + 1, n, 2);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut stream_rng(seed, 3));
        let encode = |b: &Tensor, g: &Tensor| {
            let mut tape = Tape::new();
            let m = state.bind(&mut tape);
            let bv = m.encode_parameters(&mut tape, b).unwrap();
            let gv = m.encode_geometry(&mut tape, g).unwrap();
            (tape.value(bv).clone(), tape.value(gv).clone())
        };
        let (b0, g0) = encode(&branch, &geo);
        let (b1, g1) = encode(&branch.select_rows(&order).unwrap(), &geo.select_rows(&order).unwrap());
        prop_assert_eq!(b0.data(), b1.data());
        prop_assert_eq!(g0.data(), g1.data());
    }

    #[test]
    fn checkpoint_names_round_trip(seed in 0u64..1000) {
        let state = ModelState::init(small(ModelKind::Gano, Problem::Plate), seed).unwrap();
        let named: Vec<(String, Tensor)> = state.named().map(|(n, t)| (n.to_string(), t.clone())).collect();
        let back = ModelState::from_named(state.arch().clone(), named).unwrap();
        prop_assert_eq!(back.params(), state.params());
    }
}
