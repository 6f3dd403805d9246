use pigano_core::autodiff::{Tape, Tensor};
use pigano_core::data::{generate, GenConfig, Problem};
use pigano_core::models::{Architecture, ModelKind, ModelState};
use pigano_core::oracle::{FieldKind, ManufacturedField};
use pigano_core::physics::{darcy_residual, plate_residuals, points_tensor, sample_loss, Material, Physics};
use pigano_core::geometry::Point;
use pigano_core::stochastic::{stream_rng, uniform};
use proptest::prelude::*;

fn cloud(seed: u64, n: usize) -> Vec<Point> {
    let mut rng = stream_rng(seed, 0);
    (0..n).map(|_| Point::new(uniform(&mut rng, -10.0, 10.0), uniform(&mut rng, -10.0, 10.0))).collect()
}

#[test]
fn darcy_analytic_field_has_zero_residual() {
    // p = -10 (x² + y²) / 4 solves Δp + 10 = 0.
    let mut tape = Tape::new();
    let x = tape.input(points_tensor(&cloud(1, 20)));
    let xs = tape.column(x, 0).unwrap();
    let ys = tape.column(x, 1).unwrap();
    let xx = tape.square(xs).unwrap();
    let yy = tape.square(ys).unwrap();
    let r2 = tape.add(xx, yy).unwrap();
    let p = tape.scale(r2, -2.5).unwrap();
    let r = darcy_residual(&mut tape, p, x).unwrap();
    assert!(tape.value(r).data().iter().all(|v| v.abs() < 1e-12));
}

#[test]
fn zero_model_has_unit_source_residual() {
    let mut cfg = GenConfig::new(Problem::Darcy, 3, 0);
    cfg.eval_points = 0;
    let samples = generate(&cfg).unwrap();
    let arch = Architecture { width: 8, ..Architecture::new(ModelKind::Gano, Problem::Darcy) };
    let state = ModelState::init(arch, 0).unwrap().zeroed();
    let rows: Vec<usize> = (0..50).collect();
    for s in &samples {
        let mut tape = Tape::new();
        let m = state.bind(&mut tape);
        let parts = sample_loss(&mut tape, &m, s, &rows, &Physics::default()).unwrap();
        let pde = tape.value(parts.term("pde").unwrap()).item().unwrap();
        assert_eq!(pde, 100.0);
        let g = s.bc_of("boundary").unwrap();
        let bc = g.iter().map(|v| v * v).sum::<f64>() / g.len() as f64;
        let bc_term = tape.value(parts.term("bc").unwrap()).item().unwrap();
        assert!((bc_term - bc).abs() < 1e-12 * bc.max(1.0));
        let total = tape.value(parts.total).item().unwrap();
        assert!((total - (100.0 + 500.0 * bc)).abs() < 1e-9 * total);
    }
}

fn manufactured_residuals(field: &ManufacturedField, pts: &[Point]) -> (Vec<f64>, Vec<f64>) {
    let mut tape = Tape::new();
    let x = tape.input(points_tensor(pts));
    let uv = field.on_tape(&mut tape, x).unwrap();
    let (ru, rv) = plate_residuals(&mut tape, uv, x, field.material).unwrap();
    (tape.value(ru).data().to_vec(), tape.value(rv).data().to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn linear_fields_have_zero_plate_residual(coef in prop::array::uniform6(-5.0f64..5.0), seed in 0u64..100) {
        let field = ManufacturedField::new(FieldKind::Linear, coef, Material::default());
        let (ru, rv) = manufactured_residuals(&field, &cloud(seed, 12));
        prop_assert!(ru.iter().chain(&rv).all(|v| v.abs() <= 1e-10));
    }

    #[test]
    fn quadratic_fields_match_hand_residual(
        coef in prop::array::uniform6(-5.0f64..5.0),
        e in 0.5f64..3.0,
        mu in 0.0f64..0.45,
        seed in 0u64..100,
    ) {
        let material = Material { e, mu };
        let field = ManufacturedField::new(FieldKind::Quadratic, coef, material);
        let (ru, rv) = manufactured_residuals(&field, &cloud(seed, 12));
        let (eu, ev) = field.residual();
        prop_assert!(ru.iter().all(|v| (v - eu).abs() <= 1e-10));
        prop_assert!(rv.iter().all(|v| (v - ev).abs() <= 1e-10));
    }
}

#[test]
fn quadratic_residual_known_values() {
    // u = x², v = 0 with E = 1, mu = 0.3: r_u = 2 / 0.91, r_v = 0.
    let field = ManufacturedField::new(FieldKind::Quadratic, [1.0, 0.0, 0.0, 0.0, 0.0, 0.0], Material::default());
    let (eu, ev) = field.residual();
    assert!((eu - 2.0 / 0.91).abs() < 1e-14);
    assert_eq!(ev, 0.0);
    // u = xy gives only the mixed term in r_v: (1 + mu) / 2 * k.
    let field = ManufacturedField::new(FieldKind::Quadratic, [0.0, 1.0, 0.0, 0.0, 0.0, 0.0], Material::default());
    let (eu, ev) = field.residual();
    assert_eq!(eu, 0.0);
    assert!((ev - 0.65 / 0.91).abs() < 1e-14);
}

#[test]
fn invalid_material_is_rejected() {
    let mut tape = Tape::new();
    let x = tape.input(Tensor::zeros(2, 2));
    let uv = tape.scale(x, 1.0).unwrap();
    assert!(plate_residuals(&mut tape, uv, x, Material { e: 1.0, mu: 1.0 }).is_err());
}
