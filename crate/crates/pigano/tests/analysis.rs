use std::fs;

use pigano::embed::{embedding_distances, geometry_embedding, write_distances_csv};
use pigano::eval::{evaluate, evaluate_predictions, write_eval_csv, write_summary_json};
use pigano::exec::Threads;
use pigano::plot::{plot_file, render, Table};
use pigano_core::data::{generate_sample, GenConfig, Problem, Sample};
use pigano_core::models::{Architecture, ModelKind, ModelState};
use pigano_core::physics::Physics;
use pigano_core::training::Sequential;
use proptest::prelude::*;

fn test_samples(problem: Problem, n: usize) -> Vec<Sample> {
    let mut g = GenConfig::new(problem, 10, 4);
    g.interior = 40;
    g.boundary = g.boundary.iter().map(|_| 12).collect();
    g.eval_points = 10;
    g.wos.walks = 50;
    (10 - n..10).map(|i| generate_sample(&g, i).unwrap()).collect()
}

fn gano(problem: Problem) -> ModelState {
    let mut a = Architecture::new(ModelKind::Gano, problem);
    a.width = 10;
    ModelState::init(a, 2).unwrap()
}

#[test]
fn perfect_predictor_scores_zero() {
    let s = test_samples(Problem::Darcy, 2);
    let r = evaluate_predictions(&s, &Sequential, |s| Ok(s.reference.as_ref().unwrap().values.clone())).unwrap();
    assert!(r.rows.iter().all(|row| row.values == [0.0]));
    assert_eq!((r.summary.mean, r.summary.std), (0.0, 0.0));
}

#[test]
fn zero_predictor_scores_one() {
    let s = test_samples(Problem::Darcy, 2);
    let r = evaluate_predictions(&s, &Sequential, |s| Ok(vec![0.0; s.reference.as_ref().unwrap().values.len()])).unwrap();
    assert!(r.rows.iter().all(|row| (row.values[0] - 1.0).abs() < 1e-15));
    let zeroed = gano(Problem::Darcy).zeroed();
    let r = evaluate(&zeroed, &s, &Physics::default(), &Threads::new(2).unwrap()).unwrap();
    assert!(r.rows.iter().all(|row| (row.values[0] - 1.0).abs() < 1e-15));
}

#[test]
fn scaled_reference_scores_the_scale_error() {
    let s = test_samples(Problem::Darcy, 2);
    let r = evaluate_predictions(&s, &Sequential, |s| Ok(s.reference.as_ref().unwrap().values.iter().map(|v| 1.25 * v).collect())).unwrap();
    assert!(r.rows.iter().all(|row| (row.values[0] - 0.25).abs() < 1e-14));
}

#[test]
fn summary_matches_rows() {
    let s = test_samples(Problem::Darcy, 2);
    let r = evaluate(&gano(Problem::Darcy), &s, &Physics::default(), &Sequential).unwrap();
    let v: Vec<f64> = r.rows.iter().map(|x| x.values[0]).collect();
    let mean = (v[0] + v[1]) / 2.0;
    assert!((r.summary.mean - mean).abs() <= 1e-15 * mean.abs());
    assert!((r.summary.std - (v[0] - v[1]).abs() / 2.0).abs() <= 1e-12);
    let (best, worst) = if v[0] <= v[1] { (0, 1) } else { (1, 0) };
    assert_eq!((r.summary.best, r.summary.worst), (r.rows[best].id, r.rows[worst].id));
    assert_eq!(r.column_means(), vec![r.summary.mean]);
}

#[test]
fn missing_reference_is_an_error() {
    let mut s = test_samples(Problem::Darcy, 2);
    s[1].reference = None;
    let err = evaluate(&gano(Problem::Darcy), &s, &Physics::default(), &Sequential).unwrap_err();
    assert!(err.to_string().contains(&format!("sample {}", s[1].id)), "{err}");
}

#[test]
fn plate_report_has_every_term() {
    let s = test_samples(Problem::Plate, 2);
    let r = evaluate(&gano(Problem::Plate), &s, &Physics::default(), &Sequential).unwrap();
    assert_eq!(r.columns, ["total", "pde", "tb", "l", "r", "h"]);
    for row in &r.rows {
        let w = Physics::default().weights.plate;
        let sum: f64 = row.values[1..].iter().zip(w).map(|(v, w)| v * w).sum();
        assert!((sum - row.values[0]).abs() <= 1e-12 * row.values[0]);
    }
}

#[test]
fn model_and_data_problems_must_agree() {
    let s = test_samples(Problem::Plate, 1);
    assert!(evaluate(&gano(Problem::Darcy), &s, &Physics::default(), &Sequential).is_err());
}

#[test]
fn eval_csv_is_lossless() {
    let dir = tempfile::tempdir().unwrap();
    let s = test_samples(Problem::Plate, 2);
    let r = evaluate(&gano(Problem::Plate), &s, &Physics::default(), &Sequential).unwrap();
    let path = dir.path().join("eval.csv");
    write_eval_csv(&path, &r).unwrap();
    let t = Table::read(&path).unwrap();
    assert_eq!(t.header[0], "sample");
    assert_eq!(&t.header[1..], r.columns.as_slice());
    assert_eq!(t.rows.len(), r.rows.len() + 2);
    for (row, want) in t.rows.iter().zip(&r.rows) {
        assert_eq!(row[0], want.id.to_string());
        let got: Vec<f64> = row[1..].iter().map(|v| v.parse().unwrap()).collect();
        assert_eq!(got, want.values);
    }
    assert_eq!(t.rows[r.rows.len()][0], "mean");
    assert_eq!(t.rows[r.rows.len() + 1][0], "std");
    let json = dir.path().join("summary.json");
    write_summary_json(&json, &r.summary).unwrap();
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(json).unwrap()).unwrap();
    assert_eq!(v["mean"].as_f64().unwrap(), r.summary.mean);
    assert_eq!(v["metric"], "total");
}

#[test]
fn same_sets_give_same_distances() {
    let s = test_samples(Problem::Darcy, 4);
    let d = embedding_distances(&gano(Problem::Darcy), &s, &s, &Threads::new(2).unwrap()).unwrap();
    assert_eq!(d.a, d.b);
    assert_eq!(d.mean_a(), d.mean_b());
    assert!(d.a.iter().all(|p| p.1 > 0.0));
}

#[test]
fn identical_geometries_sit_on_the_centroid() {
    let s = test_samples(Problem::Plate, 1);
    let set = vec![s[0].clone(), s[0].clone(), s[0].clone()];
    let d = embedding_distances(&gano(Problem::Plate), &set, &set[..1], &Sequential).unwrap();
    assert!(d.a.iter().chain(&d.b).all(|p| p.1 < 1e-14), "{:?}", d.a);
}

#[test]
fn distance_is_euclidean_from_centroid() {
    let state = gano(Problem::Darcy);
    let s = test_samples(Problem::Darcy, 3);
    let e: Vec<Vec<f64>> = s.iter().map(|x| geometry_embedding(&state, x).unwrap()).collect();
    let d = embedding_distances(&state, &s[..2], &s[2..], &Sequential).unwrap();
    let c: Vec<f64> = e[0].iter().zip(&e[1]).map(|(a, b)| (a + b) / 2.0).collect();
    let want = e[2].iter().zip(&c).map(|(x, c)| (x - c).powi(2)).sum::<f64>().sqrt();
    assert!((d.b[0].1 - want).abs() < 1e-12);
    let half = e[0].iter().zip(&e[1]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() / 2.0;
    assert!((d.a[0].1 - half).abs() < 1e-12 && (d.a[1].1 - half).abs() < 1e-12);
}

#[test]
fn embedding_needs_gano_and_samples() {
    let s = test_samples(Problem::Darcy, 1);
    let mut a = Architecture::new(ModelKind::Dcon, Problem::Darcy);
    a.width = 8;
    assert!(geometry_embedding(&ModelState::init(a, 0).unwrap(), &s[0]).is_err());
    assert!(embedding_distances(&gano(Problem::Darcy), &[], &s, &Sequential).is_err());
}

#[test]
fn every_output_kind_plots() {
    let dir = tempfile::tempdir().unwrap();
    let s = test_samples(Problem::Darcy, 2);
    let d = embedding_distances(&gano(Problem::Darcy), &s, &s, &Sequential).unwrap();
    let dist = dir.path().join("distances.csv");
    write_distances_csv(&dist, &d).unwrap();
    let hist = dir.path().join("history.csv");
    fs::write(&hist, "epoch,train_loss,val_loss,wall_seconds\n1,5e2,6e2,0.1\n2,1e1,2e1,0.2\n3,1e-1,3e-1,0.3\n").unwrap();
    let abl = dir.path().join("ablation_pooling.csv");
    fs::write(&abl, "variant,rel_l2_mean,rel_l2_std,val_loss\navg,0.1,0.01,3\nmax,0.08,0.02,2\nmin,0.2,0.05,4\n").unwrap();
    let out = dir.path().join("plots");
    for input in [&dist, &hist, &abl] {
        let (svg, csv) = plot_file(input, &out).unwrap();
        let text = fs::read_to_string(&svg).unwrap();
        assert!(text.starts_with("<svg") && text.trim_end().ends_with("</svg>"));
        assert_eq!(Table::read(&csv).unwrap(), Table::read(input).unwrap());
        let stem = input.file_stem().unwrap().to_str().unwrap();
        assert_eq!(svg.file_name().unwrap().to_str().unwrap(), format!("{stem}_plot.svg"));
    }
}

#[test]
fn unplottable_tables_are_rejected() {
    let t = Table { header: vec!["a".into(), "b".into()], rows: vec![] };
    assert!(render(&t, "empty").is_err());
    let t = Table { header: vec!["a".into(), "b".into()], rows: vec![vec!["x".into(), "y".into()]] };
    assert!(render(&t, "words").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn plot_csv_reparses_losslessly(rows in proptest::collection::vec((1u32..10_000, proptest::num::f64::NORMAL, proptest::num::f64::POSITIVE), 1..30)) {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("series.csv");
        let t = Table {
            header: vec!["epoch".into(), "a".into(), "b".into()],
            rows: rows.iter().map(|(e, a, b)| vec![e.to_string(), format!("{a:e}"), format!("{b:e}")]).collect(),
        };
        t.write(&input).unwrap();
        let (svg, csv) = plot_file(&input, &dir.path().join("out")).unwrap();
        prop_assert!(fs::read_to_string(svg).unwrap().contains("<polyline"));
        let back = Table::read(&csv).unwrap();
        for (row, (e, a, b)) in back.rows.iter().zip(&rows) {
            prop_assert_eq!(row[0].parse::<u32>().unwrap(), *e);
            prop_assert_eq!(row[1].parse::<f64>().unwrap().to_bits(), a.to_bits());
            prop_assert_eq!(row[2].parse::<f64>().unwrap().to_bits(), b.to_bits());
        }
    }
}
