//! Test-split metrics: relative L2 against stored references (Darcy) or
//! residual and boundary-violation terms (plate).

use std::path::Path;

use pigano_core::data::{Problem, Sample};
use pigano_core::models::ModelState;
use pigano_core::oracle::relative_l2;
use pigano_core::physics::{predict_points, Physics, PLATE_TERMS};
use pigano_core::training::{loss_summary, Executor, Sequential};
use serde::Serialize;

use crate::error::{format_err, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub id: usize,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub metric: String,
    pub samples: usize,
    pub mean: f64,
    /// Population standard deviation over samples.
    pub std: f64,
    pub best: usize,
    pub worst: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub columns: Vec<String>,
    pub rows: Vec<EvalRow>,
    /// Statistics of the first column.
    pub summary: Summary,
}

pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl EvalReport {
    pub fn new(columns: Vec<String>, rows: Vec<EvalRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Invalid("nothing to evaluate".into()));
        }
        let primary: Vec<f64> = rows.iter().map(|r| r.values[0]).collect();
        let (mean, std) = mean_std(&primary);
        let by = |better: fn(f64, f64) -> bool| {
            let mut k = 0;
            for (i, v) in primary.iter().enumerate() {
                if better(*v, primary[k]) {
                    k = i;
                }
            }
            rows[k].id
        };
        let summary = Summary {
            metric: columns[0].clone(),
            samples: rows.len(),
            mean,
            std,
            best: by(|a, b| a < b),
            worst: by(|a, b| a > b),
        };
        Ok(Self { columns, rows, summary })
    }

    pub fn column_means(&self) -> Vec<f64> {
        (0..self.columns.len())
            .map(|c| self.rows.iter().map(|r| r.values[c]).sum::<f64>() / self.rows.len() as f64)
            .collect()
    }
}

/// Relative L2 of `predict(sample)` against each sample's reference values.
pub fn evaluate_predictions<E, F>(samples: &[Sample], exec: &E, predict: F) -> Result<EvalReport>
where
    E: Executor,
    F: Fn(&Sample) -> Result<Vec<f64>> + Sync,
{
    let results = exec.map(samples.len(), |i| -> Result<EvalRow> {
        let s = &samples[i];
        let r = s
            .reference
            .as_ref()
            .ok_or_else(|| Error::Invalid(format!("sample {} has no reference values", s.id)))?;
        let pred = predict(s)?;
        Ok(EvalRow {
            id: s.id,
            values: vec![relative_l2(&pred, &r.values)?],
        })
    });
    let rows = results.into_iter().collect::<Result<Vec<_>>>()?;
    EvalReport::new(vec!["rel_l2".into()], rows)
}

pub fn evaluate<E: Executor>(state: &ModelState, samples: &[Sample], physics: &Physics, exec: &E) -> Result<EvalReport> {
    let problem = state.arch().problem;
    if samples.iter().any(|s| s.problem != problem) {
        return Err(Error::Invalid("samples and model solve different problems".into()));
    }
    match problem {
        Problem::Darcy => evaluate_predictions(samples, exec, |s| {
            let r = s.reference.as_ref().expect("checked by caller");
            Ok(predict_points(state, s, &r.points)?.into_data())
        }),
        Problem::Plate => {
            let results = exec.map(samples.len(), |i| -> Result<EvalRow> {
                let l = loss_summary(state, std::slice::from_ref(&samples[i]), physics, &Sequential)?;
                let mut values = vec![l.total];
                values.extend(l.terms.iter().map(|t| t.1));
                Ok(EvalRow { id: samples[i].id, values })
            });
            let rows = results.into_iter().collect::<Result<Vec<_>>>()?;
            let mut columns = vec!["total".to_string()];
            columns.extend(PLATE_TERMS.iter().map(|t| t.to_string()));
            EvalReport::new(columns, rows)
        }
    }
}

/// One row per sample, then `mean` and `std` rows.
pub fn write_eval_csv(path: &Path, report: &EvalReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| format_err(path, e.to_string());
    let mut header = vec!["sample".to_string()];
    header.extend(report.columns.iter().cloned());
    w.write_record(&header).map_err(err)?;
    for r in &report.rows {
        let mut rec = vec![r.id.to_string()];
        rec.extend(r.values.iter().map(|v| format!("{v:e}")));
        w.write_record(&rec).map_err(err)?;
    }
    let means = report.column_means();
    let stds: Vec<f64> = (0..report.columns.len())
        .map(|c| mean_std(&report.rows.iter().map(|r| r.values[c]).collect::<Vec<_>>()).1)
        .collect();
    for (label, vals) in [("mean", means), ("std", stds)] {
        let mut rec = vec![label.to_string()];
        rec.extend(vals.iter().map(|v| format!("{v:e}")));
        w.write_record(&rec).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| format_err(path, e.to_string()))?;
    crate::codec::write_atomic(path, &bytes)
}

pub fn write_summary_json(path: &Path, summary: &Summary) -> Result<()> {
    let text = serde_json::to_string_pretty(summary).map_err(|e| format_err(path, e.to_string()))?;
    crate::codec::write_atomic(path, text.as_bytes())
}
