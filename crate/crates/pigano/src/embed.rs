//! Distances of geometry embeddings from the centroid of a reference set.

use std::path::Path;

use pigano_core::autodiff::Tape;
use pigano_core::data::Sample;
use pigano_core::models::{ModelInput, ModelKind, ModelState};
use pigano_core::training::Executor;

use crate::error::{format_err, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingDistances {
    /// Mean embedding of set A.
    pub centroid: Vec<f64>,
    /// `(sample id, distance)` for set A.
    pub a: Vec<(usize, f64)>,
    pub b: Vec<(usize, f64)>,
}

impl EmbeddingDistances {
    pub fn mean_a(&self) -> f64 {
        mean(&self.a)
    }

    pub fn mean_b(&self) -> f64 {
        mean(&self.b)
    }
}

fn mean(v: &[(usize, f64)]) -> f64 {
    v.iter().map(|p| p.1).sum::<f64>() / v.len() as f64
}

/// The pooled geometry feature `G` of one sample.
pub fn geometry_embedding(state: &ModelState, sample: &Sample) -> Result<Vec<f64>> {
    if state.arch().kind != ModelKind::Gano {
        return Err(Error::Invalid(format!("{} models have no geometry encoder", state.arch().kind)));
    }
    let input = ModelInput::build(state.arch(), sample)?;
    let geo = input.geometry.ok_or_else(|| Error::Invalid("sample has no geometry rows".into()))?;
    let mut tape = Tape::new();
    let bound = state.bind(&mut tape);
    let g = bound.encode_geometry(&mut tape, &geo)?;
    Ok(tape.value(g).data().to_vec())
}

fn embed_all<E: Executor>(state: &ModelState, set: &[Sample], exec: &E) -> Result<Vec<Vec<f64>>> {
    exec.map(set.len(), |i| geometry_embedding(state, &set[i])).into_iter().collect()
}

pub fn embedding_distances<E: Executor>(state: &ModelState, a: &[Sample], b: &[Sample], exec: &E) -> Result<EmbeddingDistances> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Invalid("embedding distances need two non-empty sets".into()));
    }
    let ea = embed_all(state, a, exec)?;
    let eb = embed_all(state, b, exec)?;
    let q = ea[0].len();
    let mut centroid = vec![0.0; q];
    for e in &ea {
        for (c, v) in centroid.iter_mut().zip(e) {
            *c += v / ea.len() as f64;
        }
    }
    let dist = |e: &[f64]| e.iter().zip(&centroid).map(|(x, c)| (x - c) * (x - c)).sum::<f64>().sqrt();
    let a = a.iter().zip(&ea).map(|(s, e)| (s.id, dist(e))).collect();
    let b = b.iter().zip(&eb).map(|(s, e)| (s.id, dist(e))).collect();
    Ok(EmbeddingDistances { centroid, a, b })
}

/// Columns `set,sample,distance`, set A first.
pub fn write_distances_csv(path: &Path, d: &EmbeddingDistances) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| format_err(path, e.to_string());
    w.write_record(["set", "sample", "distance"]).map_err(err)?;
    for (label, rows) in [("a", &d.a), ("b", &d.b)] {
        for (id, v) in rows {
            w.write_record([label.to_string(), id.to_string(), format!("{v:e}")]).map_err(err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| format_err(path, e.to_string()))?;
    crate::codec::write_atomic(path, &bytes)
}
