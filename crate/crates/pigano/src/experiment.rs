//! Training runs, grid searches and option ablations over a loaded dataset.

use std::path::Path;

use pigano_core::autodiff::Pool;
use pigano_core::data::{Sample, Split};
use pigano_core::models::{pool_name, Architecture, Fusion, GeoInput, ModelKind, ModelState, ALL_POOLS};
use pigano_core::training::{grid_search, train, EpochRecord, Executor, GridOutcome, Monitor, TrainConfig, TrainOutcome};

use crate::dataset::Dataset;
use crate::error::{format_err, Error, Result};
use crate::eval::{evaluate, mean_std, EvalReport};

/// Loaded boundary rows per sample; DeepONet needs this to be the same for
/// every sample.
pub fn branch_rows(samples: &[Sample]) -> Result<usize> {
    let rows = |s: &Sample| -> Result<usize> {
        s.problem
            .loaded_groups()
            .iter()
            .map(|g| Ok(s.group(g)?.points.len()))
            .sum::<Result<usize>>()
    };
    let first = rows(samples.first().ok_or_else(|| Error::Invalid("empty dataset".into()))?)?;
    for s in samples {
        if rows(s)? != first {
            return Err(Error::Invalid(format!("sample {} has a different number of loaded boundary points", s.id)));
        }
    }
    Ok(first)
}

/// Default architecture of `kind` for a dataset.
pub fn architecture_for(kind: ModelKind, data: &Dataset) -> Result<Architecture> {
    let mut a = Architecture::new(kind, data.problem());
    if kind == ModelKind::DeepONet {
        a.branch_rows = branch_rows(&data.samples)?;
    }
    Ok(a)
}

pub fn train_on<E: Executor, M: Monitor + ?Sized>(
    data: &Dataset,
    arch: &Architecture,
    init_seed: u64,
    cfg: &TrainConfig,
    exec: &E,
    monitor: &mut M,
) -> Result<TrainOutcome> {
    let state = ModelState::init(arch.clone(), init_seed)?;
    Ok(train(state, data.split(Split::Train), data.split(Split::Val), cfg, exec, monitor)?)
}

#[allow(clippy::too_many_arguments)]
pub fn grid_on<E: Executor, M: Monitor + ?Sized>(
    data: &Dataset,
    arch: &Architecture,
    init_seed: u64,
    base: &TrainConfig,
    lrs: &[f64],
    ratios: &[f64],
    exec: &E,
    monitor: &mut M,
) -> Result<GridOutcome> {
    Ok(grid_search(arch, init_seed, data.split(Split::Train), data.split(Split::Val), base, lrs, ratios, exec, monitor)?)
}

/// Test-split metrics of `state`.
pub fn test_report<E: Executor>(data: &Dataset, state: &ModelState, cfg: &TrainConfig, exec: &E) -> Result<EvalReport> {
    evaluate(state, data.split(Split::Test), &cfg.physics, exec)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AblationAxis {
    Pooling,
    Fusion,
    GeoInput,
}

impl AblationAxis {
    pub fn name(self) -> &'static str {
        match self {
            AblationAxis::Pooling => "pooling",
            AblationAxis::Fusion => "fusion",
            AblationAxis::GeoInput => "geo-input",
        }
    }

    /// Every option of the axis applied to `base`.
    pub fn variants(self, base: &Architecture) -> Vec<(String, Architecture)> {
        match self {
            AblationAxis::Pooling => ALL_POOLS
                .iter()
                .map(|p: &Pool| (pool_name(*p).to_string(), Architecture { pooling: *p, ..base.clone() }))
                .collect(),
            AblationAxis::Fusion => Fusion::ALL
                .iter()
                .map(|f| (f.name().to_string(), Architecture { fusion: *f, ..base.clone() }))
                .collect(),
            AblationAxis::GeoInput => GeoInput::ALL
                .iter()
                .map(|g| (g.name().to_string(), Architecture { geo_input: *g, ..base.clone() }))
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub variant: String,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub best_val: f64,
}

/// Trains one GANO per option of `axis` and reports its test metric.
pub fn ablate<E: Executor, M: Monitor + ?Sized>(
    data: &Dataset,
    base: &Architecture,
    axis: AblationAxis,
    init_seed: u64,
    cfg: &TrainConfig,
    exec: &E,
    monitor: &mut M,
) -> Result<Vec<AblationRow>> {
    if base.kind != ModelKind::Gano {
        return Err(Error::Invalid("ablations vary the geometry encoder, so the model must be gano".into()));
    }
    axis.variants(base)
        .into_iter()
        .map(|(variant, arch)| {
            let out = train_on(data, &arch, init_seed, cfg, exec, monitor)?;
            let report = test_report(data, &out.best, cfg, exec)?;
            let primary: Vec<f64> = report.rows.iter().map(|r| r.values[0]).collect();
            let (mean, std) = mean_std(&primary);
            Ok(AblationRow {
                variant,
                metric: report.summary.metric,
                mean,
                std,
                best_val: out.best_val,
            })
        })
        .collect()
}

fn write_csv(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| format_err(path, e.to_string());
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| format_err(path, e.to_string()))?;
    crate::codec::write_atomic(path, &bytes)
}

pub fn write_history_csv(path: &Path, history: &[EpochRecord]) -> Result<()> {
    write_csv(
        path,
        &["epoch", "train_loss", "val_loss", "wall_seconds"],
        history.iter().map(|r| {
            vec![
                r.epoch.to_string(),
                format!("{:e}", r.train_loss),
                format!("{:e}", r.val_loss),
                format!("{:.3}", r.wall_seconds),
            ]
        }),
    )
}

pub fn write_grid_csv(path: &Path, grid: &GridOutcome) -> Result<()> {
    write_csv(
        path,
        &["lr", "ratio", "val_loss", "best_epoch"],
        grid.cells.iter().map(|c| vec![format!("{:e}", c.lr), c.ratio.to_string(), format!("{:e}", c.val_loss), c.best_epoch.to_string()]),
    )
}

pub fn write_ablation_csv(path: &Path, rows: &[AblationRow]) -> Result<()> {
    let metric = rows.first().map_or("metric", |r| r.metric.as_str()).to_string();
    let (m, s) = (format!("{metric}_mean"), format!("{metric}_std"));
    write_csv(
        path,
        &["variant", &m, &s, "val_loss"],
        rows.iter().map(|r| vec![r.variant.clone(), format!("{:e}", r.mean), format!("{:e}", r.std), format!("{:e}", r.best_val)]),
    )
}
