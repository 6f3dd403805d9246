//! Physics-informed training: Adam, batching, collocation subsampling,
//! validation-based model selection and grid search.

mod adam;

use alloc::vec::Vec;

use rand::seq::{index, SliceRandom};

pub use adam::Adam;

use crate::autodiff::{Tape, Tensor};
use crate::data::Sample;
use crate::error::{Error, Result};
use crate::models::{Architecture, ModelState};
use crate::physics::{sample_loss, Physics};
use crate::stochastic::stream_rng;

/// Runs independent per-sample jobs; results come back in job order.
pub trait Executor: Sync {
    fn map<T: Send, F: Fn(usize) -> T + Sync>(&self, jobs: usize, f: F) -> Vec<T>;
}

/// Runs jobs one after another on the calling thread.
#[derive(Clone, Copy, Debug, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T: Send, F: Fn(usize) -> T + Sync>(&self, jobs: usize, f: F) -> Vec<T> {
        (0..jobs).map(f).collect()
    }
}

/// Observes training progress; the clock feeds `wall_seconds`.
pub trait Monitor {
    fn now(&self) -> f64 {
        0.0
    }

    fn on_epoch(&mut self, _record: &EpochRecord) {}
}

impl Monitor for () {}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    /// Fraction of interior points used for the residual each epoch.
    pub ratio: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Fraction of interior points, fixed once, used for the validation loss.
    pub val_ratio: f64,
    pub physics: Physics,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            ratio: 0.2,
            batch_size: 20,
            epochs: 2000,
            seed: 0,
            val_ratio: 0.25,
            physics: Physics::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(alloc::format!("train config: {m}")));
        if !(self.ratio > 0.0 && self.ratio <= 1.0) || !(self.val_ratio > 0.0 && self.val_ratio <= 1.0) {
            return bad("ratios must lie in (0, 1]");
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1");
        }
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return bad("learning rate must be finite and non-negative");
        }
        self.physics.weights.validate()?;
        self.physics.material.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters at the epoch with the lowest validation loss.
    pub best: ModelState,
    pub best_val: f64,
    pub best_epoch: usize,
    /// Parameters after the last epoch.
    pub last: ModelState,
    pub history: Vec<EpochRecord>,
}

/// `ceil(ratio * n)` distinct indices, at least one.
pub fn subsample_size(n: usize, ratio: f64) -> usize {
    (libm::ceil(ratio * n as f64) as usize).clamp(1, n.max(1))
}

fn draw_rows<R: rand::Rng + ?Sized>(rng: &mut R, n: usize, ratio: f64, pointwise: bool) -> Vec<usize> {
    if !pointwise || ratio >= 1.0 {
        return (0..n).collect();
    }
    let mut rows = index::sample(rng, n, subsample_size(n, ratio)).into_vec();
    rows.sort_unstable();
    rows
}

struct SampleGrad {
    loss: f64,
    grads: Vec<Tensor>,
}

fn sample_grad(state: &ModelState, sample: &Sample, rows: &[usize], physics: &Physics) -> Result<SampleGrad> {
    let mut tape = Tape::new();
    let bound = state.bind(&mut tape);
    let parts = sample_loss(&mut tape, &bound, sample, rows, physics)?;
    let loss = tape.value(parts.total).item()?;
    let grads = tape.grad(parts.total, bound.param_vars())?;
    Ok(SampleGrad { loss, grads })
}

/// Loss value of one sample without parameter gradients.
pub fn sample_loss_value(state: &ModelState, sample: &Sample, rows: &[usize], physics: &Physics) -> Result<f64> {
    let mut tape = Tape::new();
    let bound = state.bind(&mut tape);
    let parts = sample_loss(&mut tape, &bound, sample, rows, physics)?;
    tape.value(parts.total).item()
}

/// Mean total loss and mean of each named term over `samples`, using every interior point.
#[derive(Clone, Debug, PartialEq)]
pub struct LossSummary {
    pub total: f64,
    pub terms: Vec<(&'static str, f64)>,
}

pub fn loss_summary<E: Executor>(state: &ModelState, samples: &[Sample], physics: &Physics, exec: &E) -> Result<LossSummary> {
    if samples.is_empty() {
        return Err(Error::Empty("samples for loss summary"));
    }
    let results = exec.map(samples.len(), |i| -> Result<(f64, Vec<(&'static str, f64)>)> {
        let s = &samples[i];
        let rows: Vec<usize> = (0..s.interior.len()).collect();
        let mut tape = Tape::new();
        let bound = state.bind(&mut tape);
        let parts = sample_loss(&mut tape, &bound, s, &rows, physics)?;
        let terms = parts
            .terms
            .iter()
            .map(|(n, v)| Ok((*n, tape.value(*v).item()?)))
            .collect::<Result<Vec<_>>>()?;
        Ok((tape.value(parts.total).item()?, terms))
    });
    let n = samples.len() as f64;
    let mut total = 0.0;
    let mut terms: Vec<(&'static str, f64)> = Vec::new();
    for r in results {
        let (t, ts) = r?;
        total += t / n;
        if terms.is_empty() {
            terms = ts.iter().map(|(k, _)| (*k, 0.0)).collect();
        }
        for (acc, (_, v)) in terms.iter_mut().zip(ts) {
            acc.1 += v / n;
        }
    }
    Ok(LossSummary { total, terms })
}

const VAL_STREAM: u64 = u64::MAX - 1;

/// Trains `state` on `train`, keeping the parameters with the lowest
/// validation loss.
pub fn train<E: Executor, M: Monitor + ?Sized>(
    mut state: ModelState,
    train: &[Sample],
    val: &[Sample],
    cfg: &TrainConfig,
    exec: &E,
    monitor: &mut M,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::Empty("training or validation split"));
    }
    let pointwise = state.arch().kind.is_pointwise();
    let mut val_rng = stream_rng(cfg.seed, VAL_STREAM);
    let val_rows: Vec<Vec<usize>> = val
        .iter()
        .map(|s| draw_rows(&mut val_rng, s.interior.len(), cfg.val_ratio, pointwise))
        .collect();

    let mut adam = Adam::new(cfg.lr);
    let names = state.names().to_vec();
    let start = monitor.now();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, ModelState)> = None;
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=cfg.epochs {
        let diverged = |detail: alloc::string::String| Error::Diverged { epoch, detail };
        let mut rng = stream_rng(cfg.seed, epoch as u64);
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let rows: Vec<Vec<usize>> = batch
                .iter()
                .map(|&i| draw_rows(&mut rng, train[i].interior.len(), cfg.ratio, pointwise))
                .collect();
            let snapshot = &state;
            let results = exec.map(batch.len(), |k| sample_grad(snapshot, &train[batch[k]], &rows[k], &cfg.physics));
            let mut sum: Option<Vec<Tensor>> = None;
            let mut batch_loss = 0.0;
            for r in results {
                let sg = r.map_err(|e| diverged(alloc::format!("{e}")))?;
                if !sg.loss.is_finite() {
                    return Err(diverged(alloc::format!("loss {}", sg.loss)));
                }
                batch_loss += sg.loss;
                match &mut sum {
                    None => sum = Some(sg.grads),
                    Some(acc) => {
                        for (a, g) in acc.iter_mut().zip(&sg.grads) {
                            a.add_assign(g)?;
                        }
                    }
                }
            }
            epoch_loss += batch_loss;
            let inv = 1.0 / batch.len() as f64;
            let grads: Vec<Tensor> = sum.expect("non-empty batch").iter().map(|g| g.affine(inv, 0.0)).collect();
            adam.step(state.params_mut(), &grads, &names)
                .map_err(|e| diverged(alloc::format!("{e}")))?;
        }
        let train_loss = epoch_loss / train.len() as f64;

        let snapshot = &state;
        let vals = exec.map(val.len(), |k| sample_loss_value(snapshot, &val[k], &val_rows[k], &cfg.physics));
        let mut val_loss = 0.0;
        for v in vals {
            val_loss += v.map_err(|e| diverged(alloc::format!("validation: {e}")))?;
        }
        val_loss /= val.len() as f64;
        if !val_loss.is_finite() {
            return Err(diverged(alloc::format!("validation loss {val_loss}")));
        }

        let record = EpochRecord {
            epoch,
            train_loss,
            val_loss,
            wall_seconds: monitor.now() - start,
        };
        monitor.on_epoch(&record);
        history.push(record);
        if best.as_ref().map_or(true, |b| val_loss < b.0) {
            best = Some((val_loss, epoch, state.clone()));
        }
    }

    let (best_val, best_epoch, best_state) = match best {
        Some(b) => b,
        None => {
            let rows = &val_rows;
            let mut v = 0.0;
            for (k, s) in val.iter().enumerate() {
                v += sample_loss_value(&state, s, &rows[k], &cfg.physics)?;
            }
            (v / val.len() as f64, 0, state.clone())
        }
    };
    Ok(TrainOutcome {
        best: best_state,
        best_val,
        best_epoch,
        last: state,
        history,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridCell {
    pub lr: f64,
    pub ratio: f64,
    pub val_loss: f64,
    pub best_epoch: usize,
}

#[derive(Clone, Debug)]
pub struct GridOutcome {
    /// One row per `(lr, ratio)` pair, learning rate outermost.
    pub cells: Vec<GridCell>,
    pub best: usize,
    pub best_outcome: TrainOutcome,
}

/// Trains every `(lr, ratio)` cell from the same initial parameters and
/// picks the lowest validation loss; ties go to the lower learning rate,
/// then the lower ratio.
#[allow(clippy::too_many_arguments)]
pub fn grid_search<E: Executor, M: Monitor + ?Sized>(
    arch: &Architecture,
    init_seed: u64,
    train_set: &[Sample],
    val: &[Sample],
    base: &TrainConfig,
    lrs: &[f64],
    ratios: &[f64],
    exec: &E,
    monitor: &mut M,
) -> Result<GridOutcome> {
    if lrs.is_empty() || ratios.is_empty() {
        return Err(Error::Empty("grid axes"));
    }
    let init = ModelState::init(arch.clone(), init_seed)?;
    let mut cells = Vec::with_capacity(lrs.len() * ratios.len());
    let mut best: Option<(usize, TrainOutcome)> = None;
    for &lr in lrs {
        for &ratio in ratios {
            let cfg = TrainConfig { lr, ratio, ..base.clone() };
            let out = train(init.clone(), train_set, val, &cfg, exec, monitor)?;
            let cell = GridCell {
                lr,
                ratio,
                val_loss: out.best_val,
                best_epoch: out.best_epoch,
            };
            let better = match &best {
                None => true,
                Some((i, _)) => {
                    let b: &GridCell = &cells[*i];
                    (cell.val_loss, cell.lr, cell.ratio) < (b.val_loss, b.lr, b.ratio)
                }
            };
            cells.push(cell);
            if better {
                best = Some((cells.len() - 1, out));
            }
        }
    }
    let (best, best_outcome) = best.expect("non-empty grid");
    Ok(GridOutcome {
        cells,
        best,
        best_outcome,
    })
}
