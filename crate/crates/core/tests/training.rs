use pigano_core::data::{generate, GenConfig, Problem, Sample};
use pigano_core::models::{Architecture, ModelKind, ModelState};
use pigano_core::training::{grid_search, loss_summary, train, EpochRecord, Monitor, Sequential, TrainConfig};

fn toy(n: usize, seed: u64) -> Vec<Sample> {
    let mut cfg = GenConfig::new(Problem::Darcy, n, seed);
    cfg.interior = 100;
    cfg.boundary = vec![40];
    cfg.eval_points = 0;
    generate(&cfg).unwrap()
}

fn arch(width: usize) -> Architecture {
    Architecture { width, ..Architecture::new(ModelKind::Gano, Problem::Darcy) }
}

#[derive(Default)]
struct Recorder(Vec<EpochRecord>);

impl Monitor for Recorder {
    fn on_epoch(&mut self, r: &EpochRecord) {
        self.0.push(*r);
    }
}

#[test]
fn zero_learning_rate_keeps_parameters() {
    let samples = toy(4, 1);
    let state = ModelState::init(arch(8), 3).unwrap();
    let cfg = TrainConfig { lr: 0.0, epochs: 3, batch_size: 2, ..Default::default() };
    let out = train(state.clone(), &samples[..3], &samples[3..], &cfg, &Sequential, &mut ()).unwrap();
    assert_eq!(out.last.params(), state.params());
    assert_eq!(out.best.params(), state.params());
}

#[test]
fn toy_loss_drops_tenfold() {
    let samples = toy(5, 2);
    let state = ModelState::init(arch(64), 0).unwrap();
    let cfg = TrainConfig { lr: 1e-3, epochs: 500, ratio: 0.3, batch_size: 5, ..Default::default() };
    let before = loss_summary(&state, &samples, &cfg.physics, &Sequential).unwrap().total;
    let out = train(state, &samples, &samples, &cfg, &Sequential, &mut ()).unwrap();
    let after = loss_summary(&out.best, &samples, &cfg.physics, &Sequential).unwrap().total;
    assert!(after * 10.0 <= before, "{before} -> {after}");
}

#[test]
fn training_is_deterministic() {
    let samples = toy(4, 5);
    let cfg = TrainConfig { epochs: 4, batch_size: 2, ..Default::default() };
    let run = || {
        let mut rec = Recorder::default();
        let state = ModelState::init(arch(8), 9).unwrap();
        let out = train(state, &samples[..3], &samples[3..], &cfg, &Sequential, &mut rec).unwrap();
        (out.last.params().to_vec(), rec.0)
    };
    let (a, ha) = run();
    let (b, hb) = run();
    assert_eq!(a, b);
    assert_eq!(ha, hb);
    assert_eq!(ha.len(), 4);
}

#[test]
fn best_state_matches_lowest_validation_loss() {
    let samples = toy(4, 6);
    let cfg = TrainConfig { epochs: 6, batch_size: 3, lr: 5e-3, ..Default::default() };
    let state = ModelState::init(arch(8), 1).unwrap();
    let out = train(state, &samples[..3], &samples[3..], &cfg, &Sequential, &mut ()).unwrap();
    let min = out.history.iter().map(|r| r.val_loss).fold(f64::INFINITY, f64::min);
    assert_eq!(out.best_val, min);
    assert_eq!(out.history[out.best_epoch - 1].val_loss, min);
}

#[test]
fn grid_search_reports_every_cell() {
    let samples = toy(4, 7);
    let base = TrainConfig { epochs: 2, batch_size: 3, ..Default::default() };
    let out = grid_search(&arch(8), 0, &samples[..3], &samples[3..], &base, &[1e-3, 1e-2], &[0.1, 0.5], &Sequential, &mut ()).unwrap();
    assert_eq!(out.cells.len(), 4);
    let min = out.cells.iter().map(|c| c.val_loss).fold(f64::INFINITY, f64::min);
    assert_eq!(out.cells[out.best].val_loss, min);
}

#[test]
fn invalid_config_is_rejected() {
    let samples = toy(3, 8);
    let state = ModelState::init(arch(8), 1).unwrap();
    let cfg = TrainConfig { ratio: 0.0, ..Default::default() };
    assert!(train(state.clone(), &samples[..2], &samples[2..], &cfg, &Sequential, &mut ()).is_err());
    assert!(train(state, &samples[..2], &[], &TrainConfig::default(), &Sequential, &mut ()).is_err());
}
