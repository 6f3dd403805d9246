use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::error::ErrorKind;
use clap::{ArgGroup, Args, CommandFactory, Parser, Subcommand};
use pigano_core::data::{GenConfig, Problem, Split};
use pigano_core::models::{parse_pool, Architecture, ModelKind};
use pigano_core::training::{EpochRecord, TrainConfig};

use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::config::Config;
use crate::dataset::{generate_dataset, load_dataset, parse_variation};
use crate::embed::{embedding_distances, write_distances_csv};
use crate::eval::{evaluate, write_eval_csv, write_summary_json};
use crate::exec::{Clock, Threads};
use crate::experiment::{ablate, architecture_for, grid_on, test_report, train_on, write_ablation_csv, write_grid_csv, write_history_csv, AblationAxis};
use crate::plot::plot_file;

const PROBLEMS: [&str; 2] = ["darcy", "plate"];
const VARIATIONS: [&str; 2] = ["low", "high"];
const MODELS: [&str; 5] = ["gano", "dcon", "pointnet", "pointnet-star", "deeponet"];
const POOLS: [&str; 3] = ["avg", "max", "min"];
const FUSIONS: [&str; 3] = ["concat", "add", "mul"];
const GEO_INPUTS: [&str; 4] = ["var-boundary", "all-boundary", "interior", "parametric"];

/// Physics-informed geometry-aware neural operators.
#[derive(Debug, Parser)]
#[command(name = "pigano", version)]
pub struct Cli {
    /// TOML file with defaults for any flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a dataset directory.
    GenData(GenArgs),
    /// Train one model on a dataset's train split.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset split.
    Eval(EvalArgs),
    /// Train over a learning-rate by sampling-ratio grid and keep the best.
    GridSearch(TrainArgs),
    /// Train GANO once per pooling, fusion or geometry-input option.
    Ablate(AblateArgs),
    /// Distances of geometry embeddings from the centroid of set A.
    EmbedDist(EmbedArgs),
    /// Render CSV outputs as SVG charts.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_parser = PROBLEMS)]
    pub problem: Option<String>,
    #[arg(long, value_parser = VARIATIONS)]
    pub variation: Option<String>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Interior collocation points per sample.
    #[arg(long)]
    pub interior: Option<usize>,
    /// Points per boundary group, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub boundary: Option<Vec<usize>>,
    /// Use one boundary function for every sample.
    #[arg(long)]
    pub fixed_bc: bool,
    /// Reference points per Darcy test sample.
    #[arg(long)]
    pub eval_points: Option<usize>,
    /// Walk-on-Spheres walks per reference point.
    #[arg(long)]
    pub walks: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, value_parser = MODELS)]
    pub model: Option<String>,
    #[arg(long, value_parser = POOLS)]
    pub pooling: Option<String>,
    #[arg(long, value_parser = FUSIONS)]
    pub fusion: Option<String>,
    #[arg(long, value_parser = GEO_INPUTS)]
    pub geo_input: Option<String>,
    #[arg(long)]
    pub width: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Learning rate; a comma-separated list for grid-search.
    #[arg(long, value_delimiter = ',')]
    pub lr: Option<Vec<f64>>,
    /// Fraction of interior points per epoch; a list for grid-search.
    #[arg(long, value_delimiter = ',')]
    pub ratio: Option<Vec<f64>>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Seed for initialisation and batching.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Directory holding model.json and model.bin.
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value = "test", value_parser = ["train", "val", "test"])]
    pub split: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("axis").required(true).args(["pooling", "fusion", "geo_input"])))]
pub struct AblateArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Vary the geometry pooling (avg, max, min).
    #[arg(long)]
    pub pooling: bool,
    /// Vary the fusion of coordinate and geometry embeddings (concat, add, mul).
    #[arg(long)]
    pub fusion: bool,
    /// Vary the geometry input (var-boundary, all-boundary, interior, parametric).
    #[arg(long)]
    pub geo_input: bool,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub ratio: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub set_a: PathBuf,
    #[arg(long)]
    pub set_b: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// CSV files written by train, eval, grid-search, ablate or embed-dist.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

fn usage_error(kind: ErrorKind, msg: impl std::fmt::Display) -> anyhow::Error {
    let mut cmd = Cli::command();
    cmd.build();
    anyhow::Error::new(cmd.error(kind, msg))
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> anyhow::Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    let cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    match cli.command {
        Command::GenData(a) => gen_data(a, &cfg),
        Command::Train(a) => train_cmd(a, &cfg, false),
        Command::GridSearch(a) => train_cmd(a, &cfg, true),
        Command::Eval(a) => eval_cmd(a),
        Command::Ablate(a) => ablate_cmd(a, &cfg),
        Command::EmbedDist(a) => embed_cmd(a),
        Command::Plot(a) => plot_cmd(a),
    }
}

fn gen_data(a: GenArgs, cfg: &Config) -> anyhow::Result<()> {
    let problem: Problem = a.problem.or(cfg.problem.clone()).unwrap_or_else(|| "darcy".into()).parse()?;
    let samples = a.samples.or(cfg.samples).unwrap_or(100);
    let mut g = GenConfig::new(problem, samples, a.seed.or(cfg.seed).unwrap_or(0));
    if let Some(v) = a.variation.or(cfg.variation.clone()) {
        if problem == Problem::Darcy {
            return Err(usage_error(ErrorKind::ArgumentConflict, "--variation applies to the plate problem only"));
        }
        g.variation = parse_variation(&v)?;
    }
    if let Some(n) = a.interior.or(cfg.interior) {
        g.interior = n;
    }
    if let Some(b) = a.boundary.or(cfg.boundary.clone()) {
        g.boundary = b;
    }
    g.fixed_bc = a.fixed_bc || cfg.fixed_bc.unwrap_or(false);
    if let Some(n) = a.eval_points.or(cfg.eval_points) {
        g.eval_points = n;
    }
    if let Some(n) = a.walks.or(cfg.walks) {
        g.wos.walks = n;
    }
    let exec = Threads::from_env()?;
    let d = generate_dataset(&a.out, &g, &exec).with_context(|| format!("generating {}", a.out.display()))?;
    println!("wrote {} {} samples to {}", d.samples.len(), problem, a.out.display());
    Ok(())
}

fn architecture(m: &ModelArgs, cfg: &Config, data: &crate::dataset::Dataset) -> anyhow::Result<Architecture> {
    let kind: ModelKind = m.model.clone().or(cfg.model.clone()).unwrap_or_else(|| "gano".into()).parse()?;
    let mut arch = architecture_for(kind, data)?;
    let pooling = m.pooling.clone().or(cfg.pooling.clone());
    let fusion = m.fusion.clone().or(cfg.fusion.clone());
    let geo = m.geo_input.clone().or(cfg.geo_input.clone());
    if kind != ModelKind::Gano && (pooling.is_some() || fusion.is_some() || geo.is_some()) {
        return Err(usage_error(
            ErrorKind::ArgumentConflict,
            format!("--pooling, --fusion and --geo-input configure the geometry encoder, which {kind} does not have"),
        ));
    }
    if let Some(p) = pooling {
        arch.pooling = parse_pool(&p)?;
    }
    if let Some(f) = fusion {
        arch.fusion = f.parse()?;
    }
    if let Some(g) = geo {
        arch.geo_input = g.parse()?;
    }
    if let Some(w) = m.width.or(cfg.width) {
        arch.width = w;
    }
    arch.validate()?;
    Ok(arch)
}

fn progress(label: String) -> Clock<impl FnMut(&EpochRecord)> {
    Clock::with(move |r: &EpochRecord| {
        if r.epoch % 100 == 0 || r.epoch == 1 {
            eprintln!("{label} epoch {:>5}  train {:.4e}  val {:.4e}  {:.1}s", r.epoch, r.train_loss, r.val_loss, r.wall_seconds);
        }
    })
}

fn single(v: Option<Vec<f64>>, fallback: Option<&Vec<f64>>, default: f64, flag: &str) -> anyhow::Result<f64> {
    match v.or(fallback.cloned()) {
        None => Ok(default),
        Some(v) if v.len() == 1 => Ok(v[0]),
        Some(_) => Err(usage_error(ErrorKind::ArgumentConflict, format!("train takes one --{flag} value; use grid-search for several"))),
    }
}

fn train_cmd(a: TrainArgs, cfg: &Config, grid: bool) -> anyhow::Result<()> {
    let exec = Threads::from_env()?;
    let data = load_dataset(&a.data, &exec)?;
    let arch = architecture(&a.model, cfg, &data)?;
    let seed = a.seed.or(cfg.seed).unwrap_or(0);
    let base = TrainConfig {
        epochs: a.epochs.or(cfg.epochs).unwrap_or(TrainConfig::default().epochs),
        batch_size: a.batch_size.or(cfg.batch_size).unwrap_or(TrainConfig::default().batch_size),
        seed,
        ..TrainConfig::default()
    };
    let (lrs, ratios) = if grid {
        (
            a.lr.or(cfg.lr.clone()).unwrap_or_else(|| vec![1e-3, 5e-4]),
            a.ratio.or(cfg.ratio.clone()).unwrap_or_else(|| vec![0.1, 0.2]),
        )
    } else {
        (
            vec![single(a.lr, cfg.lr.as_ref(), base.lr, "lr")?],
            vec![single(a.ratio, cfg.ratio.as_ref(), base.ratio, "ratio")?],
        )
    };
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let (outcome, cfg_used) = if grid {
        let g = grid_on(&data, &arch, seed, &base, &lrs, &ratios, &exec, &mut progress(arch.kind.to_string()))?;
        write_grid_csv(&a.out.join("grid.csv"), &g)?;
        let best = &g.cells[g.best];
        println!("best cell lr={} ratio={} val_loss={:.4e}", best.lr, best.ratio, best.val_loss);
        let cfg_used = TrainConfig { lr: best.lr, ratio: best.ratio, ..base };
        (g.best_outcome, cfg_used)
    } else {
        let cfg_used = TrainConfig { lr: lrs[0], ratio: ratios[0], ..base };
        let out = train_on(&data, &arch, seed, &cfg_used, &exec, &mut progress(arch.kind.to_string()))?;
        (out, cfg_used)
    };
    save_checkpoint(&a.out, &outcome.best)?;
    write_history_csv(&a.out.join("history.csv"), &outcome.history)?;
    println!("best epoch {} val_loss {:.4e}; checkpoint in {}", outcome.best_epoch, outcome.best_val, a.out.display());
    if data.split(Split::Test).iter().all(|s| s.reference.is_some()) || data.problem() == Problem::Plate {
        let report = test_report(&data, &outcome.best, &cfg_used, &exec)?;
        write_eval_csv(&a.out.join("eval.csv"), &report)?;
        write_summary_json(&a.out.join("summary.json"), &report.summary)?;
        println!("test {} mean {:.4e} std {:.4e}", report.summary.metric, report.summary.mean, report.summary.std);
    }
    Ok(())
}

fn eval_cmd(a: EvalArgs) -> anyhow::Result<()> {
    let exec = Threads::from_env()?;
    let data = load_dataset(&a.data, &exec)?;
    let state = load_checkpoint(&a.checkpoint)?;
    if state.arch().problem != data.problem() {
        bail!("checkpoint solves {} but the dataset is {}", state.arch().problem, data.problem());
    }
    let split = Split::parse(&a.split)?;
    let report = evaluate(&state, data.split(split), &TrainConfig::default().physics, &exec)?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write_eval_csv(&a.out.join("eval.csv"), &report)?;
    write_summary_json(&a.out.join("summary.json"), &report.summary)?;
    let s = &report.summary;
    println!("{} over {} samples: mean {:.4e} std {:.4e} best {} worst {}", s.metric, s.samples, s.mean, s.std, s.best, s.worst);
    Ok(())
}

fn ablate_cmd(a: AblateArgs, cfg: &Config) -> anyhow::Result<()> {
    let axis = match (a.pooling, a.fusion, a.geo_input) {
        (true, false, false) => AblationAxis::Pooling,
        (false, true, false) => AblationAxis::Fusion,
        (false, false, true) => AblationAxis::GeoInput,
        _ => return Err(usage_error(ErrorKind::ArgumentConflict, "choose exactly one of --pooling, --fusion, --geo-input")),
    };
    let exec = Threads::from_env()?;
    let data = load_dataset(&a.data, &exec)?;
    let mut arch = architecture_for(ModelKind::Gano, &data)?;
    if let Some(w) = a.width.or(cfg.width) {
        arch.width = w;
    }
    let seed = a.seed.or(cfg.seed).unwrap_or(0);
    let d = TrainConfig::default();
    let tc = TrainConfig {
        lr: a.lr.or(cfg.lr.as_ref().and_then(|v| v.first().copied())).unwrap_or(d.lr),
        ratio: a.ratio.or(cfg.ratio.as_ref().and_then(|v| v.first().copied())).unwrap_or(d.ratio),
        epochs: a.epochs.or(cfg.epochs).unwrap_or(d.epochs),
        batch_size: a.batch_size.or(cfg.batch_size).unwrap_or(d.batch_size),
        seed,
        ..d
    };
    let rows = ablate(&data, &arch, axis, seed, &tc, &exec, &mut progress(axis.name().to_string()))?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let path = a.out.join(format!("ablation_{}.csv", axis.name()));
    write_ablation_csv(&path, &rows)?;
    println!("{:<14} {:>12} {:>12}", axis.name(), "mean", "std");
    for r in &rows {
        println!("{:<14} {:>12.4e} {:>12.4e}", r.variant, r.mean, r.std);
    }
    println!("table in {}", path.display());
    Ok(())
}

fn embed_cmd(a: EmbedArgs) -> anyhow::Result<()> {
    let exec = Threads::from_env()?;
    let state = load_checkpoint(&a.checkpoint)?;
    let da = load_dataset(&a.set_a, &exec)?;
    let db = load_dataset(&a.set_b, &exec)?;
    let d = embedding_distances(&state, &da.samples, &db.samples, &exec)?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write_distances_csv(&a.out.join("distances.csv"), &d)?;
    println!("mean distance A {:.4e}  B {:.4e}", d.mean_a(), d.mean_b());
    Ok(())
}

fn plot_cmd(a: PlotArgs) -> anyhow::Result<()> {
    for input in &a.inputs {
        let (svg, csv) = plot_file(input, &a.out).with_context(|| format!("plotting {}", input.display()))?;
        println!("{} -> {}, {}", input.display(), svg.display(), csv.display());
    }
    Ok(())
}

/// Entry point for the binary: prints clap errors with usage and others plainly.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match run(args) {
        Ok(()) => 0,
        Err(e) => match e.downcast_ref::<clap::Error>() {
            Some(ce) => {
                let _ = ce.print();
                ce.exit_code()
            }
            None => {
                eprintln!("error: {e:#}");
                1
            }
        },
    }
}
