//! Command-line interface of the `sgar` binary.
//!
//! Exit codes: 0 on success, 1 for invalid input or usage, 2 for failures
//! while running (I/O, divergence, failed gradient checks).

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::assignment::{solve_assignment, CostMatrix};
use crate::error::{Error, Result};
use crate::gradcheck::{check_component, GradCheckReport, COMPONENTS, REL_TOLERANCE};
use crate::matching::match_report;
use crate::metrics::order_change_ratio;
use crate::model::{forward, read_checkpoint, write_checkpoint, Checkpoint};
use crate::synth::{generate_dataset, write_dataset, SynthConfig};
use crate::train::{
    evaluate_results, train_with, OrderRatios, OrderStudy, StepRecord, TrainConfig, TrainState,
};
use crate::types::{
    read_scenes_jsonl, GroupPrediction, HyperParams, IndividualPrediction, PointOrder, Scene,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "sgar", version, about = "Social group activity recognition toolkit")]
struct Cli {
    /// Random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON configuration file for the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output path (file or directory, depending on the subcommand).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset as newline-delimited JSON.
    Synth(SynthArgs),
    /// Train the model on a dataset.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset and print a JSON report.
    Eval(EvalArgs),
    /// Solve an assignment problem or show the training-time matches of a scene.
    Match(MatchArgs),
    /// Compare every analytic gradient with finite differences.
    Gradcheck(GradcheckArgs),
    /// Measure how often member-point orderings change under box noise.
    OrderAnalysis(OrderArgs),
    /// Time the assignment solver on random square matrices.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Number of scenes.
    #[arg(long, default_value_t = 2500)]
    scenes: usize,
    /// Fraction of scenes written to --out; the rest go to --eval-out.
    #[arg(long, default_value_t = 1.0)]
    split: f64,
    /// Output file for the evaluation split.
    #[arg(long)]
    eval_out: Option<PathBuf>,
    #[arg(long)]
    min_groups: Option<usize>,
    #[arg(long)]
    max_groups: Option<usize>,
    #[arg(long)]
    min_group_size: Option<usize>,
    #[arg(long)]
    max_group_size: Option<usize>,
    #[arg(long)]
    min_distractors: Option<usize>,
    #[arg(long)]
    max_distractors: Option<usize>,
    /// Number of activity classes.
    #[arg(long)]
    n_v: Option<usize>,
    /// Number of action classes.
    #[arg(long)]
    n_a: Option<usize>,
    /// Token dimension.
    #[arg(long)]
    d_tok: Option<usize>,
    /// Maximum group size.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    #[arg(long)]
    grid_rows: Option<usize>,
    #[arg(long)]
    grid_cols: Option<usize>,
    #[arg(long)]
    jitter: Option<f64>,
    #[arg(long)]
    position_scale: Option<f64>,
    #[arg(long)]
    group_feature_scale: Option<f64>,
    /// Member point order: ascx or ascy.
    #[arg(long)]
    point_order: Option<PointOrder>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Training scenes (JSONL).
    #[arg(long)]
    data: PathBuf,
    /// Checkpoint to resume from.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Override the number of training steps.
    #[arg(long)]
    steps: Option<u64>,
    /// CSV loss log; defaults to train_log.csv in the output directory.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Evaluation scenes (JSONL).
    #[arg(long)]
    data: PathBuf,
    /// Center noise of the ordering study.
    #[arg(long, default_value_t = 0.02)]
    sigma: f64,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
}

#[derive(Debug, Args)]
struct MatchArgs {
    /// JSON file holding a cost matrix as an array of rows.
    #[arg(long, conflicts_with_all = ["checkpoint", "data", "input"])]
    costs: Option<PathBuf>,
    /// JSON file holding {scene, group_preds, individual_preds} and optional
    /// hyper_params.
    #[arg(long, conflicts_with_all = ["checkpoint", "data"])]
    input: Option<PathBuf>,
    #[arg(long, requires = "data")]
    checkpoint: Option<PathBuf>,
    #[arg(long, requires = "checkpoint")]
    data: Option<PathBuf>,
    /// Scene index within --data.
    #[arg(long, default_value_t = 0)]
    scene: usize,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    /// Random points per component.
    #[arg(long, default_value_t = 100)]
    points: usize,
}

#[derive(Debug, Args)]
struct OrderArgs {
    /// Scenes to analyse; a fresh synthetic set is generated when omitted.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Scenes to generate when --data is absent.
    #[arg(long, default_value_t = 500)]
    scenes: usize,
    #[arg(long, default_value_t = 0.02)]
    sigma: f64,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Matrix size.
    #[arg(long, default_value_t = 300)]
    n: usize,
    #[arg(long, default_value_t = 20)]
    runs: usize,
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return code;
        }
    };
    match dispatch(cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_validation() {
                EXIT_INVALID
            } else {
                EXIT_RUNTIME
            }
        }
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<i32> {
    let common = Common {
        seed: cli.seed,
        config: cli.config,
        out: cli.out,
    };
    match cli.command {
        Command::Synth(a) => synth(&common, a, out),
        Command::Train(a) => train(&common, a, out),
        Command::Eval(a) => eval(&common, a, out),
        Command::Match(a) => match_cmd(&common, a, out),
        Command::Gradcheck(a) => gradcheck(&common, a, out),
        Command::OrderAnalysis(a) => order_analysis(&common, a, out),
        Command::Bench(a) => bench(&common, a, out),
    }
}

struct Common {
    seed: Option<u64>,
    config: Option<PathBuf>,
    out: Option<PathBuf>,
}

fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
}

fn config_or_default<T: DeserializeOwned + Default>(common: &Common) -> Result<T> {
    common.config.as_deref().map_or_else(|| Ok(T::default()), load_json)
}

/// Writes pretty JSON to `--out` when given, otherwise to stdout.
fn emit<T: Serialize>(common: &Common, value: &T, out: &mut dyn Write) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::json("report", e))?;
    match &common.out {
        Some(path) => fs::write(path, text + "\n").map_err(|e| Error::io(path, e)),
        None => writeln!(out, "{text}").map_err(|e| Error::io("<stdout>", e)),
    }
}

fn require_out<'a>(common: &'a Common, what: &str) -> Result<&'a Path> {
    common
        .out
        .as_deref()
        .ok_or_else(|| Error::Config(format!("--out is required for {what}")))
}

fn synth(common: &Common, a: SynthArgs, out: &mut dyn Write) -> Result<i32> {
    let mut cfg: SynthConfig = config_or_default(common)?;
    macro_rules! set {
        ($field:expr, $value:expr) => {
            if let Some(v) = $value {
                $field = v;
            }
        };
    }
    set!(cfg.n_groups_range.0, a.min_groups);
    set!(cfg.n_groups_range.1, a.max_groups);
    set!(cfg.group_size_range.0, a.min_group_size);
    set!(cfg.group_size_range.1, a.max_group_size);
    set!(cfg.n_distractors_range.0, a.min_distractors);
    set!(cfg.n_distractors_range.1, a.max_distractors);
    set!(cfg.n_v, a.n_v);
    set!(cfg.n_a, a.n_a);
    set!(cfg.d_tok, a.d_tok);
    set!(cfg.m, a.m);
    set!(cfg.noise_sigma, a.noise_sigma);
    set!(cfg.grid_rows, a.grid_rows);
    set!(cfg.grid_cols, a.grid_cols);
    set!(cfg.jitter, a.jitter);
    set!(cfg.position_scale, a.position_scale);
    set!(cfg.group_feature_scale, a.group_feature_scale);
    set!(cfg.point_order, a.point_order);
    cfg.validate()?;

    let path = require_out(common, "synth")?;
    if a.split < 1.0 && a.eval_out.is_none() {
        return Err(Error::Config("--split below 1 needs --eval-out".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(common.seed.unwrap_or(0));
    let (train, eval) = if a.scenes >= 2 {
        generate_dataset(&mut rng, &cfg, a.scenes, a.split)?
    } else {
        let scenes = (0..a.scenes)
            .map(|_| crate::synth::generate_scene(&mut rng, &cfg))
            .collect::<Result<Vec<_>>>()?;
        (scenes, Vec::new())
    };
    write_dataset(path, &train, &cfg)?;
    if let Some(eval_path) = &a.eval_out {
        write_dataset(eval_path, &eval, &cfg)?;
    }
    writeln!(
        out,
        "wrote {} scenes to {}{}",
        train.len(),
        path.display(),
        a.eval_out
            .as_ref()
            .map(|p| format!(" and {} to {}", eval.len(), p.display()))
            .unwrap_or_default()
    )
    .map_err(|e| Error::io("<stdout>", e))?;
    Ok(EXIT_OK)
}

fn train(common: &Common, a: TrainArgs, out: &mut dyn Write) -> Result<i32> {
    let mut cfg: TrainConfig = config_or_default(common)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(steps) = a.steps {
        cfg.steps = steps;
    }
    cfg.validate()?;
    let dir = require_out(common, "train")?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let dataset = read_scenes_jsonl(&a.data)?;

    let state = match &a.resume {
        Some(path) => {
            let ckpt = read_checkpoint(path)?;
            let optimizer = ckpt.optimizer.ok_or_else(|| {
                Error::Checkpoint("resuming needs a checkpoint with optimizer state".into())
            })?;
            TrainState {
                params: ckpt.params,
                optimizer,
                step: ckpt.step,
            }
        }
        None => TrainState::initial(&cfg),
    };

    let log_path = a.log.unwrap_or_else(|| dir.join("train_log.csv"));
    let resuming = a.resume.is_some() && log_path.exists();
    let file = fs::OpenOptions::new()
        .create(true)
        .append(resuming)
        .write(true)
        .truncate(!resuming)
        .open(&log_path)
        .map_err(|e| Error::io(&log_path, e))?;
    let mut log = csv::WriterBuilder::new()
        .has_headers(!resuming)
        .from_writer(file);
    let csv_err = |e: csv::Error| Error::io(&log_path, std::io::Error::other(e));

    let save = |state: &TrainState, name: String| -> Result<()> {
        let ckpt = Checkpoint {
            step: state.step,
            params: state.params.clone(),
            optimizer: Some(state.optimizer.clone()),
        };
        write_checkpoint(&dir.join(name), &ckpt)
    };

    let started = Instant::now();
    let result = train_with(&cfg, &dataset, state, |record: &StepRecord, state| {
        log.serialize(record).map_err(csv_err)?;
        if cfg.checkpoint_every > 0 && state.step % cfg.checkpoint_every == 0 {
            log.flush().map_err(|e| Error::io(&log_path, e))?;
            save(state, format!("step_{:06}.ckpt", state.step))?;
        }
        Ok(())
    });
    log.flush().map_err(|e| Error::io(&log_path, e))?;
    let (state, history) = result?;
    save(&state, "final.ckpt".into())?;
    let last = history.last().map_or(f64::NAN, |r| r.total);
    writeln!(
        out,
        "trained {} steps in {:.1?} (final loss {last:.4}); checkpoint {}",
        history.len(),
        started.elapsed(),
        dir.join("final.ckpt").display()
    )
    .map_err(|e| Error::io("<stdout>", e))?;
    Ok(EXIT_OK)
}

fn eval(common: &Common, a: EvalArgs, out: &mut dyn Write) -> Result<i32> {
    let ckpt = read_checkpoint(&a.checkpoint)?;
    let scenes = read_scenes_jsonl(&a.data)?;
    let results = scenes
        .iter()
        .map(|scene| {
            let fwd = forward(&ckpt.params, &scene.tokens)?;
            Ok(crate::metrics::SceneResult {
                scene,
                groups: fwd.groups,
                individuals: fwd.individuals,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let study = OrderStudy {
        sigma: a.sigma,
        trials: a.trials,
        seed: common.seed.unwrap_or(0),
    };
    let report = evaluate_results(&results, &ckpt.params.hp, &study)?;
    emit(common, &report, out)?;
    Ok(EXIT_OK)
}

#[derive(Debug, Deserialize)]
struct MatchInput {
    scene: Scene,
    group_preds: Vec<GroupPrediction>,
    individual_preds: Vec<IndividualPrediction>,
    #[serde(default)]
    hyper_params: Option<HyperParams>,
}

fn match_cmd(common: &Common, a: MatchArgs, out: &mut dyn Write) -> Result<i32> {
    if let Some(path) = &a.costs {
        let rows: Vec<Vec<f64>> = load_json(path)?;
        let assignment = solve_assignment(&CostMatrix::from_rows(&rows)?)?;
        emit(common, &assignment, out)?;
        return Ok(EXIT_OK);
    }
    if let Some(path) = &a.input {
        let input: MatchInput = load_json(path)?;
        let hp = input.hyper_params.unwrap_or_else(HyperParams::desk);
        hp.validate()?;
        let report = match_report(
            &input.scene.groups,
            &input.group_preds,
            &input.scene.persons,
            &input.individual_preds,
            &(&hp).into(),
            &(&hp).into(),
            hp.m,
        )?;
        emit(common, &report, out)?;
        return Ok(EXIT_OK);
    }
    let (Some(ckpt_path), Some(data)) = (&a.checkpoint, &a.data) else {
        return Err(Error::Config(
            "give --costs, --input, or --checkpoint with --data".into(),
        ));
    };
    let ckpt = read_checkpoint(ckpt_path)?;
    let scenes = read_scenes_jsonl(data)?;
    let scene = scenes.get(a.scene).ok_or_else(|| {
        Error::Config(format!("scene {} out of range ({} scenes)", a.scene, scenes.len()))
    })?;
    let hp = &ckpt.params.hp;
    let fwd = forward(&ckpt.params, &scene.tokens)?;
    let report = match_report(
        &scene.groups,
        &fwd.groups,
        &scene.persons,
        &fwd.individuals,
        &hp.into(),
        &hp.into(),
        hp.m,
    )?;
    emit(common, &report, out)?;
    Ok(EXIT_OK)
}

fn gradcheck(common: &Common, a: GradcheckArgs, out: &mut dyn Write) -> Result<i32> {
    let seed = common.seed.unwrap_or(0);
    let mut components = Vec::with_capacity(COMPONENTS.len());
    for (i, name) in COMPONENTS.iter().enumerate() {
        let c = check_component(name, a.points, seed.wrapping_add(i as u64))?;
        writeln!(
            out,
            "{:<12} max rel error {:.3e} over {} points ({} redrawn) {}",
            c.name,
            c.max_rel_error,
            c.points,
            c.redrawn,
            if c.passed() { "ok" } else { "FAIL" }
        )
        .map_err(|e| Error::io("<stdout>", e))?;
        components.push(c);
    }
    let report = GradCheckReport { components };
    if let Some(path) = &common.out {
        let text = serde_json::to_string_pretty(&report).map_err(|e| Error::json("report", e))?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))?;
    }
    if report.passed() {
        Ok(EXIT_OK)
    } else {
        writeln!(out, "gradient check failed (tolerance {REL_TOLERANCE:e})")
            .map_err(|e| Error::io("<stdout>", e))?;
        Ok(EXIT_RUNTIME)
    }
}

fn order_analysis(common: &Common, a: OrderArgs, out: &mut dyn Write) -> Result<i32> {
    let seed = common.seed.unwrap_or(0);
    let scenes = match &a.data {
        Some(path) => read_scenes_jsonl(path)?,
        None => {
            let cfg: SynthConfig = config_or_default(common)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..a.scenes)
                .map(|_| crate::synth::generate_scene(&mut rng, &cfg))
                .collect::<Result<Vec<_>>>()?
        }
    };
    let ratio = |order| order_change_ratio(&scenes, order, a.sigma, a.trials, seed);
    let report = OrderRatios {
        asc_x: ratio(PointOrder::AscX)?,
        asc_y: ratio(PointOrder::AscY)?,
    };
    emit(common, &report, out)?;
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct BenchReport {
    n: usize,
    runs: usize,
    min_ms: f64,
    median_ms: f64,
    mean_ms: f64,
    max_ms: f64,
}

fn bench(common: &Common, a: BenchArgs, out: &mut dyn Write) -> Result<i32> {
    if a.n == 0 || a.runs == 0 {
        return Err(Error::Config("--n and --runs must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(common.seed.unwrap_or(0));
    let mut times = Vec::with_capacity(a.runs);
    for _ in 0..a.runs {
        let m = CostMatrix::from_fn(a.n, a.n, |_, _| rng.random::<f64>());
        let t = Instant::now();
        solve_assignment(&m)?;
        times.push(t.elapsed().as_secs_f64() * 1e3);
    }
    times.sort_by(f64::total_cmp);
    let report = BenchReport {
        n: a.n,
        runs: a.runs,
        min_ms: times[0],
        median_ms: median(&times),
        mean_ms: times.iter().sum::<f64>() / times.len() as f64,
        max_ms: times[times.len() - 1],
    };
    emit(common, &report, out)?;
    Ok(EXIT_OK)
}

/// Median of sorted values.
pub fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}
