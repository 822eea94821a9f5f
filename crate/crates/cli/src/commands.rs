//! Subcommand implementations: each resolves its config (defaults, then
//! file, then flags), records a run manifest in its output directory, and
//! delegates to the library.

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

use tacshear::contact::ContactType;
use tacshear::dataset::{
    collect_dataset, load_dataset, CollectionConfig, DatasetManifest, LoadedSample, Split,
};
use tacshear::estimate::{
    estimator_target, eval_estimator, train_estimator, train_estimator_aug, Estimator,
    EstimatorConfig, LabeledImage,
};
use tacshear::markers::SensorModel;
use tacshear::metrics::{mape, ssim};
use tacshear::servo::{run_task, Mount, ShearSource, TaskConfig, TaskLog, TrajectorySpec};
use tacshear::translate::{
    eval_translation, train_translator, TranslationEval, Translator, TranslatorConfig,
    TranslatorKind,
};

use crate::config::{load_file_overrides, merge_overrides, Usage};
use crate::plot;

/// Environment variable naming the root that relative `--out` paths are
/// resolved against.
pub const OUT_ROOT_ENV: &str = "TACSHEAR_OUT_ROOT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Small-scale defaults sized for a single CPU core.
    Desk,
    /// Full-scale protocol settings.
    Paper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindArg {
    Pix2pix,
    Shpix2pix,
}

impl From<KindArg> for TranslatorKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Pix2pix => TranslatorKind::Pix2pix,
            KindArg::Shpix2pix => TranslatorKind::ShPix2pix,
        }
    }
}

/// Which image domain feeds the estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageSource {
    /// Synthetic-real sensor images (ground truth domain).
    Real,
    /// Shear-free simulated depth images.
    Sim,
    /// Translator outputs; requires `--translator`.
    Generated,
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(Usage(msg.into()))
}

/// Map library errors: invalid configuration is a usage error (exit 2).
fn lib(e: tacshear::Error) -> anyhow::Error {
    match e {
        tacshear::Error::Config(msg) => usage(format!("configuration error: {msg}")),
        other => other.into(),
    }
}

/// Resolve `--out` against TACSHEAR_OUT_ROOT when relative.
fn out_dir(path: &Path) -> PathBuf {
    if path.is_relative() {
        if let Ok(root) = std::env::var(OUT_ROOT_ENV) {
            return PathBuf::from(root).join(path);
        }
    }
    path.to_path_buf()
}

/// Create the run directory and write its manifest; refuses to reuse a
/// directory that already holds a run.
fn init_run_dir(out: &Path, command: &str, config: &impl Serialize) -> Result<()> {
    fs::create_dir_all(out)?;
    let manifest = out.join("run.json");
    if manifest.exists() {
        return Err(usage(format!(
            "{} already contains run.json; runs never overwrite previous outputs",
            out.display()
        )));
    }
    let doc = serde_json::json!({
        "tool": "tacshear",
        "tool_version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config": config,
    });
    fs::write(manifest, serde_json::to_string_pretty(&doc)?)?;
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn load_splits(data: &Path) -> Result<(DatasetManifest, Vec<LoadedSample>, Vec<LoadedSample>)> {
    let manifest = DatasetManifest::load(&data.join("manifest.json")).map_err(lib)?;
    let train = load_dataset(data, &manifest, Split::Train).map_err(lib)?;
    let val = load_dataset(data, &manifest, Split::Val).map_err(lib)?;
    Ok((manifest, train, val))
}

// ---------------------------------------------------------------- collect

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CollectOverrides {
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub train_samples: Option<usize>,
    #[arg(long)]
    pub val_samples: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CollectArgs {
    /// Output run directory.
    #[arg(long)]
    pub out: PathBuf,
    /// TOML config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: CollectOverrides,
}

fn resolve_collection(o: &CollectOverrides) -> CollectionConfig {
    let mut cfg = match o.preset.unwrap_or(Preset::Desk) {
        Preset::Desk => CollectionConfig::desk(),
        Preset::Paper => CollectionConfig::paper_scale(),
    };
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if let Some(n) = o.train_samples {
        cfg.train_samples = n;
    }
    if let Some(n) = o.val_samples {
        cfg.val_samples = n;
    }
    cfg
}

pub fn collect(args: CollectArgs) -> Result<()> {
    let file: CollectOverrides = load_file_overrides(&args.config)?;
    let o = merge_overrides!(file, args.overrides, { preset, seed, train_samples, val_samples });
    let cfg = resolve_collection(&o);
    let out = out_dir(&args.out);
    init_run_dir(&out, "collect", &cfg)?;
    let manifest = collect_dataset(&cfg, &out).map_err(lib)?;
    println!(
        "collected {} train / {} val samples into {}",
        manifest.train.len(),
        manifest.val.len(),
        out.display()
    );
    Ok(())
}

// ------------------------------------------------------- train-translator

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TranslatorOverrides {
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub lambda_rec: Option<f64>,
    #[arg(long)]
    pub lambda_adv: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainTranslatorArgs {
    /// Dataset directory (a `collect` run).
    #[arg(long)]
    pub data: PathBuf,
    /// Translator variant.
    #[arg(long, value_enum)]
    pub kind: KindArg,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: TranslatorOverrides,
}

fn resolve_translator(kind: TranslatorKind, o: &TranslatorOverrides) -> TranslatorConfig {
    let mut cfg = match o.preset.unwrap_or(Preset::Desk) {
        Preset::Desk => TranslatorConfig::desk(kind),
        Preset::Paper => TranslatorConfig::paper_scale(kind),
    };
    if let Some(v) = o.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = o.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = o.lr {
        cfg.lr = v;
    }
    if let Some(v) = o.lambda_rec {
        cfg.lambda_rec = v;
    }
    if let Some(v) = o.lambda_adv {
        cfg.lambda_adv = v;
    }
    if let Some(v) = o.patience {
        cfg.patience = v;
    }
    if let Some(v) = o.seed {
        cfg.seed = v;
    }
    cfg
}

pub fn train_translator_cmd(args: TrainTranslatorArgs) -> Result<()> {
    let file: TranslatorOverrides = load_file_overrides(&args.config)?;
    let o = merge_overrides!(file, args.overrides, {
        preset, epochs, batch_size, lr, lambda_rec, lambda_adv, patience, seed,
    });
    let cfg = resolve_translator(args.kind.into(), &o);
    let out = out_dir(&args.out);
    init_run_dir(&out, "train-translator", &cfg)?;
    let (_, train, val) = load_splits(&args.data)?;
    let (mut translator, curves) = train_translator(&train, &val, &cfg).map_err(lib)?;
    translator.save(&out.join("translator.ckpt")).map_err(lib)?;
    curves.save_csv(&out.join("curves.csv")).map_err(lib)?;
    println!(
        "trained {:?} for {} epochs; best val MAPE {:.5}",
        cfg.kind,
        curves.0.len(),
        curves.best_val_mape().unwrap_or(f64::NAN)
    );
    Ok(())
}

// -------------------------------------------------------- train-estimator

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorOverrides {
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Regression target width: 4 (pose + planar shear) or 6 (adds
    /// vertical and yaw shear).
    #[arg(long)]
    pub label_dim: Option<usize>,
    #[arg(long, value_enum)]
    pub images: Option<ImageSource>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainEstimatorArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Translator checkpoint; required when `--images generated`.
    #[arg(long)]
    pub translator: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: EstimatorOverrides,
}

fn resolve_estimator(o: &EstimatorOverrides) -> EstimatorConfig {
    let dim = o.label_dim.unwrap_or(4);
    let mut cfg = match o.preset.unwrap_or(Preset::Desk) {
        Preset::Desk => EstimatorConfig::desk(dim),
        Preset::Paper => EstimatorConfig::paper_scale(dim),
    };
    if let Some(v) = o.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = o.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = o.lr {
        cfg.lr = v;
    }
    if let Some(v) = o.patience {
        cfg.patience = v;
    }
    if let Some(v) = o.seed {
        cfg.seed = v;
    }
    cfg
}

/// Pair samples with targets, drawing images from the chosen domain.
fn build_labeled(
    samples: &[LoadedSample],
    dim: usize,
    source: ImageSource,
    translator: Option<&mut Translator>,
) -> Result<Vec<LabeledImage>> {
    let images: Vec<_> = match source {
        ImageSource::Real => samples.iter().map(|s| s.real.clone()).collect(),
        ImageSource::Sim => samples.iter().map(|s| s.sim.clone()).collect(),
        ImageSource::Generated => {
            let t = translator
                .ok_or_else(|| usage("--images generated requires --translator <ckpt>"))?;
            t.translate_samples(samples)
        }
    };
    Ok(samples
        .iter()
        .zip(images)
        .map(|(s, image)| LabeledImage { image, target: estimator_target(&s.label, dim) })
        .collect())
}

fn load_translator_opt(path: &Option<PathBuf>) -> Result<Option<Translator>> {
    Ok(match path {
        Some(p) => Some(Translator::load(p).map_err(lib)?),
        None => None,
    })
}

pub fn train_estimator_cmd(args: TrainEstimatorArgs) -> Result<()> {
    let file: EstimatorOverrides = load_file_overrides(&args.config)?;
    let o = merge_overrides!(file, args.overrides, {
        preset, label_dim, images, epochs, batch_size, lr, patience, seed,
    });
    let cfg = resolve_estimator(&o);
    let source = o.images.unwrap_or(ImageSource::Real);
    let out = out_dir(&args.out);
    init_run_dir(
        &out,
        "train-estimator",
        &serde_json::json!({ "estimator": cfg, "images": source, "translator": args.translator }),
    )?;
    let (_, train, val) = load_splits(&args.data)?;
    let mut translator = load_translator_opt(&args.translator)?;
    let train_l = build_labeled(&train, cfg.label_dim, source, translator.as_mut())?;
    let val_l = build_labeled(&val, cfg.label_dim, source, translator.as_mut())?;
    let (mut est, curves) = train_estimator(&train_l, &val_l, &cfg).map_err(lib)?;
    est.save(&out.join("estimator.ckpt")).map_err(lib)?;
    curves.save_csv(&out.join("curves.csv")).map_err(lib)?;
    let last = curves.0.last().map(|e| e.val_nll).unwrap_or(f64::NAN);
    println!("trained estimator (dim {}) for {} epochs; final val NLL {last:.4}", cfg.label_dim, curves.0.len());
    Ok(())
}

// -------------------------------------------------------- eval-translation

#[derive(Debug, Args)]
pub struct EvalTranslationArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Translator checkpoint (not needed with `--identity`).
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Score the real images against themselves: a plumbing check that
    /// must report MAPE 0, SSIM 1.
    #[arg(long)]
    pub identity: bool,
}

/// Identity-path analog of the library's translation report.
fn identity_eval(samples: &[LoadedSample]) -> Result<serde_json::Value> {
    let mut per: std::collections::HashMap<ContactType, (f64, f64, usize)> = Default::default();
    let mut overall = (0.0, 0.0);
    for s in samples {
        let m = mape(&s.real, &s.real).map_err(lib)?;
        let v = ssim(&s.real, &s.real).map_err(lib)?;
        let e = per.entry(s.contact_type).or_insert((0.0, 0.0, 0));
        e.0 += m;
        e.1 += v;
        e.2 += 1;
        overall.0 += m;
        overall.1 += v;
    }
    let n = samples.len() as f64;
    let fetch = |ct: ContactType| {
        per.get(&ct).map(|(m, s, c)| (m / *c as f64, s / *c as f64)).unwrap_or((f64::NAN, f64::NAN))
    };
    let (surface_mape, surface_ssim) = fetch(ContactType::Surface);
    let (edge_mape, edge_ssim) = fetch(ContactType::Edge);
    Ok(serde_json::json!({
        "kind": "identity",
        "count": samples.len(),
        "mape_overall": overall.0 / n,
        "ssim_overall": overall.1 / n,
        "surface_mape": surface_mape,
        "surface_ssim": surface_ssim,
        "edge_mape": edge_mape,
        "edge_ssim": edge_ssim,
    }))
}

pub fn eval_translation_cmd(args: EvalTranslationArgs) -> Result<()> {
    let out = out_dir(&args.out);
    init_run_dir(
        &out,
        "eval-translation",
        &serde_json::json!({ "data": args.data, "model": args.model, "identity": args.identity }),
    )?;
    let (_, _, val) = load_splits(&args.data)?;
    let report = if args.identity {
        identity_eval(&val)?
    } else {
        let path = args.model.as_ref().ok_or_else(|| usage("--model or --identity required"))?;
        let mut translator = Translator::load(path).map_err(lib)?;
        let eval = eval_translation(&mut translator, &val).map_err(lib)?;
        serde_json::to_value(&eval)?
    };
    write_json(&out.join("translation_eval.json"), &report)?;
    println!(
        "MAPE {:.5} SSIM {:.5} over {} samples",
        report["mape_overall"].as_f64().unwrap_or(f64::NAN),
        report["ssim_overall"].as_f64().unwrap_or(f64::NAN),
        report["count"]
    );
    Ok(())
}

// --------------------------------------------------------- eval-estimator

#[derive(Debug, Args)]
pub struct EvalEstimatorArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Image domain to evaluate on (default: the synthetic-real images).
    #[arg(long, value_enum, default_value = "real")]
    pub images: ImageSource,
    #[arg(long)]
    pub translator: Option<PathBuf>,
}

pub fn eval_estimator_cmd(args: EvalEstimatorArgs) -> Result<()> {
    let out = out_dir(&args.out);
    init_run_dir(
        &out,
        "eval-estimator",
        &serde_json::json!({
            "data": args.data, "model": args.model,
            "images": args.images, "translator": args.translator,
        }),
    )?;
    let (_, _, val) = load_splits(&args.data)?;
    let mut est = Estimator::load(&args.model).map_err(lib)?;
    let mut translator = load_translator_opt(&args.translator)?;
    let val_l = build_labeled(&val, est.config.label_dim, args.images, translator.as_mut())?;
    let eval = eval_estimator(&mut est, &val_l).map_err(lib)?;
    write_json(&out.join("estimator_eval.json"), &eval)?;
    plot::bar_chart(&eval.mae, &eval.baseline_mae)
        .save(out.join("errors.png"))
        .context("writing errors.png")?;
    println!("MAE {:?} (baseline {:?}) over {} samples", eval.mae, eval.baseline_mae, eval.count);
    Ok(())
}

// --------------------------------------------------------------- run-task

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MountArg {
    Vertical,
    Horizontal,
}

impl From<MountArg> for Mount {
    fn from(m: MountArg) -> Self {
        match m {
            MountArg::Vertical => Mount::Vertical,
            MountArg::Horizontal => Mount::Horizontal,
        }
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskOverrides {
    /// circle, square, spiral, loop, wave, or star.
    #[arg(long)]
    pub trajectory: Option<String>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub depth_ref: Option<f64>,
    #[arg(long)]
    pub k_shear_xy: Option<f64>,
    #[arg(long)]
    pub k_shear_yaw: Option<f64>,
    #[arg(long)]
    pub k_depth: Option<f64>,
    #[arg(long)]
    pub step_limit: Option<f64>,
    #[arg(long, value_enum)]
    pub mount: Option<MountArg>,
    #[arg(long)]
    pub gravity_bias: Option<f64>,
    #[arg(long)]
    pub offset_x: Option<f64>,
    #[arg(long)]
    pub offset_y: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RunTaskArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Estimator checkpoint driving the servo; omitted = ground-truth
    /// oracle.
    #[arg(long)]
    pub estimator: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: TaskOverrides,
}

fn resolve_task(o: &TaskOverrides) -> Result<TaskConfig> {
    let name = o.trajectory.clone().unwrap_or_else(|| "circle".into());
    let trajectory = TrajectorySpec::named(&name).map_err(lib)?;
    let mut cfg = TaskConfig::tracking(trajectory);
    if let Some(v) = o.steps {
        cfg.steps = v;
    }
    if let Some(v) = o.depth_ref {
        cfg.depth_ref = v;
    }
    if let Some(v) = o.k_shear_xy {
        cfg.gains.k_shear_xy = v;
    }
    if let Some(v) = o.k_shear_yaw {
        cfg.gains.k_shear_yaw = v;
    }
    if let Some(v) = o.k_depth {
        cfg.gains.k_depth = v;
    }
    if let Some(v) = o.step_limit {
        cfg.gains.step_limit = v;
    }
    if let Some(m) = o.mount {
        cfg.mount = m.into();
    }
    if let Some(v) = o.gravity_bias {
        cfg.gravity_bias = v;
    }
    if let Some(v) = o.offset_x {
        cfg.initial_offset[0] = v;
    }
    if let Some(v) = o.offset_y {
        cfg.initial_offset[1] = v;
    }
    Ok(cfg)
}

/// Run one task and write its log and trajectory plot.
fn execute_task(
    cfg: &TaskConfig,
    estimator: Option<&mut Estimator>,
    out: &Path,
    stem: &str,
) -> Result<TaskLog> {
    let model = SensorModel::default_desk();
    let source = match estimator {
        Some(est) => ShearSource::Estimator(est),
        None => ShearSource::Oracle,
    };
    let log = run_task(cfg, &model, source).map_err(lib)?;
    let log_path = out.join(format!("{stem}.jsonl"));
    log.save_jsonl(&log_path).map_err(lib)?;
    let parsed = plot::parse_jsonl(&fs::read_to_string(&log_path)?)?;
    plot::draw_trajectories(&parsed)
        .save(out.join(format!("{stem}.png")))
        .context("writing trajectory plot")?;
    Ok(log)
}

pub fn run_task_cmd(args: RunTaskArgs) -> Result<()> {
    let file: TaskOverrides = load_file_overrides(&args.config)?;
    let o = merge_overrides!(file, args.overrides, {
        trajectory, steps, depth_ref, k_shear_xy, k_shear_yaw, k_depth,
        step_limit, mount, gravity_bias, offset_x, offset_y,
    });
    let cfg = resolve_task(&o)?;
    let out = out_dir(&args.out);
    init_run_dir(
        &out,
        "run-task",
        &serde_json::json!({ "task": cfg, "estimator": args.estimator }),
    )?;
    let mut est = match &args.estimator {
        Some(p) => Some(Estimator::load(p).map_err(lib)?),
        None => None,
    };
    let log = execute_task(&cfg, est.as_mut(), &out, "task")?;
    println!(
        "{}: error {:.3} ± {:.3} mm (max {:.3}), contact loss: {:?}",
        cfg.trajectory.name(),
        log.mean_error,
        log.std_error,
        log.max_error,
        log.first_contact_loss
    );
    Ok(())
}

// ------------------------------------------------------------------- plot

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Task log in JSON-lines form.
    #[arg(long)]
    pub log: PathBuf,
    /// Output PNG path.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn plot_cmd(args: PlotArgs) -> Result<()> {
    let text = fs::read_to_string(&args.log)
        .with_context(|| format!("reading {}", args.log.display()))?;
    let parsed = plot::parse_jsonl(&text)?;
    if let Some(dir) = args.out.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    plot::draw_trajectories(&parsed).save(&args.out).context("writing plot")?;
    println!("wrote {}", args.out.display());
    Ok(())
}

// -------------------------------------------------------------- reproduce

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Scale-down overrides for quick integration runs.
    #[arg(long)]
    pub train_samples: Option<usize>,
    #[arg(long)]
    pub val_samples: Option<usize>,
    #[arg(long)]
    pub translator_epochs: Option<usize>,
    #[arg(long)]
    pub estimator_epochs: Option<usize>,
    #[arg(long)]
    pub task_steps: Option<usize>,
    /// Servo the tasks from ground truth instead of the trained estimator.
    #[arg(long)]
    pub oracle_tasks: bool,
}

#[derive(Debug, Serialize)]
struct TaskSummary {
    trajectory: String,
    mount: String,
    mean_error: f64,
    std_error: f64,
    max_error: f64,
    first_contact_loss: Option<usize>,
}

/// The full desk-scale pipeline: collect, train and evaluate both
/// translators, train and evaluate the estimators, then run the tracking
/// and co-lifting tasks. Writes per-stage artifacts plus a summary table.
pub fn reproduce(args: ReproduceArgs) -> Result<()> {
    let preset = args.preset.unwrap_or(Preset::Desk);
    let out = out_dir(&args.out);
    let resolved = serde_json::json!({
        "preset": preset,
        "seed": args.seed,
        "train_samples": args.train_samples,
        "val_samples": args.val_samples,
        "translator_epochs": args.translator_epochs,
        "estimator_epochs": args.estimator_epochs,
        "task_steps": args.task_steps,
        "oracle_tasks": args.oracle_tasks,
    });
    init_run_dir(&out, "reproduce", &resolved)?;

    // Stage 1: dataset.
    let mut col = resolve_collection(&CollectOverrides {
        preset: Some(preset),
        seed: args.seed,
        train_samples: args.train_samples,
        val_samples: args.val_samples,
    });
    if let Some(s) = args.seed {
        col.seed = s;
    }
    let data_dir = out.join("dataset");
    fs::create_dir_all(&data_dir)?;
    eprintln!("[reproduce] collecting {} + {} samples", col.train_samples, col.val_samples);
    let manifest = collect_dataset(&col, &data_dir).map_err(lib)?;
    let train = load_dataset(&data_dir, &manifest, Split::Train).map_err(lib)?;
    let val = load_dataset(&data_dir, &manifest, Split::Val).map_err(lib)?;

    // Stage 2: translators.
    let mut translators = Vec::new();
    let mut translation_reports = serde_json::Map::new();
    for kind in [TranslatorKind::ShPix2pix, TranslatorKind::Pix2pix] {
        let name = match kind {
            TranslatorKind::ShPix2pix => "shpix2pix",
            TranslatorKind::Pix2pix => "pix2pix",
        };
        let mut cfg = match preset {
            Preset::Desk => TranslatorConfig::desk(kind),
            Preset::Paper => TranslatorConfig::paper_scale(kind),
        };
        if let Some(e) = args.translator_epochs {
            cfg.epochs = e;
        }
        if let Some(s) = args.seed {
            cfg.seed = s;
        }
        eprintln!("[reproduce] training {name} translator ({} epochs)", cfg.epochs);
        let dir = out.join(format!("translator_{name}"));
        fs::create_dir_all(&dir)?;
        let (mut translator, curves) = train_translator(&train, &val, &cfg).map_err(lib)?;
        translator.save(&dir.join("translator.ckpt")).map_err(lib)?;
        curves.save_csv(&dir.join("curves.csv")).map_err(lib)?;
        let eval = eval_translation(&mut translator, &val).map_err(lib)?;
        write_json(&dir.join("translation_eval.json"), &eval)?;
        translation_reports.insert(name.to_string(), serde_json::to_value(&eval)?);
        translators.push((name, translator, eval));
    }

    // Stage 3: estimators. One per translator on its generated images
    // (the decodability contrast), plus the task estimator on the
    // synthetic-real images with the full 6-dim target.
    let mut estimator_reports = serde_json::Map::new();
    let mut make_estimator = |name: &str,
                              dim: usize,
                              train_images: Vec<LabeledImage>,
                              val_images: Vec<LabeledImage>,
                              residuals: &[ndarray::Array2<f32>]|
     -> Result<Estimator> {
        let mut cfg = match preset {
            Preset::Desk => EstimatorConfig::desk(dim),
            Preset::Paper => EstimatorConfig::paper_scale(dim),
        };
        if let Some(e) = args.estimator_epochs {
            cfg.epochs = e;
        }
        if let Some(s) = args.seed {
            cfg.seed = s;
        }
        eprintln!("[reproduce] training {name} estimator ({} epochs)", cfg.epochs);
        let dir = out.join(format!("estimator_{name}"));
        fs::create_dir_all(&dir)?;
        let (mut est, curves) =
            train_estimator_aug(&train_images, &val_images, residuals, &cfg).map_err(lib)?;
        est.save(&dir.join("estimator.ckpt")).map_err(lib)?;
        curves.save_csv(&dir.join("curves.csv")).map_err(lib)?;
        let eval = eval_estimator(&mut est, &val_images).map_err(lib)?;
        write_json(&dir.join("estimator_eval.json"), &eval)?;
        plot::bar_chart(&eval.mae, &eval.baseline_mae)
            .save(dir.join("errors.png"))
            .context("writing errors.png")?;
        estimator_reports.insert(name.to_string(), serde_json::to_value(&eval)?);
        Ok(est)
    };

    // Decodability contrast: trained on generated images, evaluated on the
    // real domain the translators are imitating.
    let real_val_4 = build_labeled(&val, 4, ImageSource::Real, None)?;
    for (name, translator, _) in translators.iter_mut() {
        let images = translator.translate_samples(&train);
        // Source-gap residuals of the paired training set; see
        // `train_estimator_aug`.
        let residuals: Vec<ndarray::Array2<f32>> = train
            .iter()
            .zip(images.iter())
            .map(|(s, g)| &s.real.values - &g.values)
            .collect();
        let gen_train: Vec<LabeledImage> = train
            .iter()
            .zip(images)
            .map(|(s, image)| LabeledImage { image, target: estimator_target(&s.label, 4) })
            .collect();
        make_estimator(name, 4, gen_train, real_val_4.clone(), &residuals)?;
    }

    // Task estimator: real images, full 6-dim target.
    let mut task_est = make_estimator(
        "task",
        6,
        build_labeled(&train, 6, ImageSource::Real, None)?,
        build_labeled(&val, 6, ImageSource::Real, None)?,
        &[],
    )?;

    // Stage 4: servo tasks. Tracking on circle/square/spiral/loop,
    // co-lifting (horizontal mount, gravity bias) on wave/star.
    let tasks_dir = out.join("tasks");
    fs::create_dir_all(&tasks_dir)?;
    let mut task_summaries = Vec::new();
    let gravity_bias = 0.3;
    for (name, colift) in [
        ("circle", false),
        ("square", false),
        ("spiral", false),
        ("loop", false),
        ("wave", true),
        ("star", true),
    ] {
        let trajectory = TrajectorySpec::named(name).map_err(lib)?;
        let mut cfg = if colift {
            TaskConfig::colift(trajectory, gravity_bias)
        } else {
            TaskConfig::tracking(trajectory)
        };
        if let Some(s) = args.task_steps {
            cfg.steps = s;
        }
        eprintln!("[reproduce] running {name} task");
        let est = if args.oracle_tasks { None } else { Some(&mut task_est) };
        let log = execute_task(&cfg, est, &tasks_dir, name)?;
        task_summaries.push(TaskSummary {
            trajectory: name.to_string(),
            mount: if colift { "horizontal" } else { "vertical" }.to_string(),
            mean_error: log.mean_error,
            std_error: log.std_error,
            max_error: log.max_error,
            first_contact_loss: log.first_contact_loss,
        });
    }

    // Stage 5: summary.
    let summary = serde_json::json!({
        "dataset": { "train": manifest.train.len(), "val": manifest.val.len() },
        "translation": translation_reports,
        "estimators": estimator_reports,
        "tasks": task_summaries,
    });
    write_json(&out.join("summary.json"), &summary)?;
    fs::write(&out.join("summary.txt"), summary_table(&translators, &task_summaries))?;
    println!("reproduce complete; summary at {}", out.join("summary.txt").display());
    Ok(())
}

/// Plain-text table: per-variant translation metrics by contact type, then
/// task errors.
fn summary_table(
    translators: &[(&str, Translator, TranslationEval)],
    tasks: &[TaskSummary],
) -> String {
    let mut s = String::new();
    s.push_str("Sim-to-real image translation metrics (synthetic-real oracle)\n");
    s.push_str(&format!(
        "{:<12} {:<9} {:>8} {:>8}\n",
        "model", "contact", "MAPE", "SSIM"
    ));
    for (name, _, eval) in translators {
        s.push_str(&format!(
            "{:<12} {:<9} {:>8.4} {:>8.4}\n",
            name, "edge", eval.edge_mape, eval.edge_ssim
        ));
        s.push_str(&format!(
            "{:<12} {:<9} {:>8.4} {:>8.4}\n",
            name, "surface", eval.surface_mape, eval.surface_ssim
        ));
    }
    s.push_str("\nServo task errors (mm)\n");
    s.push_str(&format!(
        "{:<8} {:<11} {:>8} {:>8} {:>8}  contact loss\n",
        "task", "mount", "mean", "std", "max"
    ));
    for t in tasks {
        s.push_str(&format!(
            "{:<8} {:<11} {:>8.3} {:>8.3} {:>8.3}  {}\n",
            t.trajectory,
            t.mount,
            t.mean_error,
            t.std_error,
            t.max_error,
            t.first_contact_loss.map_or("none".to_string(), |v| format!("step {v}")),
        ));
    }
    s
}
