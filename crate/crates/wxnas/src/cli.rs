//! Command-line interface. Each subcommand runs one pipeline stage inside a
//! run directory and records itself in the run manifest.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use wxnas_core::dataset::Segment;
use wxnas_core::metrics::Persistence;
use wxnas_core::nas::{SearchBudget, SearchConfig};
use wxnas_core::nn::{Forecaster, TrainConfig, TrainedModel};
use wxnas_core::robustness::{conformal_calibrate, conformal_interval, empirical_coverage, permutation_importance};
use wxnas_core::series::CityRecord;
use wxnas_core::transfer::{pretrain, run_transfer_experiment, TransferConfig};
use wxnas_core::{LOOKBACK, N_FEATURES};

use crate::bench::{measure_latency, time_inference, BenchResult};
use crate::cities::{default_cities, load_cities, select_cities};
use crate::dataset_file::{save_dataset, DatasetBundle};
use crate::error::{AppError, Result};
use crate::executor::ThreadedExecutor;
use crate::ingest::{ArchiveClient, UreqTransport};
use crate::manifest::RunManifest;
use crate::model_file::{load_model, model_size, save_model};
use crate::pipeline::{
    climatology_rmse, evaluate_rmse, parse_arch, persistence_on, run_search, target_horizon_rmse, train_on_sources,
    DataSource, PreparedData, ARCH_ALIASES,
};
use crate::report::{self, ComparisonRow, FrontRow, ImportanceRow, TransferRow};

#[derive(Debug, Parser)]
#[command(name = "wxnas", version, about = "Multi-objective architecture search for compact hourly weather forecasters")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DataKind {
    Synthetic,
    Real,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GlobalArgs {
    /// Data source.
    #[arg(long, value_enum, default_value = "synthetic", global = true)]
    pub data: DataKind,
    /// City list file (TOML); defaults to the shipped 24-city list.
    #[arg(long, global = true)]
    pub cities: Option<PathBuf>,
    /// Restrict to these cities (comma-separated names).
    #[arg(long, value_delimiter = ',', global = true)]
    pub select: Vec<String>,
    /// Hours per synthetic city.
    #[arg(long, default_value_t = 8760, global = true)]
    pub hours: usize,
    /// First day of real data (UTC).
    #[arg(long, default_value = "2019-01-01", global = true)]
    pub start: NaiveDate,
    /// Last day of real data, inclusive (UTC).
    #[arg(long, default_value = "2024-12-31", global = true)]
    pub end: NaiveDate,
    /// Directory for cached archive downloads.
    #[arg(long, env = "WXNAS_CACHE_DIR", global = true)]
    pub cache_dir: Option<PathBuf>,
    /// Run directory; defaults to `<runs-dir>/<timestamp>_seed<seed>`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "runs", global = true)]
    pub runs_dir: PathBuf,
    #[arg(long, default_value_t = 42, global = true)]
    pub seed: u64,
    /// Concurrent candidate trainings during search.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, default_value_t = 50, global = true)]
    pub epochs: usize,
    #[arg(long, default_value_t = 10, global = true)]
    pub patience: usize,
    #[arg(long, default_value_t = 256, global = true)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3, global = true)]
    pub lr: f64,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Download (or generate) and cache every configured city.
    Fetch,
    /// Scale, window and split; writes dataset.gnds and scalers.json.
    Prepare,
    /// NSGA-II architecture search.
    Search(SearchArgs),
    /// Train named or explicit architectures on the pooled source cities.
    Train(TrainArgs),
    /// Transfer vs. scratch at several target data fractions.
    Transfer(TransferArgs),
    /// Split conformal calibration and coverage on target cities.
    Conformal(ConformalArgs),
    /// Permutation feature importance.
    Explain(ExplainArgs),
    /// Recursive multi-step forecast error by lead time.
    Horizon(HorizonArgs),
    /// Inference latency and artifact size.
    Bench(BenchArgs),
    /// Model comparison table plus every figure derivable from saved CSVs.
    Report(BenchArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SearchArgs {
    #[arg(long, default_value_t = 20)]
    pub pop: usize,
    #[arg(long, default_value_t = 10)]
    pub gens: usize,
    #[arg(long, default_value_t = 0.9)]
    pub crossover: f64,
    #[arg(long, default_value_t = 0.15)]
    pub mutation: f64,
    /// Share of pooled source-train windows each candidate trains on.
    #[arg(long, default_value_t = 0.10)]
    pub budget_fraction: f64,
    #[arg(long, default_value_t = 1024)]
    pub budget_min_windows: usize,
    #[arg(long, default_value_t = 20)]
    pub budget_epochs: usize,
    #[arg(long, default_value_t = 5)]
    pub budget_patience: usize,
    #[arg(long, default_value_t = 32)]
    pub budget_batch_size: usize,
    /// Evaluate every candidate even when its genome was seen before.
    #[arg(long)]
    pub no_cache: bool,
    /// Retrain the accuracy, balanced and efficiency representatives with the
    /// full protocol and save them.
    #[arg(long)]
    pub retrain: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    /// Alias (gru128x2, cnn128, cnn32, lstm64x2) or descriptor such as `gru64-dense32@0.2`.
    #[arg(long, default_value = "gru128x2")]
    pub arch: Vec<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArg {
    #[arg(long, default_value = "gru128x2")]
    pub arch: String,
    /// Use a saved artifact instead of `--arch`.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TransferArgs {
    #[arg(long, default_value = "gru128x2")]
    pub arch: String,
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.1,0.5,1.0")]
    pub fractions: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    /// Keep the first N layers fixed while fine-tuning.
    #[arg(long, default_value_t = 0)]
    pub freeze_layers: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ConformalArgs {
    #[command(flatten)]
    pub model: ModelArg,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ExplainArgs {
    #[command(flatten)]
    pub model: ModelArg,
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct HorizonArgs {
    #[command(flatten)]
    pub model: ModelArg,
    #[arg(long, default_value_t = 12)]
    pub horizon: usize,
    /// Cap on seed windows, spread evenly over the target test segments.
    #[arg(long, default_value_t = 2000)]
    pub max_windows: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BenchArgs {
    /// Architectures to include; trained when no saved artifact exists.
    #[arg(long)]
    pub arch: Vec<String>,
    /// Saved artifacts to include.
    #[arg(long)]
    pub model: Vec<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub warmup: usize,
    #[arg(long, default_value_t = 1000)]
    pub iters: usize,
}

/// Parses `args` and runs the chosen stage. Returns the process exit code:
/// 0 on success, 2 on usage errors, 1 when a stage fails.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let level = if cli.global.verbose { "info" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    let argv: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match execute(cli, argv) {
        Ok(dir) => {
            println!("{}", dir.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

struct Ctx {
    global: GlobalArgs,
    argv: Vec<String>,
    run_dir: PathBuf,
    cities: Vec<CityRecord>,
    source: DataSource,
    manifest: RunManifest,
}

fn default_cache_dir() -> PathBuf {
    if let Some(x) = std::env::var_os("XDG_CACHE_HOME") {
        return PathBuf::from(x).join("wxnas");
    }
    if let Some(h) = std::env::var_os("HOME") {
        return PathBuf::from(h).join(".cache").join("wxnas");
    }
    PathBuf::from(".wxnas-cache")
}

impl Ctx {
    fn new(global: GlobalArgs, argv: Vec<String>) -> Result<Self> {
        let all = match &global.cities {
            Some(p) => load_cities(p)?,
            None => default_cities(),
        };
        let cities = select_cities(&all, &global.select)?;
        let source = match global.data {
            DataKind::Synthetic => DataSource::Synthetic { hours: global.hours },
            DataKind::Real => DataSource::Real {
                start: global.start,
                end: global.end,
                cache_dir: global.cache_dir.clone().unwrap_or_else(default_cache_dir),
            },
        };
        let run_dir = global.out.clone().unwrap_or_else(|| {
            let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ");
            global.runs_dir.join(format!("{stamp}_seed{}", global.seed))
        });
        fs::create_dir_all(run_dir.join("models")).map_err(|e| AppError::io(&run_dir, e))?;
        let manifest = RunManifest::load_or_new(&run_dir, global.seed)?;
        Ok(Self { global, argv, run_dir, cities, source, manifest })
    }

    fn client(&self) -> Option<ArchiveClient> {
        matches!(self.source, DataSource::Real { .. })
            .then(|| ArchiveClient::new(Box::new(UreqTransport::default())))
    }

    fn data(&self) -> Result<PreparedData> {
        PreparedData::load(&self.source, &self.cities, self.client().as_ref())
    }

    fn train_config(&self) -> Result<TrainConfig> {
        let c = TrainConfig {
            learning_rate: self.global.lr,
            max_epochs: self.global.epochs,
            patience: self.global.patience,
            batch_size: self.global.batch_size,
            seed: self.global.seed,
            ..TrainConfig::default()
        };
        c.validate()?;
        Ok(c)
    }

    fn model_path(&self, id: &str) -> PathBuf {
        self.run_dir.join("models").join(format!("{id}.gnas"))
    }

    /// The saved model for `arch` in this run, trained and saved on first use.
    fn model_for_arch(&self, data: &PreparedData, arch: &str) -> Result<(String, TrainedModel, PathBuf)> {
        let spec = parse_arch(arch)?;
        let id = arch.trim().to_string();
        let path = self.model_path(&id);
        if path.exists() {
            let m = load_model(&path)?;
            if m.spec != spec {
                return Err(AppError::Config(format!("{} holds `{}`, not `{arch}`", path.display(), m.spec)));
            }
            return Ok((id, m, path));
        }
        log::info!("training {spec} on {} source cities", data.sources.len());
        let m = train_on_sources(data, &spec, &self.train_config()?)?;
        save_model(&m, &path)?;
        Ok((id, m, path))
    }

    fn model(&self, data: &PreparedData, sel: &ModelArg) -> Result<(String, TrainedModel, PathBuf)> {
        match &sel.model {
            Some(p) => {
                let id = p.file_stem().map_or_else(|| "model".into(), |s| s.to_string_lossy().into_owned());
                Ok((id, load_model(p)?, p.clone()))
            }
            None => self.model_for_arch(data, &sel.arch),
        }
    }

    fn finish(
        &mut self,
        stage: &str,
        config: impl Serialize,
        fingerprint: Option<String>,
        outputs: &[PathBuf],
    ) -> Result<PathBuf> {
        let cfg = serde_json::json!({ "global": &self.global, "data": &self.source, "stage": config });
        self.manifest.record(stage, self.argv.clone(), cfg, fingerprint, outputs, &self.run_dir);
        self.manifest.save(&self.run_dir)?;
        Ok(self.run_dir.clone())
    }
}

pub fn execute(cli: Cli, argv: Vec<String>) -> Result<PathBuf> {
    let mut ctx = Ctx::new(cli.global, argv)?;
    match cli.command {
        Command::Fetch => fetch(&mut ctx),
        Command::Prepare => prepare(&mut ctx),
        Command::Search(a) => search(&mut ctx, a),
        Command::Train(a) => train_stage(&mut ctx, a),
        Command::Transfer(a) => transfer(&mut ctx, a),
        Command::Conformal(a) => conformal(&mut ctx, a),
        Command::Explain(a) => explain(&mut ctx, a),
        Command::Horizon(a) => horizon(&mut ctx, a),
        Command::Bench(a) => bench(&mut ctx, a),
        Command::Report(a) => report_stage(&mut ctx, a),
    }
}

#[derive(Serialize)]
struct FetchRow {
    city: String,
    role: &'static str,
    climate_zone: String,
    rows: usize,
    missing_cells: usize,
}

fn fetch(ctx: &mut Ctx) -> Result<PathBuf> {
    let client = ctx.client();
    let mut rows = Vec::new();
    for c in &ctx.cities {
        let s = crate::pipeline::load_series(&ctx.source, c, client.as_ref())?;
        log::info!("{}: {} rows, {} missing cells", c.name, s.len(), s.missing_count());
        rows.push(FetchRow {
            city: c.name.clone(),
            role: c.role.as_str(),
            climate_zone: c.climate_zone.clone(),
            rows: s.len(),
            missing_cells: s.missing_count(),
        });
    }
    let out = report::write_csv(&ctx.run_dir.join("fetch.csv"), &rows)?;
    ctx.finish("fetch", serde_json::Value::Null, None, &[out])
}

#[derive(Serialize)]
struct ScalerJson<'a> {
    city: &'a str,
    min: &'a [f64],
    max: &'a [f64],
    degenerate: Vec<usize>,
}

fn prepare(ctx: &mut Ctx) -> Result<PathBuf> {
    let data = ctx.data()?;
    let mut bundle = DatasetBundle::new(LOOKBACK, N_FEATURES);
    bundle.push("source_train", data.source(Segment::Train)?)?;
    bundle.push("source_val", data.source(Segment::Val)?)?;
    bundle.push("source_test", data.source(Segment::Test)?)?;
    bundle.push("target_pool", data.target_pool()?)?;
    bundle.push("target_test", data.target_test()?)?;
    let ds_path = ctx.run_dir.join("dataset.gnds");
    save_dataset(&bundle, &ds_path)?;
    let scalers: Vec<ScalerJson> = data
        .scalers()
        .into_iter()
        .map(|s| ScalerJson { city: &s.city, min: &s.min, max: &s.max, degenerate: s.degenerate_features() })
        .collect();
    let sc_path = ctx.run_dir.join("scalers.json");
    crate::binio::write_atomic(&sc_path, serde_json::to_string_pretty(&scalers)?.as_bytes())?;
    for (name, ds) in &bundle.segments {
        log::info!("{name}: {} windows", ds.len());
    }
    let fp = data.fingerprint();
    ctx.finish("prepare", serde_json::Value::Null, Some(fp), &[ds_path, sc_path])
}

#[derive(Serialize)]
struct SearchSummary {
    unique_evaluations: usize,
    cache_hits: usize,
    front_size: usize,
    generations: usize,
}

fn search(ctx: &mut Ctx, a: SearchArgs) -> Result<PathBuf> {
    let data = ctx.data()?;
    let config = SearchConfig {
        population: a.pop,
        generations: a.gens,
        crossover_prob: a.crossover,
        mutation_prob: a.mutation,
        seed: ctx.global.seed,
        use_cache: !a.no_cache,
    };
    let budget = SearchBudget {
        fraction: a.budget_fraction,
        min_windows: a.budget_min_windows,
        train: TrainConfig {
            max_epochs: a.budget_epochs,
            patience: a.budget_patience,
            batch_size: a.budget_batch_size,
            learning_rate: ctx.global.lr,
            ..TrainConfig::default()
        },
    };
    budget.train.validate()?;
    let retrain_config = if a.retrain { Some(ctx.train_config()?) } else { None };
    let executor = match ctx.global.workers {
        Some(n) => ThreadedExecutor::new(n),
        None => ThreadedExecutor::from_available(),
    };
    let result = run_search(&data, &config, &budget, &executor)?;
    let front = result.front();
    let rows = report::front_rows(&front);
    let dir = ctx.run_dir.clone();
    let mut outputs = vec![report::emit_front_csv(&dir, &rows)?, report::emit_history(&dir, &result.history)?];
    outputs.extend(report::emit_pareto_plot(&dir, &rows)?);
    let summary = SearchSummary {
        unique_evaluations: result.unique_evaluations(),
        cache_hits: result.cache.hits,
        front_size: front.len(),
        generations: a.gens,
    };
    let sp = dir.join("search_summary.json");
    crate::binio::write_atomic(&sp, serde_json::to_string_pretty(&summary)?.as_bytes())?;
    outputs.push(sp);
    log::info!("search: {} unique trainings, {} cache hits", summary.unique_evaluations, summary.cache_hits);

    if let Some(cfg) = retrain_config {
        if let Some(reps) = wxnas_core::nas::representatives(&front) {
            for (tag, idx) in [("accuracy", reps.accuracy), ("balanced", reps.balanced), ("efficiency", reps.efficiency)] {
                let spec = front[idx].genome.decode();
                let path = ctx.model_path(&format!("nas-{tag}"));
                let m = train_on_sources(&data, &spec, &cfg)?;
                save_model(&m, &path)?;
                outputs.push(path);
            }
        }
    }
    let fp = data.fingerprint();
    ctx.finish("search", &a, Some(fp), &outputs)
}

#[derive(Serialize)]
struct CurveRow {
    epoch: usize,
    train_loss: f64,
    val_rmse: f64,
}

#[derive(Serialize)]
struct TrainRow {
    model: String,
    descriptor: String,
    params: usize,
    epochs_run: usize,
    best_epoch: usize,
    best_val_rmse: f64,
    target_test_rmse: f64,
    size_bytes: u64,
}

fn train_stage(ctx: &mut Ctx, a: TrainArgs) -> Result<PathBuf> {
    let data = ctx.data()?;
    let test = data.target_test()?;
    let mut outputs = Vec::new();
    let mut rows = Vec::new();
    for arch in &a.arch {
        let (id, m, path) = ctx.model_for_arch(&data, arch)?;
        let curve: Vec<CurveRow> = m
            .meta
            .train_loss
            .iter()
            .zip(&m.meta.val_rmse)
            .enumerate()
            .map(|(i, (&l, &v))| CurveRow { epoch: i + 1, train_loss: l, val_rmse: v })
            .collect();
        outputs.push(report::write_csv(&ctx.run_dir.join(format!("curve_{id}.csv")), &curve)?);
        rows.push(TrainRow {
            model: id,
            descriptor: m.spec.descriptor(),
            params: m.param_count(),
            epochs_run: m.meta.epochs_run,
            best_epoch: m.meta.best_epoch,
            best_val_rmse: m.meta.best_val_rmse,
            target_test_rmse: evaluate_rmse(&m, &test)?,
            size_bytes: model_size(&path)?,
        });
        outputs.push(path);
    }
    outputs.push(report::write_csv(&ctx.run_dir.join("train.csv"), &rows)?);
    let fp = data.fingerprint();
    ctx.finish("train", &a, Some(fp), &outputs)
}

fn transfer(ctx: &mut Ctx, a: TransferArgs) -> Result<PathBuf> {
    let data = ctx.data()?;
    let spec = parse_arch(&a.arch)?;
    let path = ctx.model_path(&format!("pretrained-{}", a.arch.trim()));
    let pretrained = if path.exists() {
        load_model(&path)?
    } else {
        let cfg = ctx.train_config()?;
        let mut m = pretrain(&spec, data.dims(), &data.source(Segment::Train)?, &data.source(Segment::Val)?, &cfg)?;
        m.scaler_ids = data.source_scaler_ids();
        save_model(&m, &path)?;
        m
    };
    let config = TransferConfig {
        fractions: a.fractions.clone(),
        trials: a.trials,
        seed: ctx.global.seed,
        train: TrainConfig { frozen_layers: a.freeze_layers, ..ctx.train_config()? },
    };
    let rep = run_transfer_experiment(&pretrained, &data.targets, &config)?;
    let mut outputs = report::emit_transfer_report(&ctx.run_dir, &report::transfer_rows(&rep))?;
    outputs.push(path);
    let fp = data.fingerprint();
    ctx.finish("transfer", &a, Some(fp), &outputs)
}

fn conformal(ctx: &mut Ctx, a: ConformalArgs) -> Result<PathBuf> {
    let data = ctx.data()?;
    let (id, m, _) = ctx.model(&data, &a.model)?;
    let (cal, eval) = data.calibration_split()?;
    let calib = conformal_calibrate(&m, &cal, a.alpha)?;
    let pred = m.predict(&eval.x, eval.len())?;
    let cov = empirical_coverage(&conformal_interval(&pred, &calib)?, &eval.y)?;
    log::info!("{id}: macro coverage {:.4}, mean width {:.4}", cov.macro_average, cov.mean_width);
    let out = report::emit_coverage(&ctx.run_dir, &[(id, cal.len(), eval.len(), a.alpha, cov)])?;
    let fp = data.fingerprint();
    ctx.finish("conformal", &a, Some(fp), &[out])
}

fn explain(ctx: &mut Ctx, a: ExplainArgs) -> Result<PathBuf> {
    let data = ctx.data()?;
    let (_, m, _) = ctx.model(&data, &a.model)?;
    let test = data.target_test()?;
    let rep = permutation_importance(&m, &test, a.repeats, ctx.global.seed)?;
    let outputs = report::emit_importance(&ctx.run_dir, &report::importance_rows(&rep))?;
    let fp = data.fingerprint();
    ctx.finish("explain", &a, Some(fp), &outputs)
}

fn horizon(ctx: &mut Ctx, a: HorizonArgs) -> Result<PathBuf> {
    let data = ctx.data()?;
    let (_, m, _) = ctx.model(&data, &a.model)?;
    let (rmse, n) = target_horizon_rmse(&m, &data, a.horizon, a.max_windows)?;
    log::info!("horizon: {n} seed windows");
    let out = report::emit_horizon(&ctx.run_dir, &rmse)?;
    let fp = data.fingerprint();
    ctx.finish("horizon", &a, Some(fp), &[out])
}

/// Models named by `--model` and `--arch`; with neither, every artifact
/// already in the run's model directory, else the named aliases.
fn collect_models(ctx: &Ctx, data: &PreparedData, a: &BenchArgs) -> Result<Vec<(String, TrainedModel, PathBuf)>> {
    let mut out = Vec::new();
    for p in &a.model {
        let sel = ModelArg { arch: String::new(), model: Some(p.clone()) };
        out.push(ctx.model(data, &sel)?);
    }
    let mut archs = a.arch.clone();
    if archs.is_empty() && a.model.is_empty() {
        let mut saved: Vec<PathBuf> = fs::read_dir(ctx.run_dir.join("models"))
            .map_err(|e| AppError::io(ctx.run_dir.join("models"), e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "gnas"))
            .collect();
        saved.sort();
        for p in saved {
            let sel = ModelArg { arch: String::new(), model: Some(p) };
            out.push(ctx.model(data, &sel)?);
        }
        if out.is_empty() {
            archs = ARCH_ALIASES.iter().map(|(a, _)| a.to_string()).collect();
        }
    }
    for arch in &archs {
        out.push(ctx.model_for_arch(data, arch)?);
    }
    Ok(out)
}

fn bench(ctx: &mut Ctx, a: BenchArgs) -> Result<PathBuf> {
    let data = ctx.data()?;
    let models = collect_models(ctx, &data, &a)?;
    // Timed serially, after all training has finished.
    let results = models
        .iter()
        .map(|(id, m, p)| measure_latency(id, m, Some(p), a.warmup, a.iters))
        .collect::<Result<Vec<BenchResult>>>()?;
    let out = report::emit_bench(&ctx.run_dir, &results)?;
    ctx.finish("bench", &a, None, &[out])
}

fn report_stage(ctx: &mut Ctx, a: BenchArgs) -> Result<PathBuf> {
    let data = ctx.data()?;
    let test = data.target_test()?;
    let models = collect_models(ctx, &data, &a)?;
    let mut rows = Vec::new();
    for (id, m, p) in &models {
        let lat = time_inference(m, a.warmup, a.iters)?;
        rows.push(ComparisonRow {
            model: id.clone(),
            params: m.param_count(),
            rmse: evaluate_rmse(m, &test)?,
            latency_ms: Some(lat.mean_ms),
            size_bytes: Some(model_size(p)?),
        });
    }
    let persistence = Persistence { dims: data.dims() };
    rows.push(ComparisonRow {
        model: "persistence".into(),
        params: 0,
        rmse: persistence_on(&test)?,
        latency_ms: Some(time_inference(&persistence, a.warmup, a.iters)?.mean_ms),
        size_bytes: None,
    });
    rows.push(ComparisonRow {
        model: "climatology".into(),
        params: 0,
        rmse: climatology_rmse(&data)?,
        latency_ms: None,
        size_bytes: None,
    });
    let dir = ctx.run_dir.clone();
    let mut outputs = report::emit_comparison_report(&dir, &rows)?;
    outputs.extend(regenerate_figures(&dir)?);
    let fp = data.fingerprint();
    ctx.finish("report", &a, Some(fp), &outputs)
}

/// Redraws figures from CSVs left by earlier stages.
pub fn regenerate_figures(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let front = dir.join("front.csv");
    if front.exists() {
        let rows: Vec<FrontRow> = report::read_csv(&front)?;
        if !rows.is_empty() {
            out.extend(report::emit_pareto_plot(dir, &rows)?);
        }
    }
    let transfer = dir.join("transfer.csv");
    if transfer.exists() {
        let rows: Vec<TransferRow> = report::read_csv(&transfer)?;
        out.extend(report::emit_transfer_report(dir, &rows)?);
    }
    let importance = dir.join("importance.csv");
    if importance.exists() {
        let rows: Vec<ImportanceRow> = report::read_csv(&importance)?;
        out.extend(report::emit_importance(dir, &rows)?);
    }
    Ok(out)
}
