mod render;

use std::io::{IsTerminal, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use creditlens_core::data::{apply_class_weights, load_dataset, load_schema, stratified_folds, Cell, Dataset};
use creditlens_core::eval::{evaluate, EvalConfig};
use creditlens_core::explain::{Engine, ExplainSettings};
use creditlens_core::riskmodel::{load_model, train, TrainConfig};
use creditlens_core::rules::cache::{build_rule_cache, synthetic_queries, training_queries, CacheBuildReport};
use creditlens_core::rules::{RuleCache, SolveOptions};
use creditlens_core::synth;
use creditlens_service::{core_exit_code, parse_seconds, Config, StartupError};
use serde::Serialize;
use tracing::info;
use tracing_subscriber::EnvFilter;

const EXIT_USAGE: u8 = 64;

/// Interpretable two-layer credit risk models with factor, rule and case
/// explanations.
#[derive(Debug, Parser)]
#[command(name = "creditlens", version)]
struct Cli {
    /// Output format for results written to stdout.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    /// JSON payloads, identical to the service responses.
    Structured,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a model and write it as TOML.
    Train(TrainArgs),
    /// Stratified k-fold cross validation.
    Eval(EvalArgs),
    /// Score one observation and show the full calculation.
    Predict(PredictArgs),
    /// Factors, a consistent rule and similar cases for one observation.
    Explain(ExplainArgs),
    /// Precompute rules for every training row; resumes an interrupted build.
    Cache(CacheArgs),
    /// Run the HTTP API.
    Serve(ServeArgs),
    /// Write the synthetic FICO-like dataset and its schema.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Schema TOML declaring features, subscales and the label.
    #[arg(long)]
    schema: PathBuf,
    /// CSV with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Weight of positive (high-risk) rows; negative rows weigh 1.
    #[arg(long, default_value_t = 1.0)]
    class_weight: f64,
}

#[derive(Debug, Args)]
struct HyperArgs {
    /// L1 penalty on the interval columns.
    #[arg(long, default_value_t = TrainConfig::default().lambda)]
    lambda: f64,
    /// Information-gain thresholds learned per numeric feature.
    #[arg(long, default_value_t = TrainConfig::default().max_thresholds)]
    max_thresholds: usize,
    /// Joint fine-tuning epochs after layer-wise training; 0 skips it.
    #[arg(long, default_value_t = 0)]
    fine_tune_epochs: usize,
    /// Fine-tuning step size.
    #[arg(long, default_value_t = TrainConfig::default().fine_tune_lr)]
    fine_tune_lr: f64,
}

impl HyperArgs {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            lambda: self.lambda,
            max_thresholds: self.max_thresholds,
            fine_tune_epochs: self.fine_tune_epochs,
            fine_tune_lr: self.fine_tune_lr,
            ..TrainConfig::default()
        }
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    hyper: HyperArgs,
    /// Where to write the model.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    hyper: HyperArgs,
    /// Number of folds.
    #[arg(long, short, default_value_t = 10)]
    k: usize,
    /// Fold assignment seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Learn thresholds once on all rows instead of per training split.
    #[arg(long)]
    fixed_scheme: bool,
    /// Also write per-fold metrics as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Trained model TOML.
    #[arg(long, env = "MODEL_PATH")]
    model: PathBuf,
    /// Training data the explanations draw rules and cases from.
    #[arg(long, env = "DATA_PATH")]
    data: PathBuf,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// JSON object mapping every feature to its value; `-` reads stdin.
    #[arg(long)]
    observation: Option<PathBuf>,
    /// Row of the training data, counted from 0.
    #[arg(long)]
    row: Option<usize>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    source: Source,
}

#[derive(Debug, Args)]
struct SolverArgs {
    /// Time limit in seconds for one explanation's rule search.
    #[arg(long, env = "SOLVER_TIME_LIMIT_SECS", value_parser = seconds)]
    time_limit: Option<Duration>,
}

#[derive(Debug, Args)]
struct ExplainArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    source: Source,
    /// Rule cache built by `creditlens cache`.
    #[arg(long, env = "CACHE_PATH")]
    cache: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
    /// Rules must cover more than this many people.
    #[arg(long, env = "MIN_SUPPORT")]
    min_support: Option<usize>,
    /// Also list this many risk-reducing terms.
    #[arg(long, default_value_t = 0)]
    protective: usize,
    /// Similar cases to show.
    #[arg(long, default_value_t = ExplainSettings::default().n_cases)]
    cases: usize,
    /// Leave true outcomes out of the case table.
    #[arg(long)]
    hide_labels: bool,
}

#[derive(Debug, Args)]
struct CacheArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Cache file; an existing one is resumed.
    #[arg(long, short, env = "CACHE_PATH")]
    out: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
    /// Stop after solving this many pending queries.
    #[arg(long)]
    budget: Option<usize>,
    /// Also cache this many synthetic observations drawn from the feature marginals.
    #[arg(long, default_value_t = 0)]
    synthetic: usize,
    /// Seed for the synthetic observations.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct ServeArgs {
    /// Listen address.
    #[arg(long, env = "BIND_ADDR", default_value = creditlens_service::DEFAULT_BIND_ADDR)]
    bind: String,
    /// Trained model TOML.
    #[arg(long, env = "MODEL_PATH", default_value = creditlens_service::DEFAULT_MODEL_PATH)]
    model: PathBuf,
    /// Training data for rules and cases.
    #[arg(long, env = "DATA_PATH", default_value = creditlens_service::DEFAULT_DATA_PATH)]
    data: PathBuf,
    /// Rule cache built for this model and data.
    #[arg(long, env = "CACHE_PATH")]
    cache: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
    /// Rules must cover more than this many people.
    #[arg(long, env = "MIN_SUPPORT")]
    min_support: Option<usize>,
    /// Browser origin allowed by CORS; any origin when unset.
    #[arg(long, env = "CORS_ORIGIN")]
    cors_origin: Option<String>,
    /// Static files served under /ui/.
    #[arg(long, env = "UI_DIR", default_value = creditlens_service::DEFAULT_UI_DIR)]
    ui_dir: PathBuf,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Number of rows to generate.
    #[arg(long, default_value_t = 10_000)]
    rows: usize,
    /// Generator seed; the shipped demo data uses the default.
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    /// Where to write the CSV.
    #[arg(long, short)]
    out: PathBuf,
    /// Where to write the matching schema.
    #[arg(long)]
    schema_out: Option<PathBuf>,
}

fn seconds(text: &str) -> Result<Duration, String> {
    parse_seconds(text).ok_or_else(|| format!("{text:?} is not a positive number of seconds"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}

/// The error chain, leaving out causes a message already repeats.
fn describe(e: &anyhow::Error) -> String {
    let mut msg = e.to_string();
    for cause in e.chain().skip(1) {
        let text = cause.to_string();
        if !msg.contains(&text) {
            msg.push_str(": ");
            msg.push_str(&text);
        }
    }
    msg
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(s) = cause.downcast_ref::<StartupError>() {
            return s.exit_code() as u8;
        }
        if let Some(c) = cause.downcast_ref::<creditlens_core::Error>() {
            return core_exit_code(c) as u8;
        }
    }
    1
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let format = cli.format;
    match cli.command {
        Command::Train(a) => cmd_train(a, format),
        Command::Eval(a) => cmd_eval(a, format),
        Command::Predict(a) => cmd_predict(a, format),
        Command::Explain(a) => cmd_explain(a, format),
        Command::Cache(a) => cmd_cache(a, format),
        Command::Serve(a) => cmd_serve(a),
        Command::Synth(a) => cmd_synth(a),
    }
}

fn emit<T: Serialize>(value: &T, format: Format, text: impl FnOnce() -> String) -> anyhow::Result<()> {
    let out = match format {
        Format::Structured => serde_json::to_string_pretty(value)? + "\n",
        Format::Text => text(),
    };
    std::io::stdout().write_all(out.as_bytes())?;
    Ok(())
}

fn load_training(a: &DataArgs) -> anyhow::Result<Dataset> {
    let schema = load_schema(&a.schema)?;
    let data = load_dataset(&a.data, &schema)?;
    Ok(if a.class_weight == 1.0 {
        data
    } else {
        apply_class_weights(&data, a.class_weight, 1.0)?
    })
}

fn cmd_train(a: TrainArgs, format: Format) -> anyhow::Result<()> {
    let data = load_training(&a.data)?;
    let cfg = a.hyper.config();
    info!(rows = data.len(), lambda = cfg.lambda, max_thresholds = cfg.max_thresholds, "training");
    let started = Instant::now();
    let (model, report) = train(&data, &cfg)?;
    for s in &report.subscales {
        info!(
            subscale = %s.name,
            iterations = s.report.iterations,
            objective = s.report.objective,
            converged = s.report.converged,
            "subscale fitted"
        );
    }
    let second = &report.second_layer;
    info!(iterations = second.iterations, objective = second.objective, converged = second.converged, "second layer fitted");
    if cfg.fine_tune_epochs == 0 {
        info!("fine-tuning skipped (--fine-tune-epochs 0)");
    } else {
        for (epoch, v) in report.fine_tune_trace.iter().enumerate() {
            info!(epoch, objective = v, "fine-tune");
        }
    }
    model.save(&a.out)?;
    info!(path = %a.out.display(), fingerprint = %model.fingerprint(), seconds = started.elapsed().as_secs_f64(), "model written");
    emit(&report, format, || render::train_report(&report, &model.fingerprint(), &a.out))
}

fn cmd_eval(a: EvalArgs, format: Format) -> anyhow::Result<()> {
    let data = load_training(&a.data)?;
    let folds = stratified_folds(&data, a.k, a.seed)?;
    let cfg = EvalConfig {
        train: a.hyper.config(),
        fixed_scheme: a.fixed_scheme,
    };
    let started = Instant::now();
    let report = evaluate(&data, &folds, &cfg)?;
    info!(seconds = started.elapsed().as_secs_f64(), "cross validation done");
    if let Some(path) = &a.csv {
        std::fs::write(path, report.to_csv()).with_context(|| format!("writing {}", path.display()))?;
    }
    emit(&report, format, || report.to_text())
}

fn load_engine(a: &ModelArgs) -> anyhow::Result<Engine> {
    let model = load_model(&a.model)?;
    let data = load_dataset(&a.data, &model.schema)?;
    Ok(Engine::with_default_threshold(model, data)?)
}

fn observation(engine: &Engine, source: &Source) -> anyhow::Result<Vec<Cell>> {
    if let Some(i) = source.row {
        let Some(row) = engine.dataset.rows.get(i) else {
            return Err(creditlens_core::Error::InvalidArgument(format!(
                "row {i} is out of range for {} rows",
                engine.dataset.len()
            ))
            .into());
        };
        return Ok(row.clone());
    }
    let path = source.observation.as_deref().expect("clap requires one source");
    let text = if path == Path::new("-") {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        s
    } else {
        std::fs::read_to_string(path).map_err(|e| creditlens_core::Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?
    };
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| creditlens_core::Error::Parse(format!("observation: {e}")))?;
    // accept the service request shape as well as a bare feature map
    let map = match value.get("observation") {
        Some(serde_json::Value::Object(m)) => m.clone(),
        _ => match value {
            serde_json::Value::Object(m) => m,
            _ => bail!(creditlens_core::Error::Parse("observation must be a JSON object".into())),
        },
    };
    Ok(engine.observation(&map)?)
}

fn cmd_predict(a: PredictArgs, format: Format) -> anyhow::Result<()> {
    let engine = load_engine(&a.model)?;
    let x = observation(&engine, &a.source)?;
    let p = engine.predict(&x)?;
    emit(&p, format, || render::prediction(&p))
}

fn cmd_explain(a: ExplainArgs, format: Format) -> anyhow::Result<()> {
    let mut engine = load_engine(&a.model)?;
    if let Some(path) = &a.cache {
        engine.attach_cache(path)?;
    }
    let x = observation(&engine, &a.source)?;
    let mut settings = ExplainSettings {
        protective: a.protective,
        n_cases: a.cases,
        show_labels: !a.hide_labels,
        ..ExplainSettings::default()
    };
    if let Some(t) = a.solver.time_limit {
        settings.rules.solve.time_limit = t;
    }
    if let Some(m) = a.min_support {
        settings.rules.min_support = m;
        settings.rules.fallback_support = settings.rules.fallback_support.min(m);
    }
    let breakdown = engine.predict(&x)?;
    let e = engine.explain(&x, &settings)?;
    if let Some(w) = &e.warning {
        tracing::warn!("{w}");
    }
    emit(&e, format, || render::explanation(&breakdown, &e))
}

fn cmd_cache(a: CacheArgs, format: Format) -> anyhow::Result<()> {
    let engine = load_engine(&a.model)?;
    let ctx = &engine.ctx;
    let cache = RuleCache::open(&a.out, ctx)?;
    let mut queries = training_queries(ctx);
    if a.synthetic > 0 {
        queries.extend(synthetic_queries(&engine.model, &engine.dataset, ctx, a.synthetic, a.seed));
    }
    let opts = SolveOptions {
        time_limit: a.solver.time_limit.unwrap_or(SolveOptions::default().time_limit),
    };
    let already = cache.done_count();
    info!(queries = queries.len(), already_done = already, path = %a.out.display(), "building rule cache");
    let mut total = CacheBuildReport::default();
    let mut budget = a.budget;
    let started = Instant::now();
    // chunks keep progress visible and bound the work lost to an interrupt
    for chunk in queries.chunks(256) {
        if budget == Some(0) {
            total.remaining += chunk.iter().filter(|(k, _)| !cache.is_done(k)).count();
            continue;
        }
        let r = build_rule_cache(ctx, &cache, chunk, &opts, budget)?;
        let spent = r.solved + r.infeasible + r.timeouts;
        budget = budget.map(|b| b - spent);
        total.solved += r.solved;
        total.infeasible += r.infeasible;
        total.timeouts += r.timeouts;
        total.already_done += r.already_done;
        total.remaining += r.remaining;
        if spent > 0 {
            info!(
                done = total.already_done + total.solved + total.infeasible + total.timeouts,
                of = queries.len(),
                seconds = started.elapsed().as_secs_f64(),
                "progress"
            );
        }
    }
    emit(&total, format, || render::cache_report(&total, cache.len(), &a.out))
}

fn cmd_serve(a: ServeArgs) -> anyhow::Result<()> {
    let mut cfg = Config {
        bind_addr: a
            .bind
            .parse()
            .map_err(|_| StartupError::Config(format!("{:?} is not a socket address", a.bind)))?,
        model_path: a.model,
        data_path: a.data,
        cache_path: a.cache,
        cors_origin: a.cors_origin,
        ui_dir: a.ui_dir,
        ..Config::default()
    };
    if let Some(t) = a.solver.time_limit {
        cfg.solver_time_limit = t;
    }
    if let Some(m) = a.min_support {
        cfg.min_support = m;
    }
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(creditlens_service::serve(cfg))?;
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> anyhow::Result<()> {
    let data = synth::generate(a.rows, a.seed)?;
    let file = std::fs::File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    data.write_csv(std::io::BufWriter::new(file))?;
    if let Some(path) = &a.schema_out {
        std::fs::write(path, synth::FICO_SCHEMA_TOML).with_context(|| format!("writing {}", path.display()))?;
    }
    info!(rows = a.rows, seed = a.seed, path = %a.out.display(), "synthetic data written");
    Ok(())
}
