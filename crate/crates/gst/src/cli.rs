//! The `gst` command line.
//!
//! Exit status: 0 on success, 2 on a usage error, 1 on any runtime failure.
//! Failures print a single `error[<category>]: <message>` line on stderr.

use std::ffi::OsString;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gst_core::env::{generate_corpus, EnvConfig, GameRecord, Split, Vocabulary};
use gst_core::eval::{guesser_only_records, EvalReport, EvalSplit};
use gst_core::losses::Terms;
use gst_core::model::{ModelKind, ModelSpec};
use gst_core::tracker::{ConcatMode, StopPolicy};
use gst_core::train::{ablate, train_rl, train_sl, AblationCell, AblationGrid, AblationSettings};
use toml::Value;

use crate::checkpoint;
use crate::config::{self, parse_value, RunConfig};
use crate::corpus::{self, CorpusHeader, SCHEMA_VERSION};
use crate::error::{write, Error, Result};
use crate::inspect;
use crate::manifest::RunManifest;
use crate::metrics::{metrics_line, MetricsLog};
use crate::parallel;
use crate::report;
use crate::server::{self, AppState, ServerConfig};

#[derive(Parser)]
#[command(name = "gst", version, about = "Guessing state tracking for GuessWhat?!-style games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate train/val/test corpora, or convert a GuessWhat?! file.
    GenData(GenData),
    /// Supervised training on a generated corpus.
    TrainSl(TrainSl),
    /// Self-play refinement of a checkpoint.
    TrainRl(TrainRl),
    /// Score a checkpoint.
    Eval(Eval),
    /// Train and score a grid of loss and architecture variants.
    Ablate(Ablate),
    /// Print a recorded game round by round.
    Inspect(Inspect),
    /// Host games with a human Oracle over HTTP.
    Serve(Serve),
}

#[derive(Args, Clone)]
struct Common {
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Override any config key, e.g. `--set train.sl.lr=0.001`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct GenData {
    #[command(flatten)]
    common: Common,
    /// Training games.
    #[arg(long)]
    games: Option<usize>,
    #[arg(long)]
    val_games: Option<usize>,
    #[arg(long)]
    test_games: Option<usize>,
    /// Convert this GuessWhat?! JSON-lines file instead of generating.
    #[arg(long)]
    guesswhat: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Gst,
    Baseline,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConcatArg {
    Symmetric,
    Product,
    Pair,
}

impl From<ConcatArg> for ConcatMode {
    fn from(c: ConcatArg) -> Self {
        match c {
            ConcatArg::Symmetric => ConcatMode::Symmetric,
            ConcatArg::Product => ConcatMode::Product,
            ConcatArg::Pair => ConcatMode::Pair,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TermsArg {
    Full,
    NoEsPs,
    NoIs,
    Ps,
}

impl From<TermsArg> for Terms {
    fn from(t: TermsArg) -> Self {
        match t {
            TermsArg::Full => Terms::FULL,
            TermsArg::NoEsPs => Terms::WITHOUT_ES_PS,
            TermsArg::NoIs => Terms::WITHOUT_IS,
            TermsArg::Ps => Terms::PS_ONLY,
        }
    }
}

#[derive(Args)]
struct TrainSl {
    #[command(flatten)]
    common: Common,
    /// Directory written by gen-data.
    #[arg(long)]
    data: PathBuf,
    /// Checkpoint directory to create.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    model: Option<KindArg>,
    #[arg(long, value_enum)]
    concat: Option<ConcatArg>,
    #[arg(long, value_enum)]
    terms: Option<TermsArg>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Offset of the incremental term.
    #[arg(long = "c")]
    c: Option<f64>,
}

#[derive(Args)]
struct TrainRl {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    games_per_epoch: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    #[value(alias = "new-game")]
    Newgame,
    #[value(alias = "new-object")]
    Newobject,
    /// Guesser alone on the recorded test dialogues.
    Test,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Greedy,
    Sample,
}

#[derive(Args)]
struct Eval {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long, value_enum, default_value = "newgame")]
    split: SplitArg,
    /// Number of games.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Corpus directory; needed for the newobject and test splits.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Stop asking once the top belief reaches this value.
    #[arg(long, conflicts_with = "gain_threshold")]
    stop_threshold: Option<f64>,
    /// Stop asking once the KL gain of a round falls below this value.
    #[arg(long)]
    gain_threshold: Option<f64>,
    /// Write report.json, records.jsonl and belief_curve.csv here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the report as one JSON line instead of a table.
    #[arg(long)]
    json: bool,
    #[arg(long, default_value = "1")]
    jobs: NonZeroUsize,
}

#[derive(Args)]
struct Ablate {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long, value_enum, value_delimiter = ',')]
    terms: Option<Vec<TermsArg>>,
    #[arg(long, value_enum, value_delimiter = ',')]
    concats: Option<Vec<ConcatArg>>,
    #[arg(long, value_delimiter = ',')]
    cs: Option<Vec<f64>>,
    #[arg(long)]
    no_baseline: bool,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Args)]
struct Inspect {
    /// Records file written by `eval --out`.
    trace: PathBuf,
    /// Game id; all games when omitted.
    #[arg(long)]
    game: Option<u64>,
}

#[derive(Args)]
struct Serve {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    port: Option<u16>,
    #[arg(long, default_value = "127.0.0.1")]
    host: std::net::IpAddr,
    #[arg(long)]
    stop_threshold: Option<f64>,
    /// Directory of the built web client.
    #[arg(long = "static")]
    static_dir: Option<PathBuf>,
    #[arg(long)]
    max_sessions: Option<usize>,
    #[arg(long)]
    idle_timeout_secs: Option<u64>,
}

fn usage_error(msg: &str) -> i32 {
    eprintln!("error[usage]: {}", one_line(msg));
    2
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Runs one command; returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            return usage_error(first);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(CliError::Usage(m)) => usage_error(&m),
        Err(CliError::Run(e)) => {
            eprintln!("error[{}]: {}", e.category(), one_line(&e.to_string()));
            1
        }
    }
}

enum CliError {
    Usage(String),
    Run(Error),
}

impl<E: Into<Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Run(e.into())
    }
}

type CliResult<T = ()> = std::result::Result<T, CliError>;

fn resolve(common: &Common, mut flags: Vec<(String, Value)>) -> CliResult<RunConfig> {
    let mut overrides = Vec::new();
    for s in &common.set {
        let (k, v) = s.split_once('=').ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got {s:?}")))?;
        overrides.push((k.trim().to_owned(), parse_value(v.trim())));
    }
    if let Some(seed) = common.seed {
        flags.push(("seed".into(), Value::Integer(seed as i64)));
    }
    overrides.extend(flags);
    Ok(config::load(common.config.as_deref(), &overrides)?)
}

fn int(v: usize) -> Value {
    Value::Integer(v as i64)
}

fn terms_value(t: Terms) -> Value {
    Value::try_from(t).expect("terms serialize")
}

fn dispatch(command: Command) -> CliResult {
    match command {
        Command::GenData(a) => gen_data(a),
        Command::TrainSl(a) => cmd_train_sl(a),
        Command::TrainRl(a) => cmd_train_rl(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Ablate(a) => cmd_ablate(a),
        Command::Inspect(a) => cmd_inspect(a),
        Command::Serve(a) => cmd_serve(a),
    }
}

fn gen_data(a: GenData) -> CliResult {
    let mut flags = Vec::new();
    for (key, v) in [("data.train_games", a.games), ("data.val_games", a.val_games), ("data.test_games", a.test_games)] {
        if let Some(v) = v {
            flags.push((key.to_owned(), int(v)));
        }
    }
    let cfg = resolve(&a.common, flags)?;
    let vocab = Vocabulary::standard();
    let mut manifest = RunManifest::new("gen-data", &cfg);
    if let Some(src) = &a.guesswhat {
        let games = corpus::load_guesswhat(src, &vocab, cfg.env.num_categories)?;
        let header = CorpusHeader { schema_version: SCHEMA_VERSION, split: None, seed: None, env: None, games: games.len() };
        let name = src.file_stem().map_or("guesswhat".into(), |s| s.to_string_lossy().into_owned()) + ".jsonl";
        corpus::write_corpus(&a.out.join(&name), &header, &games)?;
        manifest.inputs.push(src.display().to_string());
        manifest.artifacts.push(name);
    } else {
        for (split, n, name) in [
            (Split::Train, cfg.data.train_games, "train.jsonl"),
            (Split::Val, cfg.data.val_games, "val.jsonl"),
            (Split::Test, cfg.data.test_games, "test.jsonl"),
        ] {
            let games = generate_corpus(&cfg.env, split, n, cfg.seed)?;
            let header = CorpusHeader {
                schema_version: SCHEMA_VERSION,
                split: Some(split),
                seed: Some(cfg.seed),
                env: Some(cfg.env.clone()),
                games: n,
            };
            corpus::write_corpus(&a.out.join(name), &header, &games)?;
            manifest.artifacts.push(name.into());
        }
    }
    write(&a.out.join("vocab.txt"), corpus::vocabulary_text(&vocab))?;
    manifest.artifacts.push("vocab.txt".into());
    manifest.write(&a.out, &cfg)?;
    println!("wrote {} files to {}", manifest.artifacts.len(), a.out.display());
    Ok(())
}

/// Reads `<dir>/<name>.jsonl`; the world settings come from its header.
fn load_split(dir: &Path, name: &str) -> Result<(Option<EnvConfig>, Vec<GameRecord>)> {
    let (header, games) = corpus::read_corpus(&dir.join(format!("{name}.jsonl")))?;
    Ok((header.env, games))
}

fn cmd_train_sl(a: TrainSl) -> CliResult {
    let mut flags = Vec::new();
    if let Some(k) = a.model {
        flags.push(("model.kind".into(), Value::String(match k { KindArg::Gst => "gst", KindArg::Baseline => "baseline" }.into())));
    }
    if let Some(c) = a.concat {
        flags.push(("model.concat".into(), Value::try_from(ConcatMode::from(c)).expect("serializes")));
    }
    if let Some(t) = a.terms {
        flags.push(("train.supervision.terms".into(), terms_value(t.into())));
    }
    if let Some(e) = a.epochs {
        flags.push(("train.sl.epochs".into(), int(e)));
    }
    for (k, v) in [("train.sl.lr", a.lr), ("train.supervision.alpha", a.alpha), ("train.supervision.c", a.c)] {
        if let Some(v) = v {
            flags.push((k.into(), Value::Float(v)));
        }
    }
    let mut cfg = resolve(&a.common, flags)?;
    let (env, train) = load_split(&a.data, "train")?;
    let (_, val) = load_split(&a.data, "val")?;
    if let Some(env) = env {
        cfg.env = env;
    }
    cfg.validate()?;
    let mut log = MetricsLog::append(&a.out.join("metrics.log"))?;
    let mut log_err = None;
    let ckpt = train_sl(&cfg.model, &train, &val, &cfg.env, &cfg.train, &mut |r| {
        eprintln!("{}", metrics_line(r));
        if let Err(e) = log.write(r) {
            log_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = log_err {
        return Err(e.into());
    }
    checkpoint::save(&a.out, &ckpt)?;
    let mut manifest = RunManifest::new("train-sl", &cfg);
    manifest.inputs = vec![a.data.join("train.jsonl").display().to_string(), a.data.join("val.jsonl").display().to_string()];
    manifest.artifacts = ["params.bin", "manifest.txt", "checkpoint.json", "metrics.log"].map(String::from).to_vec();
    manifest.write(&a.out, &cfg)?;
    println!("best epoch {} saved to {}", ckpt.epoch, a.out.display());
    Ok(())
}

fn cmd_train_rl(a: TrainRl) -> CliResult {
    let init = checkpoint::load(&a.ckpt)?;
    let mut flags = vec![
        ("model".to_owned(), Value::try_from(&init.spec).expect("serializes")),
        ("env".to_owned(), Value::try_from(&init.env).expect("serializes")),
    ];
    if let Some(e) = a.epochs {
        flags.push(("train.rl.epochs".into(), int(e)));
    }
    if let Some(g) = a.games_per_epoch {
        flags.push(("train.rl.games_per_epoch".into(), int(g)));
    }
    let cfg = resolve(&a.common, flags)?;
    let mut log = MetricsLog::append(&a.out.join("metrics.log"))?;
    let mut log_err = None;
    let ckpt = train_rl(&init, &cfg.train, &mut |r| {
        eprintln!("{}", metrics_line(r));
        if let Err(e) = log.write(r) {
            log_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = log_err {
        return Err(e.into());
    }
    checkpoint::save(&a.out, &ckpt)?;
    let mut manifest = RunManifest::new("train-rl", &cfg);
    manifest.inputs = vec![a.ckpt.display().to_string()];
    manifest.artifacts = ["params.bin", "manifest.txt", "checkpoint.json", "metrics.log"].map(String::from).to_vec();
    manifest.write(&a.out, &cfg)?;
    println!("saved to {}", a.out.display());
    Ok(())
}

fn cmd_eval(a: Eval) -> CliResult {
    let ckpt = checkpoint::load(&a.ckpt)?;
    let mut flags = vec![("env".to_owned(), Value::try_from(&ckpt.env).expect("serializes"))];
    if let Some(n) = a.n {
        flags.push(("eval.games".into(), int(n)));
    }
    if let Some(m) = a.mode {
        flags.push(("eval.mode".into(), Value::String(match m { ModeArg::Greedy => "greedy", ModeArg::Sample => "sample" }.into())));
    }
    let stop = match (a.stop_threshold, a.gain_threshold) {
        (Some(t), _) => Some(StopPolicy::ConfidenceThreshold(t)),
        (_, Some(e)) => Some(StopPolicy::GainThreshold(e)),
        _ => None,
    };
    if let Some(s) = stop {
        flags.push(("eval.stop".into(), Value::try_from(s).expect("serializes")));
    }
    let mut cfg = resolve(&a.common, flags)?;
    let model = ckpt.model()?;
    let need_data = |what: &str| a.data.clone().ok_or_else(|| CliError::Usage(format!("--split {what} needs --data")));
    let (report, records) = match a.split {
        SplitArg::Test => {
            let (_, games) = load_split(&need_data("test")?, "test")?;
            let games = &games[..a.n.unwrap_or(games.len()).min(games.len())];
            let records = guesser_only_records(&model, &ckpt.store, games, ckpt.env.j_max)?;
            (EvalReport::from_records("test", &records, ckpt.env.j_max)?, records)
        }
        split => {
            let source = match split {
                SplitArg::Newobject => load_split(&need_data("newobject")?, "train")?.1,
                _ => Vec::new(),
            };
            cfg.eval.split = if matches!(split, SplitArg::Newobject) { EvalSplit::NewObject } else { EvalSplit::NewGame };
            let guesser = model.guesser(&ckpt.store, ckpt.env.j_max);
            parallel::evaluate(&guesser, &cfg.eval_settings(), &source, a.jobs)?
        }
    };
    if a.json {
        println!("{}", serde_json::to_string(&report).expect("serializable"));
    } else {
        print!("{}", report::eval_table(&report));
    }
    if let Some(out) = &a.out {
        write(&out.join("report.json"), serde_json::to_string_pretty(&report).expect("serializable") + "\n")?;
        let header = CorpusHeader { schema_version: SCHEMA_VERSION, split: None, seed: Some(cfg.seed), env: Some(ckpt.env.clone()), games: records.len() };
        corpus::write_corpus(&out.join("records.jsonl"), &header, &records)?;
        write(&out.join("belief_curve.csv"), report::belief_csv(&report.belief_curve))?;
        let mut manifest = RunManifest::new("eval", &cfg);
        manifest.inputs = vec![a.ckpt.display().to_string()];
        manifest.artifacts = ["report.json", "records.jsonl", "belief_curve.csv"].map(String::from).to_vec();
        manifest.write(out, &cfg)?;
    }
    Ok(())
}

fn cmd_ablate(a: Ablate) -> CliResult {
    let mut flags = Vec::new();
    if let Some(s) = &a.seeds {
        flags.push(("ablate.seeds".into(), Value::Array(s.iter().map(|x| Value::Integer(*x as i64)).collect())));
    }
    if let Some(e) = a.epochs {
        flags.push(("train.sl.epochs".into(), int(e)));
    }
    if let Some(n) = a.n {
        flags.push(("eval.games".into(), int(n)));
    }
    if a.no_baseline {
        flags.push(("ablate.baseline".into(), Value::Boolean(false)));
    }
    let mut cfg = resolve(&a.common, flags)?;
    let (env, train) = load_split(&a.data, "train")?;
    let (_, val) = load_split(&a.data, "val")?;
    if let Some(env) = env {
        cfg.env = env;
    }
    let grid = AblationGrid {
        terms: a.terms.map_or(cfg.ablate.grid.terms.clone(), |t| t.into_iter().map(Terms::from).collect()),
        concats: a.concats.map_or(cfg.ablate.grid.concats.clone(), |c| c.into_iter().map(ConcatMode::from).collect()),
        cs: a.cs.unwrap_or(cfg.ablate.grid.cs.clone()),
    };
    cfg.ablate.grid = grid.clone();
    cfg.validate()?;
    let mut cells = grid.cells();
    if cfg.ablate.baseline {
        cells.push(AblationCell { kind: ModelKind::Baseline, terms: Terms::PS_ONLY, concat: ConcatMode::Symmetric, c: cfg.train.supervision.c });
    }
    let settings = AblationSettings {
        seeds: cfg.ablate.seeds.clone(),
        model: ModelSpec { kind: ModelKind::Gst, ..cfg.model.clone() }.config,
        train: cfg.train.clone(),
        eval: cfg.eval_settings(),
    };
    let rows = ablate(&cells, &train, &val, &cfg.env, &settings, &mut |cell, seed, ckpt| {
        eprintln!("finished {} seed {seed} (best epoch {})", cell.label(), ckpt.epoch);
    })?;
    let table = report::ablation_table(&rows);
    print!("{table}");
    write(&a.out.join("ablation.txt"), &table)?;
    write(&a.out.join("ablation.jsonl"), report::jsonl(&rows))?;
    let mut manifest = RunManifest::new("ablate", &cfg);
    manifest.inputs = vec![a.data.display().to_string()];
    manifest.artifacts = vec!["ablation.txt".into(), "ablation.jsonl".into()];
    manifest.write(&a.out, &cfg)?;
    Ok(())
}

fn cmd_inspect(a: Inspect) -> CliResult {
    let (_, records) = corpus::read_corpus(&a.trace)?;
    let chosen: Vec<&GameRecord> = match a.game {
        Some(id) => vec![records.iter().find(|r| r.id == id).ok_or_else(|| Error::NotFound(format!("game {id} in {}", a.trace.display())))?],
        None => records.iter().collect(),
    };
    let vocab = Vocabulary::standard();
    for r in chosen {
        println!("{}", inspect::render(r, &vocab)?);
    }
    Ok(())
}

fn cmd_serve(a: Serve) -> CliResult {
    let mut flags = Vec::new();
    if let Some(p) = a.port {
        flags.push(("serve.port".into(), Value::Integer(p.into())));
    }
    if let Some(t) = a.stop_threshold {
        flags.push(("serve.stop_threshold".into(), Value::Float(t)));
    }
    if let Some(m) = a.max_sessions {
        flags.push(("serve.max_sessions".into(), int(m)));
    }
    if let Some(s) = a.idle_timeout_secs {
        flags.push(("serve.idle_timeout_secs".into(), int(s as usize)));
    }
    let cfg = resolve(&a.common, flags)?;
    let app = AppState::new(ServerConfig {
        checkpoint: a.checkpoint,
        max_sessions: cfg.serve.max_sessions,
        idle_timeout: Duration::from_secs(cfg.serve.idle_timeout_secs),
        stop: cfg.serve.stop_threshold.map_or(StopPolicy::None, StopPolicy::ConfidenceThreshold),
        static_dir: a.static_dir,
    })?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Error::io(Path::new("tokio runtime"), e))?;
    let addr = std::net::SocketAddr::new(a.host, cfg.serve.port);
    runtime.block_on(server::serve(app, addr)).map_err(|e| Error::io(Path::new(&addr.to_string()), e))?;
    Ok(())
}
