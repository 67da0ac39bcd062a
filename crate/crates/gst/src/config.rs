//! Run configuration.
//!
//! A TOML file whose top-level `version` key must equal [`CONFIG_VERSION`].
//! Every other key is optional. Values resolve as command-line flags over
//! file keys over the built-in desk-scale defaults. Flags are applied as
//! dotted key paths (`train.sl.lr = 0.001`), the same paths the file uses.

use std::path::Path;

use gst_core::env::EnvConfig;
use gst_core::eval::{EvalMode, EvalSettings, EvalSplit};
use gst_core::model::ModelSpec;
use gst_core::tracker::{ModelConfig, StopPolicy};
use gst_core::train::{AblationGrid, TrainConfig};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{read_string, Error, Result};

pub const CONFIG_VERSION: i64 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    pub train_games: usize,
    pub val_games: usize,
    pub test_games: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub games: usize,
    pub split: EvalSplit,
    pub mode: EvalMode,
    pub stop: StopPolicy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblateConfig {
    pub seeds: Vec<u64>,
    pub grid: AblationGrid,
    /// Also train the single-step baseline with plain supervision.
    pub baseline: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ServeConfig {
    pub port: u16,
    pub max_sessions: usize,
    pub idle_timeout_secs: u64,
    /// Stop once the top belief reaches this value.
    pub stop_threshold: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub version: i64,
    pub seed: u64,
    pub data: DataConfig,
    pub env: EnvConfig,
    pub model: ModelSpec,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub ablate: AblateConfig,
    pub serve: ServeConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            version: CONFIG_VERSION,
            seed: 1,
            data: DataConfig { train_games: 5000, val_games: 1000, test_games: 1000 },
            env: EnvConfig::default(),
            model: ModelSpec::gst(ModelConfig::desk()),
            train: TrainConfig::desk(),
            eval: EvalConfig { games: 1000, split: EvalSplit::NewGame, mode: EvalMode::Greedy, stop: StopPolicy::None },
            ablate: AblateConfig { seeds: vec![1, 2, 3], grid: AblationGrid::default(), baseline: true },
            serve: ServeConfig { port: 8080, max_sessions: 256, idle_timeout_secs: 1800, stop_threshold: None },
        }
    }
}

impl RunConfig {
    pub fn eval_settings(&self) -> EvalSettings {
        EvalSettings {
            split: self.eval.split,
            games: self.eval.games,
            mode: self.eval.mode,
            seed: self.seed,
            stop: self.eval.stop,
            env: self.env.clone(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.train.validate()?;
        if self.model.config.num_categories != self.env.num_categories {
            return Err(Error::Config(format!(
                "model.num_categories = {} but env.num_categories = {}",
                self.model.config.num_categories, self.env.num_categories
            )));
        }
        Ok(())
    }
}

fn merge(base: &mut Table, over: Table, prefix: &str) -> Result<()> {
    for (k, v) in over {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o, &path)?,
            (Some(slot), v) => *slot = v,
            // Optional keys that default to absent.
            (None, v) if OPTIONAL_KEYS.contains(&path.as_str()) => {
                base.insert(k, v);
            }
            (None, _) => return Err(Error::Config(format!("unknown key `{path}`"))),
        }
    }
    Ok(())
}

const OPTIONAL_KEYS: &[&str] = &["train.sl.clip", "train.rl.clip", "serve.stop_threshold"];

/// Parses a flag value as a TOML literal, falling back to a bare string.
pub fn parse_value(raw: &str) -> Value {
    toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_owned()))
}

fn nest(path: &str, value: Value) -> Table {
    let mut parts: Vec<&str> = path.split('.').collect();
    let last = parts.pop().expect("non-empty path");
    let mut t = Table::new();
    t.insert(last.to_owned(), value);
    for p in parts.into_iter().rev() {
        let mut outer = Table::new();
        outer.insert(p.to_owned(), Value::Table(t));
        t = outer;
    }
    t
}

/// Defaults, then `file`, then each `(key path, value)` override in order.
pub fn resolve(file: Option<&str>, overrides: &[(String, Value)]) -> Result<RunConfig> {
    let mut table = Table::try_from(RunConfig::default()).expect("defaults serialize");
    if let Some(text) = file {
        let parsed: Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        match parsed.get("version") {
            Some(Value::Integer(CONFIG_VERSION)) => {}
            Some(v) => return Err(Error::Config(format!("unsupported config version {v}"))),
            None => return Err(Error::Config("config file lacks the `version` key".into())),
        }
        merge(&mut table, parsed, "")?;
    }
    for (path, value) in overrides {
        merge(&mut table, nest(path, value.clone()), "")?;
    }
    let mut cfg: RunConfig = Value::Table(table).try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    cfg.train.seed = cfg.seed;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load(path: Option<&Path>, overrides: &[(String, Value)]) -> Result<RunConfig> {
    let text = path.map(read_string).transpose()?;
    resolve(text.as_deref(), overrides)
}
