use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{train_sl, Checkpoint, TrainConfig};
use crate::env::{EnvConfig, GameRecord};
use crate::error::{Error, Result};
use crate::eval::{evaluate, guesser_only_error, EvalSettings};
use crate::losses::Terms;
use crate::model::{ModelKind, ModelSpec};
use crate::tracker::{ConcatMode, ModelConfig};

/// One configuration to train and score.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub kind: ModelKind,
    pub terms: Terms,
    pub concat: ConcatMode,
    pub c: f64,
}

impl AblationCell {
    pub fn gst(terms: Terms, concat: ConcatMode, c: f64) -> Self {
        AblationCell { kind: ModelKind::Gst, terms, concat, c }
    }

    pub fn label(&self) -> String {
        match self.kind {
            ModelKind::Gst => format!("{} {} c={}", self.terms.label(), self.concat.label(), self.c),
            ModelKind::Baseline => format!("baseline {}", self.terms.label()),
        }
    }
}

/// Cartesian product of loss variants, concatenations and offsets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationGrid {
    pub terms: Vec<Terms>,
    pub concats: Vec<ConcatMode>,
    pub cs: Vec<f64>,
}

impl Default for AblationGrid {
    fn default() -> Self {
        AblationGrid {
            terms: alloc::vec![Terms::FULL, Terms::WITHOUT_ES_PS, Terms::WITHOUT_IS],
            concats: alloc::vec![ConcatMode::Symmetric, ConcatMode::Product, ConcatMode::Pair],
            cs: alloc::vec![1.1, 1.5, 2.0],
        }
    }
}

impl AblationGrid {
    pub fn cells(&self) -> Vec<AblationCell> {
        let mut out = Vec::new();
        for t in &self.terms {
            for k in &self.concats {
                for c in &self.cs {
                    out.push(AblationCell::gst(*t, *k, *c));
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationSettings {
    pub seeds: Vec<u64>,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub eval: EvalSettings,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub label: String,
    pub cell: AblationCell,
    pub seeds: Vec<u64>,
    pub success_rates: Vec<f64>,
    pub val_errors: Vec<f64>,
    pub mean_success: f64,
    pub mean_val_error: f64,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len().max(1) as f64
}

/// Trains every cell once per seed and scores it on the evaluation split and
/// on the validation corpus. `on_run` sees each finished checkpoint.
pub fn ablate(
    cells: &[AblationCell],
    train: &[GameRecord],
    val: &[GameRecord],
    env: &EnvConfig,
    settings: &AblationSettings,
    on_run: &mut dyn FnMut(&AblationCell, u64, &Checkpoint),
) -> Result<Vec<AblationRow>> {
    if settings.seeds.is_empty() {
        return Err(Error::Config("ablation needs at least one seed".into()));
    }
    cells
        .iter()
        .map(|cell| {
            let mut success_rates = Vec::new();
            let mut val_errors = Vec::new();
            for &seed in &settings.seeds {
                let spec = ModelSpec { kind: cell.kind, config: ModelConfig { concat: cell.concat, ..settings.model.clone() } };
                let mut cfg = settings.train.clone();
                cfg.seed = seed;
                cfg.supervision.terms = cell.terms;
                cfg.supervision.c = cell.c;
                let ckpt = train_sl(&spec, train, val, env, &cfg, &mut |_| {})?;
                let model = ckpt.model()?;
                let report = evaluate(&model.guesser(&ckpt.store, env.j_max), &settings.eval, train)?;
                success_rates.push(report.success_rate);
                val_errors.push(guesser_only_error(&model, &ckpt.store, val, env.j_max)?.error_rate);
                on_run(cell, seed, &ckpt);
            }
            Ok(AblationRow {
                label: cell.label(),
                cell: cell.clone(),
                seeds: settings.seeds.clone(),
                mean_success: mean(&success_rates),
                mean_val_error: mean(&val_errors),
                success_rates,
                val_errors,
            })
        })
        .collect()
}
