use alloc::string::ToString;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::optim::{clip_global_norm, Adam};
use super::{Checkpoint, MetricsRecord, TrainConfig};
use crate::autodiff::{Graph, Gradients, ParameterStore};
use crate::env::{derive_seed, EnvConfig, GameRecord};
use crate::error::{Error, Result};
use crate::eval::guesser_only_error;
use crate::losses::{sl_loss, SupervisionConfig};
use crate::model::{Model, ModelSpec};

/// Running sums of the loss terms.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct LossSums {
    pub es: f64,
    pub ps: f64,
    pub is: f64,
    pub total: f64,
    pub games: usize,
}

impl LossSums {
    pub fn add(&mut self, other: LossSums) {
        self.es += other.es;
        self.ps += other.ps;
        self.is += other.is;
        self.total += other.total;
        self.games += other.games;
    }

    pub fn record(&self, phase: &str, epoch: usize, step: usize, lr: f64) -> MetricsRecord {
        let n = self.games.max(1) as f64;
        MetricsRecord {
            phase: phase.to_string(),
            epoch,
            step,
            es: self.es / n,
            ps: self.ps / n,
            is: self.is / n,
            total: self.total / n,
            success_rate: None,
            val_error: None,
            lr,
        }
    }
}

/// Sum over `games` of the per-game gradient of the supervised loss.
pub fn batch_gradient(
    model: &Model,
    store: &ParameterStore,
    games: &[&GameRecord],
    supervision: &SupervisionConfig,
) -> Result<(Gradients, f64)> {
    let (grads, sums) = batch_gradient_sums(model, store, games, supervision)?;
    Ok((grads, sums.total))
}

pub(crate) fn batch_gradient_sums(
    model: &Model,
    store: &ParameterStore,
    games: &[&GameRecord],
    supervision: &SupervisionConfig,
) -> Result<(Gradients, LossSums)> {
    let mut grads = store.zero_grads();
    let mut sums = LossSums::default();
    for game in games {
        let mut g = Graph::with_params(store);
        let states = model.track(&mut g, &game.scene, &game.rounds, supervision.j_max)?;
        let b = sl_loss(&mut g, &states, game.target_index, supervision)?;
        g.backward(b.total_var, &mut grads)?;
        sums.add(LossSums { es: b.es, ps: b.ps, is: b.is_, total: b.total, games: 1 });
    }
    Ok((grads, sums))
}

/// Minimizes the supervised objective with Adam over shuffled mini-batches
/// and keeps the parameters with the lowest validation error. `observer`
/// receives one record per epoch.
pub fn train_sl(
    spec: &ModelSpec,
    train: &[GameRecord],
    val: &[GameRecord],
    env: &EnvConfig,
    cfg: &TrainConfig,
    observer: &mut dyn FnMut(&MetricsRecord),
) -> Result<Checkpoint> {
    cfg.validate()?;
    let supervision = SupervisionConfig { j_max: env.j_max, ..cfg.supervision };
    let games: Vec<&GameRecord> = train.iter().filter(|g| !cfg.sl.successful_only || g.success()).collect();
    if games.is_empty() {
        return Err(Error::Config("empty training corpus".into()));
    }
    let (model, mut store) = Model::init(spec, cfg.seed)?;
    let mut adam = Adam::new(&store, cfg.sl.adam);
    let mut order: Vec<usize> = (0..games.len()).collect();
    let mut best: Option<(f64, usize, ParameterStore)> = None;
    let mut metrics = Vec::new();
    let mut step = 0;
    for epoch in 0..cfg.sl.epochs {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 7, epoch as u64)));
        let mut epoch_sums = LossSums::default();
        for chunk in order.chunks(cfg.sl.batch_size) {
            let batch: Vec<&GameRecord> = chunk.iter().map(|&i| games[i]).collect();
            let (mut grads, sums) = batch_gradient_sums(&model, &store, &batch, &supervision)?;
            grads.scale(1.0 / batch.len() as f64);
            let norm = match cfg.sl.clip {
                Some(c) => clip_global_norm(&mut grads, c),
                None => grads.l2_norm(),
            };
            if !norm.is_finite() {
                return Err(Error::NonFinite { op: "batch gradient" });
            }
            adam.step(&mut store, &grads, cfg.sl.lr);
            epoch_sums.add(sums);
            step += 1;
        }
        let mut record = epoch_sums.record("sl", epoch, step, cfg.sl.lr);
        if !val.is_empty() {
            let err = guesser_only_error(&model, &store, val, env.j_max)?.error_rate;
            record.val_error = Some(err);
            if best.as_ref().map_or(true, |(b, _, _)| err < *b) {
                best = Some((err, epoch, store.clone()));
            }
        }
        observer(&record);
        metrics.push(record);
        if let Some((_, best_epoch, _)) = &best {
            if cfg.sl.patience > 0 && epoch - best_epoch >= cfg.sl.patience {
                break;
            }
        }
    }
    let (epoch, store) = match best {
        Some((_, e, s)) => (e, s),
        None => (cfg.sl.epochs.saturating_sub(1), store),
    };
    Ok(Checkpoint { spec: model.spec(), store, env: env.clone(), train: cfg.clone(), epoch, metrics })
}
