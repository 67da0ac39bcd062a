
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::optim::{clip_global_norm, Momentum};
use super::sl::LossSums;
use super::{Checkpoint, MetricsRecord, TrainConfig};
use crate::autodiff::Graph;
use crate::env::{derive_seed, generate_scene, scripted_dialogue, Vocabulary};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalMode, EvalSettings, EvalSplit};
use crate::losses::{rl_step_loss, SupervisionConfig};
use crate::tracker::{final_guess, GuessMode};

/// Seed of self-play game `index` in `epoch`.
pub fn rl_game_seed(seed: u64, epoch: usize, games_per_epoch: usize, index: usize) -> u64 {
    derive_seed(seed, 50, (epoch * games_per_epoch + index) as u64)
}

/// Self-play refinement. Each game draws a fresh scene and target, runs the
/// scripted dialogue, tracks it and samples the final guess; only games whose
/// guess hits the target contribute their supervised loss. Updates use
/// momentum SGD on the batch mean with a stepwise decaying learning rate.
pub fn train_rl(init: &Checkpoint, cfg: &TrainConfig, observer: &mut dyn FnMut(&MetricsRecord)) -> Result<Checkpoint> {
    cfg.validate()?;
    let env = &init.env;
    let rl = &cfg.rl;
    let supervision = SupervisionConfig { j_max: env.j_max, ..cfg.supervision };
    let vocab = Vocabulary::standard();
    let model = init.model()?;
    let mut store = init.store.clone();
    let mut opt = Momentum::new(&store, rl.momentum);
    let mut metrics = init.metrics.clone();
    let mut step = 0;
    for epoch in 0..rl.epochs {
        let lr = rl.schedule.at(epoch);
        let mut sums = LossSums::default();
        let mut successes = 0usize;
        let mut played = 0usize;
        let mut start = 0;
        while start < rl.games_per_epoch {
            let end = (start + rl.batch_size).min(rl.games_per_epoch);
            let mut grads = store.zero_grads();
            for i in start..end {
                let seed = rl_game_seed(cfg.seed, epoch, rl.games_per_epoch, i);
                let scene = generate_scene(seed, env)?;
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 51, 0));
                let target = rng.gen_range(0..scene.len());
                let rounds = scripted_dialogue(&scene, target, &rl.qgen, env.j_max, env.num_categories, &vocab, &mut rng)?;
                let mut g = Graph::with_params(&store);
                let states = model.track(&mut g, &scene, &rounds, env.j_max)?;
                let last = g.value(*states.last().expect("π⁽⁰⁾")).data().to_vec();
                let guess = final_guess(&last, GuessMode::Sample, &mut rng)?;
                let reward = if guess == target { 1.0 } else { 0.0 };
                played += 1;
                if let Some(b) = rl_step_loss(&mut g, &states, target, guess, reward, &supervision)? {
                    g.backward(b.total_var, &mut grads)?;
                    sums.add(LossSums { es: b.es, ps: b.ps, is: b.is_, total: b.total, games: 1 });
                    successes += 1;
                }
            }
            grads.scale(1.0 / (end - start) as f64);
            let norm = match rl.clip {
                Some(c) => clip_global_norm(&mut grads, c),
                None => grads.l2_norm(),
            };
            if !norm.is_finite() {
                return Err(Error::NonFinite { op: "self-play gradient" });
            }
            opt.step(&mut store, &grads, lr);
            step += 1;
            start = end;
        }
        let mut record = sums.record("rl", epoch, step, lr);
        record.success_rate = Some(successes as f64 / played.max(1) as f64);
        if rl.eval_every > 0 && (epoch + 1) % rl.eval_every == 0 {
            let settings = EvalSettings::new(EvalSplit::NewGame, rl.eval_games, EvalMode::Greedy, cfg.seed, env.clone());
            let report = evaluate(&model.guesser(&store, env.j_max), &settings, &[])?;
            record.val_error = Some(report.error_rate);
        }
        observer(&record);
        metrics.push(record);
    }
    let epoch = init.epoch + rl.epochs;
    Ok(Checkpoint { spec: model.spec(), store, env: env.clone(), train: cfg.clone(), epoch, metrics })
}

