//! Success and error rates, belief curves and the single-step baseline.

pub mod baseline;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, ParameterStore};
use crate::env::{
    derive_seed, generate_scene, play_game, EnvConfig, GameOptions, GameRecord, GameStatus, Guesser, QGenPolicy,
    Split, Vocabulary,
};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::tracker::{final_guess, GuessMode, StopPolicy};

/// Where evaluation scenes come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalSplit {
    /// Training scenes with a target other than the one trained on.
    NewObject,
    /// Scenes from a seed stream disjoint from every corpus split.
    NewGame,
}

impl EvalSplit {
    pub fn name(self) -> &'static str {
        match self {
            EvalSplit::NewObject => "new_object",
            EvalSplit::NewGame => "new_game",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    /// Argmax guess, GreedySplit questions.
    Greedy,
    /// Sampled guess, random questions.
    Sample,
}

impl EvalMode {
    pub fn qgen(self) -> QGenPolicy {
        match self {
            EvalMode::Greedy => QGenPolicy::GreedySplit,
            EvalMode::Sample => QGenPolicy::Random,
        }
    }

    pub fn guess(self) -> GuessMode {
        match self {
            EvalMode::Greedy => GuessMode::Argmax,
            EvalMode::Sample => GuessMode::Sample,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    pub split: EvalSplit,
    pub games: usize,
    pub mode: EvalMode,
    pub seed: u64,
    pub stop: StopPolicy,
    pub env: EnvConfig,
}

impl EvalSettings {
    pub fn new(split: EvalSplit, games: usize, mode: EvalMode, seed: u64, env: EnvConfig) -> Self {
        EvalSettings { split, games, mode, seed, stop: StopPolicy::None, env }
    }

    fn options(&self) -> GameOptions {
        GameOptions {
            qgen: self.mode.qgen(),
            j_max: self.env.j_max,
            stop: self.stop,
            guess: self.mode.guess(),
            num_categories: self.env.num_categories,
            record_trace: true,
        }
    }
}

/// Plays evaluation game `index`. Games are independent, so any subset may be
/// played in any order or in parallel and reassembled by index.
pub fn eval_game<G: Guesser>(
    guesser: &G,
    settings: &EvalSettings,
    source: &[GameRecord],
    index: usize,
) -> Result<GameRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(settings.seed, 40 + settings.mode as u64, index as u64));
    let (scene, target) = match settings.split {
        EvalSplit::NewGame => {
            let scene = generate_scene(Split::NewGame.scene_seed(settings.seed, index as u64), &settings.env)?;
            let target = rng.gen_range(0..scene.len());
            (scene, target)
        }
        EvalSplit::NewObject => {
            if source.is_empty() {
                return Err(Error::Config("new-object evaluation needs the training corpus".into()));
            }
            let record = &source[index % source.len()];
            let m = record.scene.len();
            // Uniform over the other m − 1 objects.
            let mut target = rng.gen_range(0..m - 1);
            if target >= record.target_index {
                target += 1;
            }
            (record.scene.clone(), target)
        }
    };
    let mut record = play_game(&scene, target, guesser, &settings.options(), &Vocabulary::standard(), &mut rng)?;
    record.id = index as u64;
    Ok(record)
}

/// Plays every evaluation game in order.
pub fn evaluate<G: Guesser>(guesser: &G, settings: &EvalSettings, source: &[GameRecord]) -> Result<EvalReport> {
    if settings.games == 0 {
        return Err(Error::Config("number of evaluation games must be positive".into()));
    }
    let records = (0..settings.games)
        .map(|i| eval_game(guesser, settings, source, i))
        .collect::<Result<Vec<_>>>()?;
    EvalReport::from_records(settings.split.name(), &records, settings.env.j_max)
}

/// Wilson score interval at 95%.
pub fn wilson_interval(successes: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054;
    let n = n as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * libm::sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub split: String,
    pub games: usize,
    pub successes: usize,
    pub aborted: usize,
    pub success_rate: f64,
    pub error_rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Mean target belief at rounds `0..=J_max` over all games.
    pub belief_curve: Vec<f64>,
}

impl EvalReport {
    /// Aggregates finished games. Records need their belief trace.
    pub fn from_records(split: &str, records: &[GameRecord], j_max: usize) -> Result<Self> {
        let games = records.len();
        let successes = records.iter().filter(|r| r.success()).count();
        let aborted = records.iter().filter(|r| matches!(r.status, GameStatus::Aborted(_))).count();
        let success_rate = if games == 0 { 0.0 } else { successes as f64 / games as f64 };
        let (ci_low, ci_high) = wilson_interval(successes, games);
        let belief_curve = belief_curve(records, BeliefFilter::All, j_max).unwrap_or_default();
        Ok(EvalReport {
            split: split.into(),
            games,
            successes,
            aborted,
            success_rate,
            error_rate: 1.0 - success_rate,
            ci_low,
            ci_high,
            belief_curve,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeliefFilter {
    SuccessfulOnly,
    All,
}

/// Mean target belief per round `0..=j_max`. Games that ended early hold
/// their last state for the remaining rounds.
pub fn belief_curve(records: &[GameRecord], filter: BeliefFilter, j_max: usize) -> Result<Vec<f64>> {
    let mut sums = alloc::vec![0.0; j_max + 1];
    let mut n = 0usize;
    for r in records {
        if filter == BeliefFilter::SuccessfulOnly && !r.success() {
            continue;
        }
        let trace = r
            .trace
            .as_ref()
            .ok_or_else(|| Error::Contract(format!("game {} has no belief trace", r.id)))?;
        if trace.is_empty() {
            continue;
        }
        for (j, s) in sums.iter_mut().enumerate() {
            *s += trace[j.min(trace.len() - 1)][r.target_index];
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyReport("no games pass the belief-curve filter".into()));
    }
    Ok(sums.into_iter().map(|s| s / n as f64).collect())
}

/// Runs the guesser on fixed dialogues (no self-play) and scores the argmax
/// of the last state. The returned records carry the full belief trace.
pub fn guesser_only_records(
    model: &Model,
    store: &ParameterStore,
    corpus: &[GameRecord],
    j_max: usize,
) -> Result<Vec<GameRecord>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    corpus
        .iter()
        .map(|game| {
            let mut g = Graph::with_params(store);
            let states = model.track(&mut g, &game.scene, &game.rounds, j_max)?;
            let trace: Vec<Vec<f64>> = states.iter().map(|s| g.value(*s).data().to_vec()).collect();
            let last = trace.last().cloned().unwrap_or_default();
            let guess = final_guess(&last, GuessMode::Argmax, &mut rng)?;
            Ok(GameRecord {
                status: if guess == game.target_index { GameStatus::Success } else { GameStatus::Failure },
                guess: Some(guess),
                final_pi: Some(last),
                trace: Some(trace),
                ..game.clone()
            })
        })
        .collect()
}

/// Error rate of the guesser alone on recorded dialogues.
pub fn guesser_only_error(
    model: &Model,
    store: &ParameterStore,
    corpus: &[GameRecord],
    j_max: usize,
) -> Result<EvalReport> {
    let records = guesser_only_records(model, store, corpus, j_max)?;
    EvalReport::from_records("guesser_only", &records, j_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{PosteriorGuesser, UniformGuesser};

    #[test]
    fn wilson_reference_values() {
        let (lo, hi) = wilson_interval(50, 100);
        assert!((lo - 0.4038).abs() < 1e-4 && (hi - 0.5962).abs() < 1e-4);
        assert_eq!(wilson_interval(0, 0), (0.0, 1.0));
        let (lo, hi) = wilson_interval(10, 10);
        assert!((hi - 1.0).abs() < 1e-12 && lo > 0.69);
    }

    #[test]
    fn posterior_reference_succeeds_and_uniform_is_chance() {
        let env = EnvConfig::default();
        let s = EvalSettings::new(EvalSplit::NewGame, 300, EvalMode::Greedy, 3, env.clone());
        let post = evaluate(&PosteriorGuesser, &s, &[]).unwrap();
        assert!(post.success_rate >= 0.9, "{}", post.success_rate);
        let uni = evaluate(&UniformGuesser, &s, &[]).unwrap();
        // Argmax over a uniform belief always picks object 0.
        let expected: f64 = (0..300)
            .map(|i| {
                let r = eval_game(&UniformGuesser, &s, &[], i).unwrap();
                (r.target_index == 0) as u8 as f64
            })
            .sum::<f64>()
            / 300.0;
        assert_eq!(uni.success_rate, expected);
        assert_eq!(uni.belief_curve.len(), env.j_max + 1);
    }

    #[test]
    fn new_object_never_reuses_the_training_target() {
        let env = EnvConfig::default();
        let corpus = crate::env::generate_corpus(&env, Split::Train, 20, 1).unwrap();
        let s = EvalSettings::new(EvalSplit::NewObject, 60, EvalMode::Greedy, 5, env);
        for i in 0..60 {
            let r = eval_game(&PosteriorGuesser, &s, &corpus, i).unwrap();
            let src = &corpus[i % corpus.len()];
            assert_eq!(r.scene, src.scene);
            assert_ne!(r.target_index, src.target_index);
        }
    }

    #[test]
    fn belief_curve_filters() {
        let env = EnvConfig::default();
        let s = EvalSettings::new(EvalSplit::NewGame, 50, EvalMode::Greedy, 9, env.clone());
        let records: Vec<_> = (0..50).map(|i| eval_game(&PosteriorGuesser, &s, &[], i).unwrap()).collect();
        let all = belief_curve(&records, BeliefFilter::All, env.j_max).unwrap();
        let ok = belief_curve(&records, BeliefFilter::SuccessfulOnly, env.j_max).unwrap();
        let mean_inv_m = records.iter().map(|r| 1.0 / r.scene.len() as f64).sum::<f64>() / 50.0;
        assert!((all[0] - mean_inv_m).abs() < 1e-12);
        assert!(all[env.j_max] <= ok[env.j_max]);
        let failures: Vec<_> = records.iter().filter(|r| !r.success()).cloned().collect();
        assert!(matches!(
            belief_curve(&failures, BeliefFilter::SuccessfulOnly, env.j_max),
            Err(Error::EmptyReport(_))
        ));
    }
}
