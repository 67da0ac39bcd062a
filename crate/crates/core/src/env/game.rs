use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::oracle::oracle_answer;
use super::qgen::{answers_match, qgen_next, QGenPolicy};
use super::question::{Answer, Question, Vocabulary};
use super::scene::Scene;
use crate::error::{Error, Result};
use crate::tracker::{final_guess, stop_decision, GuessMode, StopPolicy};

/// Anything that tracks a belief over the objects of a scene round by round.
pub trait Guesser {
    type Session;

    /// Starts a game; the session's first state is the round-0 belief.
    fn start(&self, scene: &Scene) -> Result<Self::Session>;

    /// Consumes one question/answer round.
    fn observe(&self, session: &mut Self::Session, question: &Question, answer: Answer) -> Result<()>;

    /// Beliefs `π⁽⁰⁾ … π⁽ʲ⁾` so far.
    fn states<'s>(&self, session: &'s Self::Session) -> &'s [Vec<f64>];
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaPair {
    pub question: Question,
    pub answer: Answer,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameStatus {
    Success,
    Failure,
    Incomplete,
    Aborted(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameRecord {
    pub id: u64,
    pub scene: Scene,
    pub target_index: usize,
    pub rounds: Vec<QaPair>,
    pub status: GameStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guess: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_pi: Option<Vec<f64>>,
    /// Every belief state of the game, when a trace dump was requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<Vec<f64>>>,
}

impl GameRecord {
    pub fn success(&self) -> bool {
        self.status == GameStatus::Success
    }

    pub fn validate(&self, j_max: usize) -> Result<()> {
        self.scene.validate()?;
        if self.target_index >= self.scene.len() {
            return Err(Error::Contract(alloc::format!(
                "target {} out of {} objects",
                self.target_index,
                self.scene.len()
            )));
        }
        if self.rounds.len() > j_max {
            return Err(Error::Contract(alloc::format!("{} rounds exceed J_max {j_max}", self.rounds.len())));
        }
        Ok(())
    }
}

/// Per-game settings for [`play_game`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameOptions {
    pub qgen: QGenPolicy,
    pub j_max: usize,
    pub stop: StopPolicy,
    pub guess: GuessMode,
    pub num_categories: usize,
    /// Keep every belief state in the record.
    pub record_trace: bool,
}

impl GameOptions {
    pub fn greedy(j_max: usize, num_categories: usize) -> Self {
        GameOptions {
            qgen: QGenPolicy::GreedySplit,
            j_max,
            stop: StopPolicy::None,
            guess: GuessMode::Argmax,
            num_categories,
            record_trace: false,
        }
    }
}

/// Plays one game: the scripted QGen asks, the Oracle answers truthfully about
/// `target_index`, the guesser tracks. Stops at `j_max` rounds, when the stop
/// policy fires, or when templates run out. A guesser failure mid-game ends the
/// game with [`GameStatus::Aborted`].
pub fn play_game<G: Guesser, R: Rng>(
    scene: &Scene,
    target_index: usize,
    guesser: &G,
    options: &GameOptions,
    vocab: &Vocabulary,
    rng: &mut R,
) -> Result<GameRecord> {
    if target_index >= scene.len() {
        return Err(Error::Contract(alloc::format!("target {target_index} out of {} objects", scene.len())));
    }
    let mut session = guesser.start(scene)?;
    let mut rounds: Vec<QaPair> = Vec::new();
    let mut aborted = None;
    while rounds.len() < options.j_max {
        let question = match qgen_next(scene, options.num_categories, &rounds, &options.qgen, vocab, rng) {
            Ok(q) => q,
            Err(Error::Exhausted) => break,
            Err(e) => return Err(e),
        };
        let answer = oracle_answer(scene, target_index, &question)?;
        if let Err(e) = guesser.observe(&mut session, &question, answer) {
            aborted = Some(e.to_string());
            break;
        }
        rounds.push(QaPair { question, answer });
        if stop_decision(guesser.states(&session), &options.stop) {
            break;
        }
    }
    let states = guesser.states(&session);
    let last = states.last().cloned().unwrap_or_default();
    let (status, guess) = match aborted {
        Some(reason) => (GameStatus::Aborted(reason), None),
        None => {
            let g = final_guess(&last, options.guess, rng)?;
            (if g == target_index { GameStatus::Success } else { GameStatus::Failure }, Some(g))
        }
    };
    Ok(GameRecord {
        id: 0,
        scene: scene.clone(),
        target_index,
        rounds,
        status,
        guess,
        final_pi: Some(last),
        trace: options.record_trace.then(|| states.to_vec()),
    })
}

/// The dialogue the scripted QGen and the truthful Oracle produce for
/// `target_index`, without any guesser: up to `j_max` rounds, fewer if the
/// templates run out.
pub fn scripted_dialogue<R: Rng>(
    scene: &Scene,
    target_index: usize,
    policy: &QGenPolicy,
    j_max: usize,
    num_categories: usize,
    vocab: &Vocabulary,
    rng: &mut R,
) -> Result<Vec<QaPair>> {
    let mut rounds = Vec::with_capacity(j_max);
    while rounds.len() < j_max {
        let question = match qgen_next(scene, num_categories, &rounds, policy, vocab, rng) {
            Ok(q) => q,
            Err(Error::Exhausted) => break,
            Err(e) => return Err(e),
        };
        let answer = oracle_answer(scene, target_index, &question)?;
        rounds.push(QaPair { question, answer });
    }
    Ok(rounds)
}

/// Exact posterior over objects consistent with the answers so far, uniform
/// among them. Reads question semantics, so it is a reference, not a model.
#[derive(Clone, Copy, Debug, Default)]
pub struct PosteriorGuesser;

#[derive(Clone, Debug)]
pub struct PosteriorSession {
    scene: Scene,
    consistent: Vec<bool>,
    states: Vec<Vec<f64>>,
}

fn uniform_over(mask: &[bool]) -> Vec<f64> {
    let k = mask.iter().filter(|b| **b).count() as f64;
    mask.iter().map(|&b| if b { 1.0 / k } else { 0.0 }).collect()
}

impl Guesser for PosteriorGuesser {
    type Session = PosteriorSession;

    fn start(&self, scene: &Scene) -> Result<PosteriorSession> {
        let consistent = vec![true; scene.len()];
        let states = vec![uniform_over(&consistent)];
        Ok(PosteriorSession { scene: scene.clone(), consistent, states })
    }

    fn observe(&self, s: &mut PosteriorSession, question: &Question, answer: Answer) -> Result<()> {
        let next: Vec<bool> = (0..s.scene.len())
            .map(|i| s.consistent[i] && answers_match(&s.scene, i, &question.template, answer))
            .collect();
        // Contradictory answers leave the belief where it was.
        if next.iter().any(|b| *b) {
            s.consistent = next;
        }
        s.states.push(uniform_over(&s.consistent));
        Ok(())
    }

    fn states<'s>(&self, s: &'s PosteriorSession) -> &'s [Vec<f64>] {
        &s.states
    }
}

/// Never updates: the belief stays uniform.
#[derive(Clone, Copy, Debug, Default)]
pub struct UniformGuesser;

impl Guesser for UniformGuesser {
    type Session = Vec<Vec<f64>>;

    fn start(&self, scene: &Scene) -> Result<Vec<Vec<f64>>> {
        Ok(vec![vec![1.0 / scene.len() as f64; scene.len()]])
    }

    fn observe(&self, s: &mut Vec<Vec<f64>>, _: &Question, _: Answer) -> Result<()> {
        let last = s[0].clone();
        s.push(last);
        Ok(())
    }

    fn states<'s>(&self, s: &'s Vec<Vec<f64>>) -> &'s [Vec<f64>] {
        s
    }
}
