//! Guessing state tracking: the belief over objects is re-weighted into the
//! visual context, a QA-conditioned belief change is scored per object, and
//! the running state is multiplied by it and renormalized every round.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Array, Axis, Graph, LstmState, ParamId, ParameterStore, Var};
use crate::encoder::{encode_objects, encode_qa, encode_question, ObjectEncoder, ObjectFeatures, QaEncoder, QaEncoding};
use crate::env::{Answer, Question, Scene, Vocabulary};
use crate::error::{Error, Result};

/// Denominator floor of the multiplicative update.
pub const NORM_FLOOR: f64 = 1e-30;

/// Which features enter the per-object belief-change scorer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConcatMode {
    /// `[h_qa; h_qa ⊙ o_i; o_i]`
    Symmetric,
    /// `[h_qa ⊙ o_i]`
    Product,
    /// `[h_qa; o_i]`
    Pair,
}

impl ConcatMode {
    pub fn width(self, dim: usize) -> usize {
        match self {
            ConcatMode::Symmetric => 3 * dim,
            ConcatMode::Product => dim,
            ConcatMode::Pair => 2 * dim,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ConcatMode::Symmetric => "[h;h*O;O]",
            ConcatMode::Product => "[h*O]",
            ConcatMode::Pair => "[h;O]",
        }
    }
}

/// Renormalization settings of the guessing-state update.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormConfig {
    /// Added to every entry of `π ⊙ π̂` before dividing by the sum. Zero keeps
    /// zero beliefs absorbing.
    pub smoothing: f64,
    /// On denominator underflow, reset to uniform instead of failing.
    pub reset_on_underflow: bool,
}

impl Default for NormConfig {
    fn default() -> Self {
        NormConfig { smoothing: 0.0, reset_on_underflow: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Width of embeddings, LSTM state and object features.
    pub dim: usize,
    /// Hidden width of the belief-change scorer.
    pub scorer_hidden: usize,
    pub vocab_size: usize,
    pub num_categories: usize,
    pub concat: ConcatMode,
    #[serde(default)]
    pub norm: NormConfig,
}

impl ModelConfig {
    /// Small widths that train in about a minute on one core.
    pub fn desk() -> Self {
        ModelConfig { dim: 16, scorer_hidden: 16, ..ModelConfig::default() }
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            dim: 512,
            scorer_hidden: 128,
            vocab_size: Vocabulary::standard().len(),
            num_categories: 8,
            concat: ConcatMode::Symmetric,
            norm: NormConfig::default(),
        }
    }
}

/// Scorer weights; no biases.
#[derive(Clone, Debug, PartialEq)]
pub struct UogsParams {
    pub w1: ParamId,
    pub w2: ParamId,
}

/// The GST guesser: parameter handles plus configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct GstModel {
    pub config: ModelConfig,
    pub objects: ObjectEncoder,
    pub qa: QaEncoder,
    pub uogs: UogsParams,
}

impl GstModel {
    /// Registers freshly initialized parameters in `store`.
    pub fn register<R: Rng>(config: ModelConfig, store: &mut ParameterStore, rng: &mut R) -> Result<Self> {
        let d = config.dim;
        let objects = ObjectEncoder::register(store, "object", config.num_categories, d, rng)?;
        let qa = QaEncoder::register(store, "qa", config.vocab_size, d, rng)?;
        let uogs = UogsParams {
            w1: store.add_xavier("uogs.w1", config.concat.width(d), config.scorer_hidden, rng)?,
            w2: store.add_xavier("uogs.w2", config.scorer_hidden, 1, rng)?,
        };
        Ok(GstModel { config, objects, qa, uogs })
    }

    /// New store seeded with `seed`, initialized for `config`.
    pub fn init(config: ModelConfig, seed: u64) -> Result<(Self, ParameterStore)> {
        let mut store = ParameterStore::new(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = GstModel::register(config, &mut store, &mut rng)?;
        Ok((model, store))
    }

    /// Looks up this model's parameters in an existing store.
    pub fn bind(config: ModelConfig, store: &ParameterStore) -> Result<Self> {
        let d = config.dim;
        let objects = ObjectEncoder::bind(store, "object", config.num_categories, d)?;
        let qa = QaEncoder::bind(store, "qa", config.vocab_size, d)?;
        let uogs = UogsParams {
            w1: store.expect("uogs.w1", config.concat.width(d), config.scorer_hidden)?,
            w2: store.expect("uogs.w2", config.scorer_hidden, 1)?,
        };
        Ok(GstModel { config, objects, qa, uogs })
    }

    /// Encodes the scene and sets `π⁽⁰⁾` uniform.
    pub fn begin(&self, g: &mut Graph<'_>, scene: &Scene, j_max: usize) -> Result<TrackerTrace> {
        let objects = encode_objects(g, scene, &self.objects)?;
        let m = scene.len();
        let pi0 = g.constant(Array::filled(m, 1, 1.0 / m as f64));
        let lstm = self.qa.initial_state(g);
        Ok(TrackerTrace { objects, states: vec![pi0], rounds: Vec::new(), lstm, j_max, renorm_faults: 0 })
    }

    /// Appends one round: UoVR, question/answer encoding, UoGS.
    pub fn track_round(
        &self,
        g: &mut Graph<'_>,
        trace: &mut TrackerTrace,
        question: &Question,
        answer: Answer,
    ) -> Result<()> {
        if trace.rounds.len() >= trace.j_max {
            return Err(Error::Contract(format!("already tracked J_max = {} rounds", trace.j_max)));
        }
        let pi_prev = *trace.states.last().expect("trace has π⁽⁰⁾");
        let (objects, visual) = uovr(g, pi_prev, trace.objects.rows)?;
        let partial = encode_question(g, question, visual, trace.lstm, &self.qa)?;
        let qa = encode_qa(g, partial, answer, &self.qa)?;
        let h_qa = qa.h_qa.expect("encode_qa sets h_qa");
        let update = uogs(g, pi_prev, objects, h_qa, &self.uogs, self.config.concat, self.config.norm)?;
        if update.underflow {
            trace.renorm_faults += 1;
        }
        trace.lstm = qa.state;
        trace.states.push(update.pi);
        trace.rounds.push(RoundTrace { pi_hat: update.pi_hat, visual, objects, encoding: qa });
        Ok(())
    }

    /// Tracks a fixed dialogue from scratch.
    pub fn track_dialogue<'a>(
        &self,
        g: &mut Graph<'_>,
        scene: &Scene,
        rounds: impl IntoIterator<Item = (&'a Question, Answer)>,
        j_max: usize,
    ) -> Result<TrackerTrace> {
        let mut trace = self.begin(g, scene, j_max)?;
        for (q, a) in rounds {
            self.track_round(g, &mut trace, q, a)?;
        }
        Ok(trace)
    }
}

/// Per-round intermediates.
#[derive(Clone, Copy, Debug)]
pub struct RoundTrace {
    /// Belief change `π̂⁽ʲ⁾` (m × 1).
    pub pi_hat: Var,
    /// Visual context `v⁽ʲ⁾` (1 × d).
    pub visual: Var,
    /// Re-weighted objects `O⁽ʲ⁾` (m × d).
    pub objects: Var,
    pub encoding: QaEncoding,
}

/// Everything tracked in one game so far. `states[j]` is `π⁽ʲ⁾` (m × 1).
#[derive(Clone, Debug)]
pub struct TrackerTrace {
    pub objects: ObjectFeatures,
    pub states: Vec<Var>,
    pub rounds: Vec<RoundTrace>,
    pub lstm: LstmState,
    pub j_max: usize,
    /// Rounds whose renormalization denominator underflowed.
    pub renorm_faults: usize,
}

impl TrackerTrace {
    pub fn state_values(&self, g: &Graph<'_>) -> Vec<Vec<f64>> {
        self.states.iter().map(|v| g.value(*v).data().to_vec()).collect()
    }

    pub fn last_state(&self, g: &Graph<'_>) -> Vec<f64> {
        g.value(*self.states.last().expect("non-empty")).data().to_vec()
    }
}

/// Validated probability vector over the objects of a scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GuessingState(Vec<f64>);

impl GuessingState {
    pub fn uniform(m: usize) -> Self {
        GuessingState(vec![1.0 / m as f64; m])
    }

    /// Accepts `pi` when entries are non-negative and sum to 1 within `tol`.
    pub fn new(pi: Vec<f64>, tol: f64) -> Result<Self> {
        if pi.is_empty() {
            return Err(Error::Contract("empty guessing state".into()));
        }
        if let Some(i) = pi.iter().position(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::Contract(format!("guessing state entry {i} is {}", pi[i])));
        }
        let sum: f64 = pi.iter().sum();
        if (sum - 1.0).abs() >= tol {
            return Err(Error::Contract(format!("guessing state sums to {sum}")));
        }
        Ok(GuessingState(pi))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Re-weights object rows by the previous belief and sums them.
///
/// Row `i` of the result is `π_prev[i] · O⁽⁰⁾[i]`; the visual context is the
/// column sum, i.e. the π-weighted sum of the original rows.
pub fn uovr(g: &mut Graph<'_>, pi_prev: Var, objects0: Var) -> Result<(Var, Var)> {
    let objects = g.scale_rows(objects0, pi_prev)?;
    let visual = g.sum_rows(objects)?;
    Ok((objects, visual))
}

/// Result of one guessing-state update.
#[derive(Clone, Copy, Debug)]
pub struct BeliefUpdate {
    pub pi_hat: Var,
    pub pi: Var,
    pub underflow: bool,
}

/// `π_new = norm(π_prev ⊙ π̂)` by division by the sum.
///
/// If the sum falls below [`NORM_FLOOR`] the update either resets to uniform
/// (when configured) or fails with [`Error::Renormalization`].
pub fn update_belief(g: &mut Graph<'_>, pi_prev: Var, pi_hat: Var, norm: NormConfig) -> Result<(Var, bool)> {
    let mut joint = g.mul(pi_prev, pi_hat)?;
    if norm.smoothing > 0.0 {
        joint = g.add_scalar(joint, norm.smoothing)?;
    }
    let n = g.normalize(joint, NORM_FLOOR)?;
    if !n.floored {
        return Ok((n.var, false));
    }
    if norm.reset_on_underflow {
        let (rows, cols) = g.value(pi_prev).shape();
        let m = rows * cols;
        Ok((g.constant(Array::filled(rows, cols, 1.0 / m as f64)), true))
    } else {
        Err(Error::Renormalization { sum: n.sum })
    }
}

/// Scores the belief change per object and applies it.
pub fn uogs(
    g: &mut Graph<'_>,
    pi_prev: Var,
    objects: Var,
    h_qa: Var,
    params: &UogsParams,
    concat: ConcatMode,
    norm: NormConfig,
) -> Result<BeliefUpdate> {
    let m = g.value(objects).rows();
    let joint = g.mul(h_qa, objects)?;
    let features = match concat {
        ConcatMode::Symmetric => {
            let h = g.repeat_rows(h_qa, m)?;
            g.concat(&[h, joint, objects], Axis::Cols)?
        }
        ConcatMode::Product => joint,
        ConcatMode::Pair => {
            let h = g.repeat_rows(h_qa, m)?;
            g.concat(&[h, objects], Axis::Cols)?
        }
    };
    let w1 = g.param(params.w1);
    let w2 = g.param(params.w2);
    let hidden = g.matmul(features, w1)?;
    let hidden = g.tanh(hidden)?;
    let scores = g.matmul(hidden, w2)?;
    let pi_hat = g.softmax(scores)?;
    let (pi, underflow) = update_belief(g, pi_prev, pi_hat, norm)?;
    Ok(BeliefUpdate { pi_hat, pi, underflow })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuessMode {
    /// Lowest index among the maxima.
    Argmax,
    /// Draw from the distribution.
    Sample,
}

pub fn final_guess<R: Rng>(pi: &[f64], mode: GuessMode, rng: &mut R) -> Result<usize> {
    if pi.is_empty() {
        return Err(Error::Contract("no guessing state to guess from".into()));
    }
    Ok(match mode {
        GuessMode::Argmax => {
            let mut best = 0;
            for (i, p) in pi.iter().enumerate() {
                if *p > pi[best] {
                    best = i;
                }
            }
            best
        }
        GuessMode::Sample => {
            let total: f64 = pi.iter().sum();
            let mut u = rng.gen::<f64>() * total;
            let mut pick = None;
            for (i, p) in pi.iter().enumerate() {
                if *p > 0.0 {
                    pick = Some(i);
                    if u < *p {
                        break;
                    }
                    u -= p;
                }
            }
            pick.unwrap_or(0)
        }
    })
}

/// When to stop asking.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopPolicy {
    None,
    /// Stop once `max(π) ≥ τ`.
    ConfidenceThreshold(f64),
    /// Stop once `KL(π⁽ʲ⁾ ‖ π⁽ʲ⁻¹⁾) < ε`.
    GainThreshold(f64),
}

/// `KL(p ‖ q)` with `0·log 0 = 0`; infinite where `p > 0 = q`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(&pi, &qi)| {
            if pi <= 0.0 {
                0.0
            } else if qi <= 0.0 {
                f64::INFINITY
            } else {
                pi * libm::log(pi / qi)
            }
        })
        .sum()
}

/// Evaluated after each completed round; never fires before round 1.
pub fn stop_decision(states: &[Vec<f64>], policy: &StopPolicy) -> bool {
    if states.len() < 2 {
        return false;
    }
    let last = &states[states.len() - 1];
    match *policy {
        StopPolicy::None => false,
        StopPolicy::ConfidenceThreshold(tau) => last.iter().copied().fold(f64::NEG_INFINITY, f64::max) >= tau,
        StopPolicy::GainThreshold(eps) => kl_divergence(last, &states[states.len() - 2]) < eps,
    }
}
