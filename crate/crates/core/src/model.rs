//! A trainable guesser of either kind behind one interface.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Array, Graph, LstmState, ParameterStore, Var};
use crate::env::{Answer, Guesser, QaPair, Question, Scene};
use crate::error::{Error, Result};
use crate::eval::baseline::BaselineModel;
use crate::tracker::{GstModel, ModelConfig, TrackerTrace};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    Gst,
    Baseline,
}

/// Architecture choice plus its hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(default)]
    pub kind: ModelKind,
    #[serde(flatten)]
    pub config: ModelConfig,
}

impl ModelSpec {
    pub fn gst(config: ModelConfig) -> Self {
        ModelSpec { kind: ModelKind::Gst, config }
    }

    pub fn baseline(config: ModelConfig) -> Self {
        ModelSpec { kind: ModelKind::Baseline, config }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Gst(GstModel),
    Baseline(BaselineModel),
}

impl Model {
    pub fn init(spec: &ModelSpec, seed: u64) -> Result<(Model, ParameterStore)> {
        let mut store = ParameterStore::new(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = match spec.kind {
            ModelKind::Gst => Model::Gst(GstModel::register(spec.config.clone(), &mut store, &mut rng)?),
            ModelKind::Baseline => Model::Baseline(BaselineModel::register(spec.config.clone(), &mut store, &mut rng)?),
        };
        Ok((model, store))
    }

    pub fn bind(spec: &ModelSpec, store: &ParameterStore) -> Result<Model> {
        Ok(match spec.kind {
            ModelKind::Gst => Model::Gst(GstModel::bind(spec.config.clone(), store)?),
            ModelKind::Baseline => Model::Baseline(BaselineModel::bind(spec.config.clone(), store)?),
        })
    }

    pub fn spec(&self) -> ModelSpec {
        match self {
            Model::Gst(m) => ModelSpec::gst(m.config.clone()),
            Model::Baseline(m) => ModelSpec::baseline(m.config.clone()),
        }
    }

    /// Belief states `π⁽⁰⁾ … π⁽ᴶ⁾` (each m × 1) for a fixed dialogue.
    pub fn track(&self, g: &mut Graph<'_>, scene: &Scene, rounds: &[QaPair], j_max: usize) -> Result<Vec<Var>> {
        if rounds.len() > j_max {
            return Err(Error::Contract(alloc::format!("{} rounds exceed J_max {j_max}", rounds.len())));
        }
        match self {
            Model::Gst(m) => {
                let trace = m.track_dialogue(g, scene, rounds.iter().map(|r| (&r.question, r.answer)), j_max)?;
                Ok(trace.states)
            }
            Model::Baseline(m) => {
                let (objects, mut state) = m.begin(g, scene)?;
                let n = scene.len();
                let mut states = alloc::vec![g.constant(Array::filled(n, 1, 1.0 / n as f64))];
                for r in rounds {
                    state = m.read_round(g, state, &r.question, r.answer)?;
                    states.push(m.distribution(g, objects, state)?);
                }
                Ok(states)
            }
        }
    }

    pub fn guesser<'a>(&'a self, store: &'a ParameterStore, j_max: usize) -> ModelGuesser<'a> {
        ModelGuesser { model: self, store, j_max }
    }
}

/// Any [`Model`] playing as a [`Guesser`] over a frozen parameter snapshot.
#[derive(Clone, Copy)]
pub struct ModelGuesser<'a> {
    pub model: &'a Model,
    pub store: &'a ParameterStore,
    pub j_max: usize,
}

enum Progress {
    Gst(TrackerTrace),
    Baseline { objects: Var, lstm: LstmState },
}

pub struct ModelSession<'a> {
    graph: Graph<'a>,
    progress: Progress,
    states: Vec<Vec<f64>>,
}

impl<'a> ModelSession<'a> {
    pub fn trace(&self) -> Option<&TrackerTrace> {
        match &self.progress {
            Progress::Gst(t) => Some(t),
            Progress::Baseline { .. } => None,
        }
    }

    pub fn renorm_faults(&self) -> usize {
        self.trace().map_or(0, |t| t.renorm_faults)
    }
}

impl<'a> Guesser for ModelGuesser<'a> {
    type Session = ModelSession<'a>;

    fn start(&self, scene: &Scene) -> Result<ModelSession<'a>> {
        let mut graph = Graph::with_params(self.store);
        let n = scene.len();
        let progress = match self.model {
            Model::Gst(m) => Progress::Gst(m.begin(&mut graph, scene, self.j_max)?),
            Model::Baseline(m) => {
                let (objects, lstm) = m.begin(&mut graph, scene)?;
                Progress::Baseline { objects, lstm }
            }
        };
        Ok(ModelSession { graph, progress, states: alloc::vec![alloc::vec![1.0 / n as f64; n]] })
    }

    fn observe(&self, s: &mut ModelSession<'a>, question: &Question, answer: Answer) -> Result<()> {
        let pi = match (&mut s.progress, self.model) {
            (Progress::Gst(trace), Model::Gst(m)) => {
                m.track_round(&mut s.graph, trace, question, answer)?;
                trace.last_state(&s.graph)
            }
            (Progress::Baseline { objects, lstm }, Model::Baseline(m)) => {
                if s.states.len() > self.j_max {
                    return Err(Error::Contract(alloc::format!("already observed J_max = {} rounds", self.j_max)));
                }
                *lstm = m.read_round(&mut s.graph, *lstm, question, answer)?;
                let d = m.distribution(&mut s.graph, *objects, *lstm)?;
                s.graph.value(d).data().to_vec()
            }
            _ => unreachable!("session started by the same guesser"),
        };
        s.states.push(pi);
        Ok(())
    }

    fn states<'s>(&self, s: &'s ModelSession<'a>) -> &'s [Vec<f64>] {
        &s.states
    }
}
