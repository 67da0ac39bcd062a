//! Single-step guesser: one LSTM pass over the whole dialogue, then a dot
//! product with each object embedding. No belief is carried between rounds.

use rand::Rng;

use crate::autodiff::{Graph, LstmCell, LstmState, ParamId, ParameterStore, Var};
use crate::encoder::{encode_objects, ObjectEncoder};
use crate::env::{Answer, Question, Scene};
use crate::error::Result;
use crate::tracker::ModelConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineModel {
    pub config: ModelConfig,
    pub objects: ObjectEncoder,
    pub word_embedding: ParamId,
    pub answer_embedding: ParamId,
    pub lstm_weight_ih: ParamId,
    pub lstm_weight_hh: ParamId,
    pub lstm_bias: ParamId,
}

impl BaselineModel {
    pub fn register<R: Rng>(config: ModelConfig, store: &mut ParameterStore, rng: &mut R) -> Result<Self> {
        let d = config.dim;
        Ok(BaselineModel {
            objects: ObjectEncoder::register(store, "baseline.object", config.num_categories, d, rng)?,
            word_embedding: store.add_xavier("baseline.word_embedding", config.vocab_size, d, rng)?,
            answer_embedding: store.add_xavier("baseline.answer_embedding", Answer::ALL.len(), d, rng)?,
            lstm_weight_ih: store.add_xavier("baseline.lstm.weight_ih", d, 4 * d, rng)?,
            lstm_weight_hh: store.add_xavier("baseline.lstm.weight_hh", d, 4 * d, rng)?,
            lstm_bias: store.add_zeros("baseline.lstm.bias", 1, 4 * d)?,
            config,
        })
    }

    pub fn bind(config: ModelConfig, store: &ParameterStore) -> Result<Self> {
        let d = config.dim;
        Ok(BaselineModel {
            objects: ObjectEncoder::bind(store, "baseline.object", config.num_categories, d)?,
            word_embedding: store.expect("baseline.word_embedding", config.vocab_size, d)?,
            answer_embedding: store.expect("baseline.answer_embedding", Answer::ALL.len(), d)?,
            lstm_weight_ih: store.expect("baseline.lstm.weight_ih", d, 4 * d)?,
            lstm_weight_hh: store.expect("baseline.lstm.weight_hh", d, 4 * d)?,
            lstm_bias: store.expect("baseline.lstm.bias", 1, 4 * d)?,
            config,
        })
    }

    fn cell(&self, g: &mut Graph<'_>) -> LstmCell {
        LstmCell {
            weight_ih: alloc::vec![g.param(self.lstm_weight_ih)],
            weight_hh: g.param(self.lstm_weight_hh),
            bias: g.param(self.lstm_bias),
            hidden: self.config.dim,
        }
    }

    /// Object embeddings and the zero LSTM state.
    pub fn begin(&self, g: &mut Graph<'_>, scene: &Scene) -> Result<(Var, LstmState)> {
        let objects = encode_objects(g, scene, &self.objects)?.rows;
        let z = g.constant(crate::autodiff::Array::zeros(1, self.config.dim));
        Ok((objects, LstmState { h: z, c: z }))
    }

    /// Feeds the question tokens and then the answer as one more step.
    pub fn read_round(&self, g: &mut Graph<'_>, state: LstmState, question: &Question, answer: Answer) -> Result<LstmState> {
        question.check(self.config.vocab_size)?;
        let cell = self.cell(g);
        let words = g.param(self.word_embedding);
        let words = g.gather(words, &question.tokens)?;
        let answers = g.param(self.answer_embedding);
        let a = g.gather(answers, &[answer.id()])?;
        let inputs = g.concat(&[words, a], crate::autodiff::Axis::Rows)?;
        let projected = g.matmul(inputs, cell.weight_ih[0])?;
        let mut state = state;
        for t in 0..=question.tokens.len() {
            let p = g.gather(projected, &[t])?;
            state = cell.step_projected(g, p, state)?;
        }
        Ok(state)
    }

    /// `softmax(O · hᵀ)` as an m × 1 column.
    pub fn distribution(&self, g: &mut Graph<'_>, objects: Var, state: LstmState) -> Result<Var> {
        let ht = g.transpose(state.h)?;
        let scores = g.matmul(objects, ht)?;
        g.softmax(scores)
    }
}
