//! Object featurization and visually conditioned question/answer encoding.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::autodiff::{Array, Axis, Graph, LstmCell, LstmState, ParamId, ParameterStore, Var};
use crate::env::{Answer, Question, Scene};
use crate::error::{Error, Result};

/// Width of the spatial vector.
pub const SPATIAL_DIM: usize = 8;

/// `[x_min, y_min, x_max, y_max, x_center, y_center, w_box, h_box]`,
/// coordinates scaled to `[-1, 1]` and sizes to `(0, 2]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpatialVector(pub [f64; SPATIAL_DIM]);

pub fn spatial_features(scene: &Scene, index: usize) -> Result<SpatialVector> {
    let o = scene
        .objects
        .get(index)
        .ok_or_else(|| Error::Contract(format!("object index {index} out of {}", scene.len())))?;
    let [x, y, w, h] = o.bbox;
    let sx = |v: f64| 2.0 * v / scene.width - 1.0;
    let sy = |v: f64| 2.0 * v / scene.height - 1.0;
    Ok(SpatialVector([
        sx(x),
        sy(y),
        sx(x + w),
        sy(y + h),
        sx(x + w / 2.0),
        sy(y + h / 2.0),
        2.0 * w / scene.width,
        2.0 * h / scene.height,
    ]))
}

/// Parameters of the object MLP: category embedding plus one affine layer.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectEncoder {
    pub category_embedding: ParamId,
    pub weight: ParamId,
    pub bias: ParamId,
    pub num_categories: usize,
    pub dim: usize,
}

impl ObjectEncoder {
    pub fn register<R: Rng>(
        store: &mut ParameterStore,
        prefix: &str,
        num_categories: usize,
        dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(ObjectEncoder {
            category_embedding: store.add_xavier(&format!("{prefix}.category_embedding"), num_categories, dim, rng)?,
            weight: store.add_xavier(&format!("{prefix}.weight"), dim + SPATIAL_DIM, dim, rng)?,
            bias: store.add_zeros(&format!("{prefix}.bias"), 1, dim)?,
            num_categories,
            dim,
        })
    }

    pub fn bind(store: &ParameterStore, prefix: &str, num_categories: usize, dim: usize) -> Result<Self> {
        Ok(ObjectEncoder {
            category_embedding: store.expect(&format!("{prefix}.category_embedding"), num_categories, dim)?,
            weight: store.expect(&format!("{prefix}.weight"), dim + SPATIAL_DIM, dim)?,
            bias: store.expect(&format!("{prefix}.bias"), 1, dim)?,
            num_categories,
            dim,
        })
    }
}

/// Initial object representations `O⁽⁰⁾` (m × d) with their inputs.
#[derive(Clone, Debug)]
pub struct ObjectFeatures {
    pub rows: Var,
    pub provenance: Vec<(usize, SpatialVector)>,
}

impl ObjectFeatures {
    pub fn len(&self) -> usize {
        self.provenance.len()
    }

    pub fn is_empty(&self) -> bool {
        self.provenance.is_empty()
    }
}

/// Row `i` is `tanh(W·[category_embedding(c_i); spatial_i] + b)`.
pub fn encode_objects(g: &mut Graph<'_>, scene: &Scene, enc: &ObjectEncoder) -> Result<ObjectFeatures> {
    let mut provenance = Vec::with_capacity(scene.len());
    let mut spatial = Vec::with_capacity(scene.len() * SPATIAL_DIM);
    for (i, o) in scene.objects.iter().enumerate() {
        if o.category_id >= enc.num_categories {
            return Err(Error::Config(format!(
                "object {i} has category {} but the model knows {}",
                o.category_id, enc.num_categories
            )));
        }
        let sv = spatial_features(scene, i)?;
        spatial.extend_from_slice(&sv.0);
        provenance.push((o.category_id, sv));
    }
    let ids: Vec<usize> = provenance.iter().map(|(c, _)| *c).collect();
    let table = g.param(enc.category_embedding);
    let cats = g.gather(table, &ids)?;
    let spatial = g.constant(Array::new(scene.len(), SPATIAL_DIM, spatial)?);
    let input = g.concat(&[cats, spatial], Axis::Cols)?;
    let w = g.param(enc.weight);
    let b = g.param(enc.bias);
    let pre = g.matmul(input, w)?;
    let pre = g.add(pre, b)?;
    let rows = g.tanh(pre)?;
    Ok(ObjectFeatures { rows, provenance })
}

/// Parameters of the question LSTM and the QA-pair MLP.
#[derive(Clone, Debug, PartialEq)]
pub struct QaEncoder {
    pub word_embedding: ParamId,
    pub lstm_weight_word: ParamId,
    pub lstm_weight_visual: ParamId,
    pub lstm_weight_hh: ParamId,
    pub lstm_bias: ParamId,
    pub answer_embedding: ParamId,
    pub qa_weight: ParamId,
    pub qa_bias: ParamId,
    pub vocab_size: usize,
    pub dim: usize,
}

impl QaEncoder {
    pub fn register<R: Rng>(
        store: &mut ParameterStore,
        prefix: &str,
        vocab_size: usize,
        dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let d = dim;
        Ok(QaEncoder {
            word_embedding: store.add_xavier(&format!("{prefix}.word_embedding"), vocab_size, d, rng)?,
            lstm_weight_word: store.add_xavier(&format!("{prefix}.lstm.weight_word"), d, 4 * d, rng)?,
            lstm_weight_visual: store.add_xavier(&format!("{prefix}.lstm.weight_visual"), d, 4 * d, rng)?,
            lstm_weight_hh: store.add_xavier(&format!("{prefix}.lstm.weight_hh"), d, 4 * d, rng)?,
            lstm_bias: store.add_zeros(&format!("{prefix}.lstm.bias"), 1, 4 * d)?,
            answer_embedding: store.add_xavier(&format!("{prefix}.answer_embedding"), Answer::ALL.len(), d, rng)?,
            qa_weight: store.add_xavier(&format!("{prefix}.weight"), 2 * d, d, rng)?,
            qa_bias: store.add_zeros(&format!("{prefix}.bias"), 1, d)?,
            vocab_size,
            dim,
        })
    }

    pub fn bind(store: &ParameterStore, prefix: &str, vocab_size: usize, dim: usize) -> Result<Self> {
        let d = dim;
        Ok(QaEncoder {
            word_embedding: store.expect(&format!("{prefix}.word_embedding"), vocab_size, d)?,
            lstm_weight_word: store.expect(&format!("{prefix}.lstm.weight_word"), d, 4 * d)?,
            lstm_weight_visual: store.expect(&format!("{prefix}.lstm.weight_visual"), d, 4 * d)?,
            lstm_weight_hh: store.expect(&format!("{prefix}.lstm.weight_hh"), d, 4 * d)?,
            lstm_bias: store.expect(&format!("{prefix}.lstm.bias"), 1, 4 * d)?,
            answer_embedding: store.expect(&format!("{prefix}.answer_embedding"), Answer::ALL.len(), d)?,
            qa_weight: store.expect(&format!("{prefix}.weight"), 2 * d, d)?,
            qa_bias: store.expect(&format!("{prefix}.bias"), 1, d)?,
            vocab_size,
            dim,
        })
    }

    /// The LSTM over `[word; visual]` inputs.
    pub fn cell(&self, g: &mut Graph<'_>) -> LstmCell {
        LstmCell {
            weight_ih: alloc::vec![g.param(self.lstm_weight_word), g.param(self.lstm_weight_visual)],
            weight_hh: g.param(self.lstm_weight_hh),
            bias: g.param(self.lstm_bias),
            hidden: self.dim,
        }
    }

    /// Zero hidden and cell state for the first round.
    pub fn initial_state(&self, g: &mut Graph<'_>) -> LstmState {
        let z = g.constant(Array::zeros(1, self.dim));
        LstmState { h: z, c: z }
    }
}

/// Question (and, once [`encode_qa`] ran, answer) encoding of one round.
#[derive(Clone, Copy, Debug)]
pub struct QaEncoding {
    /// Final LSTM hidden state over the question.
    pub h: Var,
    /// QA-pair representation.
    pub h_qa: Option<Var>,
    /// Hidden and cell state carried into the next round.
    pub state: LstmState,
}

/// Runs the LSTM over `[w_i; v]` for each token, starting from the previous
/// round's carried state.
pub fn encode_question(
    g: &mut Graph<'_>,
    question: &Question,
    visual: Var,
    prev: LstmState,
    enc: &QaEncoder,
) -> Result<QaEncoding> {
    question.check(enc.vocab_size)?;
    let cell = enc.cell(g);
    // The visual part of the input is shared by every token of the round.
    let visual_proj = g.matmul(visual, cell.weight_ih[1])?;
    let table = g.param(enc.word_embedding);
    let words = g.gather(table, &question.tokens)?;
    let word_proj = g.matmul(words, cell.weight_ih[0])?;
    let mut state = prev;
    for t in 0..question.tokens.len() {
        let wp = if question.tokens.len() == 1 { word_proj } else { g.gather(word_proj, &[t])? };
        let projected = g.add(wp, visual_proj)?;
        state = cell.step_projected(g, projected, state)?;
    }
    Ok(QaEncoding { h: state.h, h_qa: None, state })
}

/// `h_qa = tanh(W·[h; a] + b)` with a learned answer embedding `a`.
pub fn encode_qa(g: &mut Graph<'_>, partial: QaEncoding, answer: Answer, enc: &QaEncoder) -> Result<QaEncoding> {
    let table = g.param(enc.answer_embedding);
    let a = g.gather(table, &[answer.id()])?;
    let ha = g.concat(&[partial.h, a], Axis::Cols)?;
    let w = g.param(enc.qa_weight);
    let b = g.param(enc.qa_bias);
    let pre = g.matmul(ha, w)?;
    let pre = g.add(pre, b)?;
    let h_qa = g.tanh(pre)?;
    Ok(QaEncoding { h_qa: Some(h_qa), ..partial })
}
