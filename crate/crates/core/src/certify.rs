//! Finite-difference certification of every differentiable operation and of
//! the composite models, on small random instances.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::gradcheck::{check_inputs, check_params, GradCheck};
use crate::autodiff::{Array, Axis, Graph, LstmCell, LstmState, ParameterStore, Var};
use crate::encoder::{encode_qa, encode_question, QaEncoder};
use crate::env::{generate_corpus, EnvConfig, GameRecord, Split, Vocabulary};
use crate::error::Result;
use crate::losses::{sl_loss, SupervisionConfig};
use crate::model::{Model, ModelSpec};
use crate::tracker::ModelConfig;

/// Step of the central differences.
pub const FD_STEP: f64 = 1e-5;

fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Array {
    Array::new(rows, cols, (0..rows * cols).map(|_| rng.gen_range(lo..hi)).collect()).expect("shape")
}

/// `Σ x ⊙ w` for a fixed random `w`, so every entry of `x` gets a distinct
/// upstream gradient.
fn reduce(g: &mut Graph<'_>, x: Var, seed: u64) -> Result<Var> {
    let (r, c) = g.value(x).shape();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let w = g.constant(random(&mut rng, r, c, -1.0, 1.0));
    let p = g.mul(x, w)?;
    g.sum(p)
}

/// One check per elementary op, on shapes drawn from `1..=max_dim`.
pub fn op_suite(seed: u64, max_dim: usize) -> Result<Vec<(&'static str, GradCheck)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (m, k, n) = (rng.gen_range(1..=max_dim), rng.gen_range(1..=max_dim), rng.gen_range(1..=max_dim));
    let h = FD_STEP;
    let a = random(&mut rng, m, k, -1.0, 1.0);
    let b = random(&mut rng, k, n, -1.0, 1.0);
    let c = random(&mut rng, m, k, -1.0, 1.0);
    let row = random(&mut rng, 1, k, -1.0, 1.0);
    let pos = random(&mut rng, m, k, 0.2, 2.0);
    let col = random(&mut rng, m, 1, -2.0, 2.0);
    let ids: Vec<usize> = (0..rng.gen_range(1..=max_dim)).map(|_| rng.gen_range(0..m)).collect();
    // Entries kept away from the clamp threshold so the kink is never straddled.
    let kinked = Array::new(
        m,
        k,
        (0..m * k).map(|_| if rng.gen_bool(0.5) { rng.gen_range(0.1..1.0) } else { rng.gen_range(-1.0..-0.1) }).collect(),
    )?;
    let s = seed;
    let mut out = Vec::new();
    out.push(("matmul", check_inputs(&[a.clone(), b.clone()], h, |g, v| {
        let y = g.matmul(v[0], v[1])?;
        reduce(g, y, s)
    })?));
    out.push(("add", check_inputs(&[a.clone(), c.clone()], h, |g, v| {
        let y = g.add(v[0], v[1])?;
        reduce(g, y, s)
    })?));
    out.push(("sub_row_broadcast", check_inputs(&[a.clone(), row.clone()], h, |g, v| {
        let y = g.sub(v[0], v[1])?;
        reduce(g, y, s)
    })?));
    out.push(("mul_row_broadcast", check_inputs(&[row.clone(), c.clone()], h, |g, v| {
        let y = g.mul(v[0], v[1])?;
        reduce(g, y, s)
    })?));
    out.push(("mul_scalar_broadcast", check_inputs(&[Array::scalar(0.7), c.clone()], h, |g, v| {
        let y = g.mul(v[0], v[1])?;
        reduce(g, y, s)
    })?));
    out.push(("tanh", check_inputs(&[a.clone()], h, |g, v| {
        let y = g.tanh(v[0])?;
        reduce(g, y, s)
    })?));
    out.push(("sigmoid", check_inputs(&[a.clone()], h, |g, v| {
        let y = g.sigmoid(v[0])?;
        reduce(g, y, s)
    })?));
    out.push(("log", check_inputs(&[pos.clone()], h, |g, v| {
        let y = g.log(v[0])?;
        reduce(g, y, s)
    })?));
    out.push(("scale", check_inputs(&[a.clone()], h, |g, v| {
        let y = g.scale(v[0], -1.7)?;
        reduce(g, y, s)
    })?));
    out.push(("add_scalar", check_inputs(&[a.clone()], h, |g, v| {
        let y = g.add_scalar(v[0], 1.1)?;
        let y = g.mul(y, y)?;
        reduce(g, y, s)
    })?));
    out.push(("clamp_min", check_inputs(&[kinked], h, |g, v| {
        let y = g.clamp_min(v[0], 0.0)?;
        reduce(g, y, s)
    })?));
    out.push(("softmax", check_inputs(&[col.clone()], h, |g, v| {
        let y = g.softmax(v[0])?;
        reduce(g, y, s)
    })?));
    out.push(("concat_cols", check_inputs(&[a.clone(), c.clone()], h, |g, v| {
        let y = g.concat(&[v[0], v[1]], Axis::Cols)?;
        reduce(g, y, s)
    })?));
    out.push(("concat_rows", check_inputs(&[a.clone(), c.clone()], h, |g, v| {
        let y = g.concat(&[v[0], v[1]], Axis::Rows)?;
        reduce(g, y, s)
    })?));
    let start = rng.gen_range(0..k);
    let len = rng.gen_range(1..=k - start);
    out.push(("slice_cols", check_inputs(&[a.clone()], h, |g, v| {
        let y = g.slice_cols(v[0], start, len)?;
        reduce(g, y, s)
    })?));
    out.push(("repeat_rows", check_inputs(&[row.clone()], h, |g, v| {
        let y = g.repeat_rows(v[0], m)?;
        reduce(g, y, s)
    })?));
    out.push(("scale_rows", check_inputs(&[a.clone(), col.clone()], h, |g, v| {
        let y = g.scale_rows(v[0], v[1])?;
        reduce(g, y, s)
    })?));
    out.push(("sum_rows", check_inputs(&[a.clone()], h, |g, v| {
        let y = g.sum_rows(v[0])?;
        reduce(g, y, s)
    })?));
    out.push(("sum", check_inputs(&[a.clone()], h, |g, v| {
        let y = g.sum(v[0])?;
        let y = g.mul(y, y)?;
        g.sum(y)
    })?));
    let at = rng.gen_range(0..m * k);
    out.push(("pick", check_inputs(&[a.clone()], h, |g, v| {
        let y = g.pick(v[0], at)?;
        let y = g.tanh(y)?;
        g.sum(y)
    })?));
    out.push(("normalize", check_inputs(&[pos], h, |g, v| {
        let y = g.normalize(v[0], 1e-30)?.var;
        reduce(g, y, s)
    })?));
    out.push(("gather", check_inputs(&[a.clone()], h, |g, v| {
        let y = g.gather(v[0], &ids)?;
        reduce(g, y, s)
    })?));
    out.push(("transpose", check_inputs(&[a], h, |g, v| {
        let y = g.transpose(v[0])?;
        reduce(g, y, s)
    })?));
    Ok(out)
}

/// Four chained LSTM steps from a random hidden state; checks weights and inputs.
pub fn lstm_chain(seed: u64, din: usize, dh: usize) -> Result<GradCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParameterStore::new(seed);
    let wih = store.add("lstm.weight_ih", random(&mut rng, din, 4 * dh, -0.6, 0.6))?;
    let whh = store.add("lstm.weight_hh", random(&mut rng, dh, 4 * dh, -0.6, 0.6))?;
    let bias = store.add("lstm.bias", random(&mut rng, 1, 4 * dh, -0.3, 0.3))?;
    let xs: Vec<Array> = (0..4).map(|_| random(&mut rng, 1, din, -1.0, 1.0)).collect();
    let h0 = random(&mut rng, 1, dh, -0.5, 0.5);
    let run = |g: &mut Graph<'_>, inputs: &[Var]| -> Result<Var> {
        let cell = LstmCell { weight_ih: alloc::vec![g.param(wih)], weight_hh: g.param(whh), bias: g.param(bias), hidden: dh };
        let c0 = g.constant(Array::zeros(1, dh));
        let state = cell.run(g, &inputs[..4], LstmState { h: inputs[4], c: c0 })?;
        let both = g.concat(&[state.h, state.c], Axis::Cols)?;
        reduce(g, both, seed)
    };
    let mut all = xs;
    all.push(h0);
    // Inputs live in the store as well so one pass covers weights and inputs.
    let mut with_inputs = store;
    let input_ids: Vec<_> = all
        .iter()
        .enumerate()
        .map(|(i, a)| with_inputs.add(&alloc::format!("x{i}"), a.clone()))
        .collect::<Result<_>>()?;
    check_params(&with_inputs, FD_STEP, |g| {
        let vars: Vec<Var> = input_ids.iter().map(|id| g.param(*id)).collect();
        run(g, &vars)
    })
}

fn tiny_corpus(seed: u64, m: usize, j: usize, num_categories: usize) -> Result<GameRecord> {
    let env = EnvConfig { min_objects: m, max_objects: m, j_max: j, num_categories, ..EnvConfig::default() };
    Ok(generate_corpus(&env, Split::Train, 1, seed)?.remove(0))
}

/// Question encoder followed by the QA-pair layer, chained over two rounds
/// with fixed visual contexts.
pub fn qa_encoder(seed: u64, d: usize) -> Result<GradCheck> {
    let vocab = Vocabulary::standard();
    let game = tiny_corpus(seed, 4, 2, 8)?;
    let mut store = ParameterStore::new(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let enc = QaEncoder::register(&mut store, "qa", vocab.len(), d, &mut rng)?;
    let visual: Vec<Array> = (0..2).map(|_| random(&mut rng, 1, d, -1.0, 1.0)).collect();
    check_params(&store, FD_STEP, |g| {
        let mut state = enc.initial_state(g);
        let mut acc = Vec::new();
        for (qa, v) in game.rounds.iter().zip(&visual) {
            let v = g.constant(v.clone());
            let partial = encode_question(g, &qa.question, v, state, &enc)?;
            let full = encode_qa(g, partial, qa.answer, &enc)?;
            state = full.state;
            acc.push(full.h_qa.expect("set"));
        }
        let y = g.concat(&acc, Axis::Cols)?;
        reduce(g, y, seed)
    })
}

/// Full supervised loss of a `j`-round game with `m` objects, for every
/// parameter of the model.
pub fn model_loss(spec: &ModelSpec, seed: u64, m: usize, j: usize) -> Result<GradCheck> {
    let game = tiny_corpus(seed, m, j, spec.config.num_categories)?;
    let (model, store) = Model::init(spec, seed)?;
    let sup = SupervisionConfig { j_max: j, ..SupervisionConfig::default() };
    check_params(&store, FD_STEP, |g| {
        let states = model.track(g, &game.scene, &game.rounds, j)?;
        Ok(sl_loss(g, &states, game.target_index, &sup)?.total_var)
    })
}

/// The GST composite at the certification size: d = dh = 8.
pub fn gst_spec(d: usize) -> ModelSpec {
    ModelSpec::gst(ModelConfig { dim: d, scorer_hidden: d, ..ModelConfig::default() })
}
