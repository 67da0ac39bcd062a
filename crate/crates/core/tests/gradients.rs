use gst_core::certify::{gst_spec, lstm_chain, model_loss, op_suite, qa_encoder};
use gst_core::model::ModelSpec;
use gst_core::tracker::{ConcatMode, ModelConfig};

const TOL: f64 = 1e-4;

#[test]
fn every_op_matches_central_differences() {
    for seed in 0..100 {
        for (op, r) in op_suite(seed, 8).unwrap() {
            assert!(r.max_rel_err < TOL, "{op} seed {seed}: {r:?}");
            assert!(r.checked > 0);
        }
    }
}

#[test]
fn lstm_through_four_steps() {
    for seed in 0..20 {
        let r = lstm_chain(seed, 5, 8).unwrap();
        assert!(r.max_rel_err < TOL, "seed {seed}: {r:?}");
    }
}

#[test]
fn question_and_answer_encoder() {
    for seed in 0..5 {
        let r = qa_encoder(seed, 6).unwrap();
        assert!(r.max_rel_err < TOL, "seed {seed}: {r:?}");
    }
}

#[test]
fn full_gst_round_all_parameters() {
    for seed in 0..20 {
        let r = model_loss(&gst_spec(8), seed, 5, 3).unwrap();
        assert!(r.max_rel_err < TOL, "seed {seed}: {r:?}");
    }
}

#[test]
fn reduced_concatenations_and_short_trace() {
    for concat in [ConcatMode::Product, ConcatMode::Pair] {
        let spec = ModelSpec::gst(ModelConfig { dim: 6, scorer_hidden: 5, concat, ..ModelConfig::default() });
        let r = model_loss(&spec, 3, 4, 2).unwrap();
        assert!(r.max_rel_err < TOL, "{concat:?}: {r:?}");
    }
    let r = model_loss(&gst_spec(6), 11, 3, 2).unwrap();
    assert!(r.max_rel_err < TOL, "{r:?}");
}

#[test]
fn baseline_guesser() {
    for seed in 0..3 {
        let spec = ModelSpec::baseline(ModelConfig { dim: 6, ..ModelConfig::default() });
        let r = model_loss(&spec, seed, 5, 3).unwrap();
        assert!(r.max_rel_err < TOL, "seed {seed}: {r:?}");
    }
}
