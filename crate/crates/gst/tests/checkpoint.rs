mod common;

use std::fs;

use gst::checkpoint::{decode_params, encode_params, load, save};
use gst_core::autodiff::{Array, ParameterStore};
use gst_core::env::EnvConfig;
use gst_core::eval::{evaluate, EvalMode, EvalSettings, EvalSplit};
use gst_core::model::{Model, ModelSpec};
use gst_core::tracker::{ConcatMode, ModelConfig};
use gst_core::train::{Checkpoint, TrainConfig};
use proptest::prelude::*;

fn bits(store: &ParameterStore) -> Vec<(String, (usize, usize), Vec<u64>)> {
    store.iter().map(|(_, n, a)| (n.to_owned(), a.shape(), a.data().iter().map(|x| x.to_bits()).collect())).collect()
}

#[test]
fn reload_reproduces_evaluation_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let trained = common::trained(dir.path());
    let loaded = load(dir.path()).unwrap();
    assert_eq!(bits(&trained.store), bits(&loaded.store));
    assert_eq!(trained.spec, loaded.spec);
    assert_eq!(trained.metrics, loaded.metrics);

    let settings = EvalSettings::new(EvalSplit::NewGame, 150, EvalMode::Greedy, 3, EnvConfig::default());
    let (a, b) = (trained.model().unwrap(), loaded.model().unwrap());
    let ra = evaluate(&a.guesser(&trained.store, 5), &settings, &[]).unwrap();
    let rb = evaluate(&b.guesser(&loaded.store, 5), &settings, &[]).unwrap();
    assert_eq!(ra, rb);

    // Saving the reloaded checkpoint gives the same bytes.
    let again = tempfile::tempdir().unwrap();
    save(again.path(), &loaded).unwrap();
    for f in ["params.bin", "manifest.txt", "checkpoint.json"] {
        assert_eq!(fs::read(dir.path().join(f)).unwrap(), fs::read(again.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn baseline_and_product_specs_round_trip() {
    let cfg = ModelConfig { dim: 6, scorer_hidden: 5, ..ModelConfig::desk() };
    let product = ModelSpec::gst(ModelConfig { concat: ConcatMode::Product, ..cfg.clone() });
    for spec in [ModelSpec::baseline(cfg), product] {
        let (_, store) = Model::init(&spec, 2).unwrap();
        let ckpt = Checkpoint { spec: spec.clone(), store, env: EnvConfig::default(), train: TrainConfig::desk(), epoch: 3, metrics: vec![] };
        let dir = tempfile::tempdir().unwrap();
        save(dir.path(), &ckpt).unwrap();
        let back = load(dir.path()).unwrap();
        assert_eq!(back.spec, spec);
        assert_eq!(back.epoch, 3);
        assert_eq!(bits(&back.store), bits(&ckpt.store));
    }
}

#[test]
fn damaged_checkpoints_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    common::untrained(dir.path());
    let p = dir.path();
    let params = fs::read(p.join("params.bin")).unwrap();
    let manifest = fs::read_to_string(p.join("manifest.txt")).unwrap();
    let meta = fs::read_to_string(p.join("checkpoint.json")).unwrap();
    let restore = || {
        fs::write(p.join("params.bin"), &params).unwrap();
        fs::write(p.join("manifest.txt"), &manifest).unwrap();
        fs::write(p.join("checkpoint.json"), &meta).unwrap();
    };

    fs::write(p.join("params.bin"), &params[..params.len() - 3]).unwrap();
    assert_eq!(load(p).unwrap_err().category(), "format");
    restore();

    let mut flipped = params.clone();
    flipped[0] ^= 1;
    fs::write(p.join("params.bin"), flipped).unwrap();
    assert_eq!(load(p).unwrap_err().category(), "format");
    restore();

    // A manifest that disagrees with the weights.
    let line = manifest.lines().nth(1).unwrap();
    let mut parts: Vec<&str> = line.split(' ').collect();
    let wider = (parts[2].parse::<usize>().unwrap() + 1).to_string();
    parts[2] = &wider;
    fs::write(p.join("manifest.txt"), manifest.replacen(line, &parts.join(" "), 1)).unwrap();
    assert!(load(p).is_err());
    restore();

    // A spec the stored parameters cannot bind to.
    fs::write(p.join("checkpoint.json"), meta.replacen("\"dim\": 8", "\"dim\": 9", 1)).unwrap();
    assert!(load(p).is_err());
    restore();

    fs::remove_file(p.join("checkpoint.json")).unwrap();
    assert_eq!(load(p).unwrap_err().category(), "not-found");
    restore();
    assert!(load(p).is_ok());
}

proptest! {
    #[test]
    fn parameter_files_preserve_every_bit(
        seed in any::<u64>(),
        shapes in prop::collection::vec((1usize..5, 1usize..5), 1..6),
        raw in prop::collection::vec(any::<u64>(), 100),
    ) {
        let mut store = ParameterStore::new(seed);
        let mut k = 0;
        for (i, (r, c)) in shapes.iter().enumerate() {
            let data = (0..r * c).map(|_| { k += 1; { let x = f64::from_bits(raw[k % raw.len()]); if x.is_finite() { x } else { -0.0 } } }).collect();
            store.add(&format!("p{i}.weight"), Array::new(*r, *c, data).unwrap()).unwrap();
        }
        let back = decode_params(&encode_params(&store)).unwrap();
        prop_assert_eq!(back.seed(), seed);
        prop_assert_eq!(bits(&back), bits(&store));
    }
}
