#![allow(dead_code)]

use std::path::Path;

use gst_core::env::{generate_corpus, EnvConfig, Split};
use gst_core::model::{Model, ModelSpec};
use gst_core::tracker::ModelConfig;
use gst_core::train::{train_sl, Checkpoint, TrainConfig};

pub fn untrained(dir: &Path) -> Checkpoint {
    let spec = ModelSpec::gst(ModelConfig { dim: 8, scorer_hidden: 8, ..ModelConfig::desk() });
    let (_, store) = Model::init(&spec, 5).unwrap();
    let ckpt = Checkpoint { spec, store, env: EnvConfig::default(), train: TrainConfig::desk(), epoch: 0, metrics: vec![] };
    gst::checkpoint::save(dir, &ckpt).unwrap();
    ckpt
}

/// A small model trained for a few seconds; good enough to follow answers.
pub fn trained(dir: &Path) -> Checkpoint {
    let env = EnvConfig::default();
    let train = generate_corpus(&env, Split::Train, 1500, 11).unwrap();
    let mut cfg = TrainConfig::desk();
    cfg.sl.epochs = 8;
    cfg.sl.patience = 0;
    let spec = ModelSpec::gst(ModelConfig::desk());
    let ckpt = train_sl(&spec, &train, &[], &env, &cfg, &mut |_| {}).unwrap();
    gst::checkpoint::save(dir, &ckpt).unwrap();
    ckpt
}
