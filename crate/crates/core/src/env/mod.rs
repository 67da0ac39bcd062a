//! Synthetic GuessWhat?!-style world: scene generator, rule-based Oracle and
//! scripted question generator.

mod game;
mod oracle;
mod qgen;
mod question;
mod scene;

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use game::{play_game, scripted_dialogue, GameOptions, GameRecord, GameStatus, Guesser, PosteriorGuesser, PosteriorSession, QaPair, UniformGuesser};
pub use oracle::{evaluate_template, oracle_answer};
pub use qgen::{answers_match, consistent_objects, qgen_next, worst_case_elimination, QGenPolicy};
pub use question::{
    template_inventory, Answer, Question, SpatialPredicate, Template, Vocabulary, CATEGORY_NAMES, COLOR_NAMES,
    MAX_QUESTION_TOKENS, SIZE_NAMES, UNK,
};
pub use scene::{
    color_of_category, generate_scene, size_attribute, Scene, SceneObject, NUM_ATTRIBUTES, NUM_COLORS, NUM_SIZES,
};

use crate::error::{Error, Result};

/// World and game settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub width: u32,
    pub height: u32,
    pub grid_cols: u32,
    pub grid_rows: u32,
    pub min_objects: usize,
    pub max_objects: usize,
    pub num_categories: usize,
    pub j_max: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            width: 640,
            height: 480,
            grid_cols: 6,
            grid_rows: 4,
            min_objects: 3,
            max_objects: 10,
            num_categories: 8,
            j_max: 5,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        let capacity = (self.grid_cols * self.grid_rows) as usize;
        if self.min_objects < 3 || self.max_objects > 20 || self.min_objects > self.max_objects {
            return Err(Error::Config(format!(
                "object range {}..={} must lie within 3..=20",
                self.min_objects, self.max_objects
            )));
        }
        if self.max_objects > capacity {
            return Err(Error::Config(format!(
                "{} objects exceed grid capacity {capacity}",
                self.max_objects
            )));
        }
        if self.num_categories == 0 || self.num_categories > CATEGORY_NAMES.len() {
            return Err(Error::Config(format!(
                "num_categories must be in 1..={}",
                CATEGORY_NAMES.len()
            )));
        }
        if self.grid_cols == 0 || self.grid_rows == 0 || self.width < 8 * self.grid_cols || self.height < 8 * self.grid_rows {
            return Err(Error::Config("image too small for the placement grid".into()));
        }
        if self.j_max == 0 {
            return Err(Error::Config("j_max must be positive".into()));
        }
        Ok(())
    }
}

/// SplitMix64-style mixing of a base seed with a stream and an index.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0xD6E8_FEB8_6659_FD93))
        .wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Disjoint seed streams for the corpus splits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
    /// Freshly generated scenes for evaluation.
    NewGame,
}

impl Split {
    fn stream(self) -> u64 {
        match self {
            Split::Train => 1,
            Split::Val => 2,
            Split::Test => 3,
            Split::NewGame => 4,
        }
    }

    pub fn scene_seed(self, corpus_seed: u64, index: u64) -> u64 {
        derive_seed(corpus_seed, self.stream(), index)
    }

    fn game_seed(self, corpus_seed: u64, index: u64) -> u64 {
        derive_seed(corpus_seed, self.stream() + 100, index)
    }
}

/// Generates `n` games of one split: fresh scene, uniform target, GreedySplit
/// dialogue of `j_max` rounds with truthful answers. The record's status is
/// the exact-posterior guesser's outcome.
pub fn generate_corpus(config: &EnvConfig, split: Split, n: usize, seed: u64) -> Result<Vec<GameRecord>> {
    config.validate()?;
    let vocab = Vocabulary::standard();
    let options = GameOptions::greedy(config.j_max, config.num_categories);
    (0..n as u64)
        .map(|i| {
            let scene = generate_scene(split.scene_seed(seed, i), config)?;
            let mut rng = ChaCha8Rng::seed_from_u64(split.game_seed(seed, i));
            let target = rng.gen_range(0..scene.len());
            let mut record = play_game(&scene, target, &PosteriorGuesser, &options, &vocab, &mut rng)?;
            record.id = i;
            record.final_pi = None;
            Ok(record)
        })
        .collect()
}
