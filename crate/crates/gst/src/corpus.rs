//! Line-delimited game corpora.
//!
//! The first line is a header object carrying `schema_version`; every later
//! line is one [`GameRecord`].

use std::fmt::Write as _;
use std::path::Path;

use gst_core::env::{
    color_of_category, Answer, EnvConfig, GameRecord, GameStatus, QaPair, Question, Scene, SceneObject, Split,
    Template, Vocabulary, CATEGORY_NAMES,
};
use serde::{Deserialize, Serialize};

use crate::error::{read_string, write, Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusHeader {
    pub schema_version: u32,
    pub split: Option<Split>,
    pub seed: Option<u64>,
    pub env: Option<EnvConfig>,
    pub games: usize,
}

pub fn corpus_text(header: &CorpusHeader, records: &[GameRecord]) -> String {
    let mut s = serde_json::to_string(header).expect("serializable");
    s.push('\n');
    for r in records {
        writeln!(s, "{}", serde_json::to_string(r).expect("serializable")).unwrap();
    }
    s
}

pub fn write_corpus(path: &Path, header: &CorpusHeader, records: &[GameRecord]) -> Result<()> {
    write(path, corpus_text(header, records))
}

pub fn read_corpus(path: &Path) -> Result<(CorpusHeader, Vec<GameRecord>)> {
    let text = read_string(path)?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or_else(|| Error::format(path, "empty corpus"))?;
    let header: CorpusHeader =
        serde_json::from_str(first).map_err(|e| Error::format(path, format!("line 1: bad header: {e}")))?;
    if header.schema_version != SCHEMA_VERSION {
        return Err(Error::format(path, format!("unsupported schema_version {}", header.schema_version)));
    }
    let records = lines
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::format(path, format!("line {}: {e}", i + 1))))
        .collect::<Result<Vec<GameRecord>>>()?;
    if records.len() != header.games {
        return Err(Error::format(path, format!("header announces {} games, found {}", header.games, records.len())));
    }
    Ok((header, records))
}

#[derive(Deserialize)]
struct GwImage {
    width: f64,
    height: f64,
}

#[derive(Deserialize)]
struct GwObject {
    id: u64,
    category: String,
    bbox: [f64; 4],
}

#[derive(Deserialize)]
struct GwQa {
    question: String,
    answer: String,
}

#[derive(Deserialize)]
struct GwGame {
    id: u64,
    image: GwImage,
    objects: Vec<GwObject>,
    object_id: u64,
    qas: Vec<GwQa>,
    status: String,
}

/// One game in the public GuessWhat?! JSON-lines format.
///
/// Categories are matched by name against the synthetic world's categories;
/// questions become free-text token sequences; boxes are clipped to the image.
pub fn parse_guesswhat_line(line: &str, vocab: &Vocabulary, num_categories: usize) -> Result<GameRecord, String> {
    let g: GwGame = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let mut objects = Vec::with_capacity(g.objects.len());
    for o in &g.objects {
        let category = CATEGORY_NAMES[..num_categories]
            .iter()
            .position(|n| *n == o.category)
            .ok_or_else(|| format!("game {}: category {:?} is not modelled", g.id, o.category))?;
        let [x, y, w, h] = o.bbox;
        let (x, y) = (x.clamp(0.0, g.image.width), y.clamp(0.0, g.image.height));
        let bbox = [x, y, w.min(g.image.width - x), h.min(g.image.height - y)];
        objects.push(SceneObject { category_id: category, bbox, attribute_ids: vec![color_of_category(category)] });
    }
    let scene = Scene { width: g.image.width, height: g.image.height, objects };
    scene.validate().map_err(|e| format!("game {}: {e}", g.id))?;
    let target_index = g
        .objects
        .iter()
        .position(|o| o.id == g.object_id)
        .ok_or_else(|| format!("game {}: target object {} not in scene", g.id, g.object_id))?;
    let rounds = g
        .qas
        .iter()
        .map(|qa| {
            let answer = Answer::parse(&qa.answer).ok_or_else(|| format!("game {}: answer {:?}", g.id, qa.answer))?;
            let tokens = vocab.encode_text(&qa.question);
            if tokens.is_empty() {
                return Err(format!("game {}: empty question", g.id));
            }
            Ok(QaPair { question: Question { template: Template::FreeText, tokens }, answer })
        })
        .collect::<Result<Vec<_>, String>>()?;
    let status = match g.status.as_str() {
        "success" => GameStatus::Success,
        "failure" => GameStatus::Failure,
        "incomplete" => GameStatus::Incomplete,
        s => return Err(format!("game {}: status {s:?}", g.id)),
    };
    Ok(GameRecord { id: g.id, scene, target_index, rounds, status, guess: None, final_pi: None, trace: None })
}

pub fn load_guesswhat(path: &Path, vocab: &Vocabulary, num_categories: usize) -> Result<Vec<GameRecord>> {
    read_string(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_guesswhat_line(l, vocab, num_categories).map_err(|e| Error::format(path, format!("line {}: {e}", i + 1))))
        .collect()
}

/// One token per line.
pub fn vocabulary_text(vocab: &Vocabulary) -> String {
    vocab.tokens().iter().map(|t| format!("{t}\n")).collect()
}

pub fn read_vocabulary(path: &Path) -> Result<Vocabulary> {
    let tokens = read_string(path)?.lines().map(str::to_owned).collect();
    Ok(Vocabulary::from_tokens(tokens)?)
}
