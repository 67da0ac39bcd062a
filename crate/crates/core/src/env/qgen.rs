use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::oracle::evaluate_template;
use super::question::{template_inventory, Answer, Question, Template, Vocabulary};
use super::scene::Scene;
use super::QaPair;
use crate::error::{Error, Result};

/// Scripted question generator policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum QGenPolicy {
    /// Uniform over templates not yet asked.
    Random,
    /// Most balanced split of the objects still consistent with the history.
    GreedySplit,
    /// Replays a fixed list, skipping anything already asked.
    Fixed(Vec<Template>),
}

/// Indices of objects whose truthful answers agree with every structured QA
/// pair in `history`. Free-text rounds constrain nothing.
pub fn consistent_objects(scene: &Scene, history: &[QaPair]) -> Vec<usize> {
    (0..scene.len())
        .filter(|&i| {
            history.iter().all(|qa| match qa.question.template {
                Template::FreeText => true,
                ref t => evaluate_template(scene, i, t).map_or(false, |a| a == qa.answer),
            })
        })
        .collect()
}

/// Number of candidates eliminated under the least informative answer.
pub fn worst_case_elimination(scene: &Scene, candidates: &[usize], template: &Template) -> Result<usize> {
    let mut counts = [0usize; 3];
    for &i in candidates {
        counts[evaluate_template(scene, i, template)?.id()] += 1;
    }
    let largest = counts.iter().copied().max().unwrap_or(0);
    Ok(candidates.len() - largest)
}

/// Picks the next question. Templates already asked in `history` are never
/// repeated; when none remain the result is [`Error::Exhausted`].
pub fn qgen_next<R: Rng>(
    scene: &Scene,
    num_categories: usize,
    history: &[QaPair],
    policy: &QGenPolicy,
    vocab: &Vocabulary,
    rng: &mut R,
) -> Result<Question> {
    let asked = |t: &Template| history.iter().any(|qa| qa.question.template == *t);
    let template = match policy {
        QGenPolicy::Random => {
            let open: Vec<Template> = template_inventory(num_categories).into_iter().filter(|t| !asked(t)).collect();
            if open.is_empty() {
                return Err(Error::Exhausted);
            }
            open[rng.gen_range(0..open.len())].clone()
        }
        QGenPolicy::GreedySplit => {
            let candidates = consistent_objects(scene, history);
            let mut best: Option<(usize, Template)> = None;
            for t in template_inventory(num_categories).into_iter().filter(|t| !asked(t)) {
                let score = worst_case_elimination(scene, &candidates, &t)?;
                if best.as_ref().map_or(true, |(s, _)| score > *s) {
                    best = Some((score, t));
                }
            }
            best.ok_or(Error::Exhausted)?.1
        }
        QGenPolicy::Fixed(script) => script.iter().find(|t| !asked(t)).cloned().ok_or(Error::Exhausted)?,
    };
    Question::from_template(template, vocab)
}

/// Answer-only view used by reference guessers.
pub fn answers_match(scene: &Scene, index: usize, template: &Template, answer: Answer) -> bool {
    match template {
        Template::FreeText => true,
        t => evaluate_template(scene, index, t).map_or(false, |a| a == answer),
    }
}
