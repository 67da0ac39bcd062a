use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::scene::{NUM_ATTRIBUTES, NUM_COLORS};
use crate::error::{Error, Result};

/// Longest rendered question, in tokens.
pub const MAX_QUESTION_TOKENS: usize = 12;

pub const CATEGORY_NAMES: [&str; 10] = ["person", "car", "dog", "cat", "cow", "bird", "tree", "chair", "bus", "cup"];
pub const COLOR_NAMES: [&str; NUM_COLORS] = ["red", "green", "blue", "yellow"];
pub const SIZE_NAMES: [&str; 3] = ["small", "medium", "large"];

const FUNCTION_WORDS: [&str; 20] = [
    "<pad>", "<unk>", "is", "it", "a", "an", "in", "the", "?", "left", "right", "top", "bottom", "half", "middle",
    "column", "row", "yes", "no", "n/a",
];

pub const UNK: usize = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Answer {
    Yes,
    No,
    #[serde(rename = "NA")]
    NotApplicable,
}

impl Answer {
    pub const ALL: [Answer; 3] = [Answer::Yes, Answer::No, Answer::NotApplicable];

    /// Fixed ids: Yes = 0, No = 1, NA = 2.
    pub fn id(self) -> usize {
        match self {
            Answer::Yes => 0,
            Answer::No => 1,
            Answer::NotApplicable => 2,
        }
    }

    pub fn from_id(id: usize) -> Option<Answer> {
        Answer::ALL.get(id).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Answer::Yes => "yes",
            Answer::No => "no",
            Answer::NotApplicable => "na",
        }
    }

    /// Accepts `yes`/`no`/`na` (and `n/a`), case-insensitive.
    pub fn parse(s: &str) -> Option<Answer> {
        match s.trim().to_ascii_lowercase().as_str() {
            "yes" => Some(Answer::Yes),
            "no" => Some(Answer::No),
            "na" | "n/a" => Some(Answer::NotApplicable),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpatialPredicate {
    LeftHalf,
    RightHalf,
    TopHalf,
    BottomHalf,
    /// Horizontal centre third of the image (middle column band).
    MiddleColumn,
    /// Vertical centre third of the image (middle row band).
    MiddleRow,
}

impl SpatialPredicate {
    pub const ALL: [SpatialPredicate; 6] = [
        SpatialPredicate::LeftHalf,
        SpatialPredicate::RightHalf,
        SpatialPredicate::TopHalf,
        SpatialPredicate::BottomHalf,
        SpatialPredicate::MiddleColumn,
        SpatialPredicate::MiddleRow,
    ];

    fn words(self) -> [&'static str; 2] {
        match self {
            SpatialPredicate::LeftHalf => ["left", "half"],
            SpatialPredicate::RightHalf => ["right", "half"],
            SpatialPredicate::TopHalf => ["top", "half"],
            SpatialPredicate::BottomHalf => ["bottom", "half"],
            SpatialPredicate::MiddleColumn => ["middle", "column"],
            SpatialPredicate::MiddleRow => ["middle", "row"],
        }
    }
}

/// Structured question semantics. The guesser never sees this, only tokens.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Template {
    Category(usize),
    Attribute(usize),
    Spatial(SpatialPredicate),
    /// Question text without known semantics (e.g. loaded from a dataset).
    FreeText,
}

impl Template {
    /// Position in the inventory for `num_categories`, or `None` for free text.
    pub fn id(&self, num_categories: usize) -> Option<usize> {
        match *self {
            Template::Category(k) => Some(k),
            Template::Attribute(a) => Some(num_categories + a),
            Template::Spatial(p) => {
                Some(num_categories + NUM_ATTRIBUTES + SpatialPredicate::ALL.iter().position(|q| *q == p)?)
            }
            Template::FreeText => None,
        }
    }

    /// Word sequence of the rendered question.
    pub fn words(&self) -> Result<Vec<&'static str>> {
        Ok(match *self {
            Template::Category(k) => {
                let name = CATEGORY_NAMES
                    .get(k)
                    .ok_or_else(|| Error::Protocol(format!("unknown category {k}")))?;
                alloc::vec!["is", "it", "a", name, "?"]
            }
            Template::Attribute(a) if a < NUM_COLORS => alloc::vec!["is", "it", COLOR_NAMES[a], "?"],
            Template::Attribute(a) if a < NUM_ATTRIBUTES => alloc::vec!["is", "it", SIZE_NAMES[a - NUM_COLORS], "?"],
            Template::Attribute(a) => return Err(Error::Protocol(format!("unknown attribute {a}"))),
            Template::Spatial(p) => {
                let [w1, w2] = p.words();
                alloc::vec!["is", "it", "in", "the", w1, w2, "?"]
            }
            Template::FreeText => return Err(Error::Protocol("free-text question has no rendering".into())),
        })
    }
}

/// All templates for a world with `num_categories` categories, in id order.
pub fn template_inventory(num_categories: usize) -> Vec<Template> {
    (0..num_categories)
        .map(Template::Category)
        .chain((0..NUM_ATTRIBUTES).map(Template::Attribute))
        .chain(SpatialPredicate::ALL.iter().map(|p| Template::Spatial(*p)))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub template: Template,
    pub tokens: Vec<usize>,
}

impl Question {
    pub fn from_template(template: Template, vocab: &Vocabulary) -> Result<Question> {
        let tokens = template.words()?.iter().map(|w| vocab.id(w).unwrap_or(UNK)).collect();
        Ok(Question { template, tokens })
    }

    pub fn check(&self, vocab_size: usize) -> Result<()> {
        if self.tokens.is_empty() {
            return Err(Error::Contract("empty question".into()));
        }
        if self.tokens.len() > MAX_QUESTION_TOKENS {
            return Err(Error::Contract(format!("question has {} tokens", self.tokens.len())));
        }
        if let Some(t) = self.tokens.iter().find(|&&t| t >= vocab_size) {
            return Err(Error::Contract(format!("token id {t} outside vocabulary of {vocab_size}")));
        }
        Ok(())
    }
}

/// Token ↔ id table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    tokens: Vec<String>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Vocabulary::standard()
    }
}

impl Vocabulary {
    /// The fixed vocabulary of the synthetic world.
    pub fn standard() -> Vocabulary {
        let tokens = FUNCTION_WORDS
            .iter()
            .chain(CATEGORY_NAMES.iter())
            .chain(COLOR_NAMES.iter())
            .chain(SIZE_NAMES.iter())
            .map(|s| s.to_string())
            .collect();
        Vocabulary { tokens }
    }

    pub fn from_tokens(tokens: Vec<String>) -> Result<Vocabulary> {
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(Error::Config(format!("invalid token {t:?} at line {}", i + 1)));
            }
            if tokens[..i].contains(t) {
                return Err(Error::Config(format!("duplicate token {t:?}")));
            }
        }
        Ok(Vocabulary { tokens })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.tokens.iter().position(|t| t == word)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    /// Lowercases, splits off `?`, maps unknown words to `<unk>`.
    pub fn encode_text(&self, text: &str) -> Vec<usize> {
        let spaced = text.to_lowercase().replace('?', " ? ");
        spaced
            .split(|c: char| c.is_whitespace() || c == ',' || c == '.')
            .filter(|w| !w.is_empty())
            .take(MAX_QUESTION_TOKENS)
            .map(|w| self.id(w).unwrap_or(UNK))
            .collect()
    }

    pub fn decode(&self, ids: &[usize]) -> String {
        let words: Vec<&str> = ids.iter().map(|&i| self.token(i).unwrap_or("<unk>")).collect();
        words.join(" ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_vocabulary_is_small_and_unique() {
        let v = Vocabulary::standard();
        assert_eq!(v.len(), 37);
        assert!(Vocabulary::from_tokens(v.tokens().to_vec()).is_ok());
    }

    #[test]
    fn every_template_renders_within_limits() {
        let v = Vocabulary::standard();
        for t in template_inventory(10) {
            let q = Question::from_template(t.clone(), &v).unwrap();
            q.check(v.len()).unwrap();
            assert!(!q.tokens.contains(&UNK), "{t:?}");
        }
    }

    #[test]
    fn template_ids_are_positions() {
        for (i, t) in template_inventory(8).iter().enumerate() {
            assert_eq!(t.id(8), Some(i));
        }
    }

    #[test]
    fn answers_have_fixed_ids() {
        assert_eq!(Answer::Yes.id(), 0);
        assert_eq!(Answer::No.id(), 1);
        assert_eq!(Answer::NotApplicable.id(), 2);
        assert_eq!(Answer::parse("N/A"), Some(Answer::NotApplicable));
        assert_eq!(Answer::parse("maybe"), None);
    }

    #[test]
    fn text_encoding_maps_unknown_words() {
        let v = Vocabulary::standard();
        let ids = v.encode_text("Is it a giraffe?");
        assert_eq!(v.decode(&ids), "is it a <unk> ?");
    }
}
