//! Round-by-round text rendering of a recorded game.

use std::fmt::Write as _;

use gst_core::env::{GameRecord, Vocabulary, CATEGORY_NAMES};

use crate::error::{Error, Result};

/// One row per state `π⁽⁰⁾ … π⁽ᴶ⁾`, one column per object. Row `j ≥ 1` is
/// labelled with the question and answer of round `j`. Probabilities are
/// printed with the shortest representation that reads back exactly.
pub fn render(record: &GameRecord, vocab: &Vocabulary) -> Result<String> {
    let trace = record
        .trace
        .as_ref()
        .filter(|t| !t.is_empty())
        .ok_or_else(|| Error::NotFound(format!("belief trace of game {}", record.id)))?;
    let mut s = String::new();
    writeln!(s, "game {}  target #{}  status {:?}", record.id, record.target_index, record.status).unwrap();
    for (i, o) in record.scene.objects.iter().enumerate() {
        let name = CATEGORY_NAMES.get(o.category_id).copied().unwrap_or("?");
        let mark = if i == record.target_index { "  <- target" } else { "" };
        writeln!(s, "  #{i} {name} box {:?}{mark}", o.bbox).unwrap();
    }
    let q_width = record.rounds.iter().map(|qa| vocab.decode(&qa.question.tokens).len()).max().unwrap_or(0).max(8);
    write!(s, "{:>5}  {:q_width$}  {:6}", "round", "question", "answer").unwrap();
    for i in 0..record.scene.len() {
        write!(s, "  {:>10}", format!("#{i}")).unwrap();
    }
    s.push('\n');
    for (j, pi) in trace.iter().enumerate() {
        let (q, a) = match j.checked_sub(1).and_then(|r| record.rounds.get(r)) {
            Some(qa) => (vocab.decode(&qa.question.tokens), qa.answer.as_str()),
            None => (String::new(), ""),
        };
        write!(s, "{j:>5}  {q:q_width$}  {a:6}").unwrap();
        for p in pi {
            write!(s, "  {:>10}", format!("{p}")).unwrap();
        }
        s.push('\n');
    }
    if let Some(g) = record.guess {
        writeln!(s, "guess #{g}").unwrap();
    }
    Ok(s)
}

/// Parses the probability columns back out of a rendered table.
pub fn parse_rows(rendered: &str, objects: usize) -> Vec<Vec<f64>> {
    rendered
        .lines()
        .filter(|l| l.split_whitespace().next().is_some_and(|w| w.parse::<usize>().is_ok()))
        .map(|l| {
            let cols: Vec<&str> = l.split_whitespace().collect();
            cols[cols.len() - objects..].iter().map(|c| c.parse().expect("number")).collect()
        })
        .collect()
}
