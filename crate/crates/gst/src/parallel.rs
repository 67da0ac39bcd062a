//! Evaluation spread over worker threads. Games are seeded by index, so the
//! report is identical for every worker count.

use std::num::NonZeroUsize;

use gst_core::env::{GameRecord, Guesser};
use gst_core::eval::{eval_game, EvalReport, EvalSettings};

use crate::error::Result;

pub fn eval_records<G: Guesser + Sync>(
    guesser: &G,
    settings: &EvalSettings,
    source: &[GameRecord],
    jobs: NonZeroUsize,
) -> Result<Vec<GameRecord>> {
    let n = settings.games;
    let jobs = jobs.get().min(n.max(1));
    let chunk = n.div_ceil(jobs).max(1);
    let parts: Vec<Result<Vec<GameRecord>>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..n)
            .step_by(chunk)
            .map(|start| {
                s.spawn(move || {
                    (start..(start + chunk).min(n))
                        .map(|i| eval_game(guesser, settings, source, i).map_err(Into::into))
                        .collect()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("evaluation worker panicked")).collect()
    });
    let mut out = Vec::with_capacity(n);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

pub fn evaluate<G: Guesser + Sync>(
    guesser: &G,
    settings: &EvalSettings,
    source: &[GameRecord],
    jobs: NonZeroUsize,
) -> Result<(EvalReport, Vec<GameRecord>)> {
    if settings.games == 0 {
        return Err(gst_core::Error::Config("number of evaluation games must be positive".into()).into());
    }
    let records = eval_records(guesser, settings, source, jobs)?;
    let report = EvalReport::from_records(settings.split.name(), &records, settings.env.j_max)?;
    Ok((report, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use gst_core::env::{EnvConfig, PosteriorGuesser};
    use gst_core::eval::{EvalMode, EvalSplit};

    #[test]
    fn worker_count_does_not_change_the_report() {
        let s = EvalSettings::new(EvalSplit::NewGame, 37, EvalMode::Sample, 2, EnvConfig::default());
        let one = evaluate(&PosteriorGuesser, &s, &[], NonZeroUsize::new(1).unwrap()).unwrap();
        let four = evaluate(&PosteriorGuesser, &s, &[], NonZeroUsize::new(4).unwrap()).unwrap();
        assert_eq!(one, four);
        assert_eq!(one.0, gst_core::eval::evaluate(&PosteriorGuesser, &s, &[]).unwrap());
    }
}
