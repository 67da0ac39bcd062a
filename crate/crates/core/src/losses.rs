//! Supervision on the sequence of guessing states.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};

/// Lower clamp applied to beliefs before taking the cross-entropy.
pub const CE_CLAMP: f64 = 1e-12;

/// Which supervision terms are switched on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Terms {
    pub es: bool,
    pub ps: bool,
    pub is: bool,
}

impl Terms {
    pub const FULL: Terms = Terms { es: true, ps: true, is: true };
    pub const WITHOUT_ES_PS: Terms = Terms { es: false, ps: false, is: true };
    pub const WITHOUT_IS: Terms = Terms { es: true, ps: true, is: false };
    pub const PS_ONLY: Terms = Terms { es: false, ps: true, is: false };

    pub fn label(self) -> &'static str {
        match (self.es, self.ps, self.is) {
            (true, true, true) => "full",
            (false, false, true) => "-ES&PS",
            (true, true, false) => "-IS",
            (false, true, false) => "PS",
            _ => "custom",
        }
    }
}

impl Default for Terms {
    fn default() -> Self {
        Terms::FULL
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupervisionConfig {
    /// Weight of the cross-entropy terms against the incremental term.
    pub alpha: f64,
    /// Offset inside the incremental log; must exceed 1.
    pub c: f64,
    pub j_max: usize,
    #[serde(default)]
    pub terms: Terms,
}

impl Default for SupervisionConfig {
    fn default() -> Self {
        SupervisionConfig { alpha: 0.7, c: 1.1, j_max: 5, terms: Terms::FULL }
    }
}

impl SupervisionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if !(self.c > 1.0) || !self.c.is_finite() {
            return Err(Error::Config(format!("c must be > 1, got {}", self.c)));
        }
        if self.j_max == 0 {
            return Err(Error::Config("j_max must be positive".into()));
        }
        Ok(())
    }
}

fn target_ce(g: &mut Graph<'_>, state: Var, target: usize) -> Result<Var> {
    let p = g.pick(state, target)?;
    let p = g.clamp_min(p, CE_CLAMP)?;
    let lp = g.log(p)?;
    g.scale(lp, -1.0)
}

fn check_states(states: &[Var]) -> Result<()> {
    if states.len() < 2 {
        return Err(Error::Contract("supervision needs at least one tracked round".into()));
    }
    Ok(())
}

/// Mean cross-entropy over rounds `1..J−1`, where `J = states.len() − 1`.
/// Zero for a single-round trace.
pub fn early_supervision(g: &mut Graph<'_>, states: &[Var], target: usize) -> Result<Var> {
    check_states(states)?;
    let j = states.len() - 1;
    if j == 1 {
        return Ok(g.constant(crate::autodiff::Array::scalar(0.0)));
    }
    let mut acc = target_ce(g, states[1], target)?;
    for s in &states[2..j] {
        let ce = target_ce(g, *s, target)?;
        acc = g.add(acc, ce)?;
    }
    g.scale(acc, 1.0 / (j - 1) as f64)
}

/// Cross-entropy of the last state.
pub fn plain_supervision(g: &mut Graph<'_>, states: &[Var], target: usize) -> Result<Var> {
    check_states(states)?;
    target_ce(g, *states.last().expect("checked"), target)
}

/// `−Σ_j log(π⁽ʲ⁾[t] − π⁽ʲ⁻¹⁾[t] + c)`.
pub fn incremental_supervision(g: &mut Graph<'_>, states: &[Var], target: usize, c: f64) -> Result<Var> {
    if !(c > 1.0) {
        return Err(Error::Config(format!("c must be > 1, got {c}")));
    }
    check_states(states)?;
    let mut prev = g.pick(states[0], target)?;
    let mut acc: Option<Var> = None;
    for s in &states[1..] {
        let cur = g.pick(*s, target)?;
        let delta = g.sub(cur, prev)?;
        let shifted = g.add_scalar(delta, c)?;
        let term = g.log(shifted)?;
        acc = Some(match acc {
            Some(a) => g.add(a, term)?,
            None => term,
        });
        prev = cur;
    }
    g.scale(acc.expect("at least one round"), -1.0)
}

/// Loss values of one game. Disabled terms read as zero so that
/// `total = α·(es + ps) + (1 − α)·is_` always holds.
#[derive(Clone, Debug)]
pub struct LossBreakdown {
    pub es: f64,
    pub ps: f64,
    pub is_: f64,
    pub total: f64,
    pub total_var: Var,
    /// Cross-entropy of each state `π⁽¹⁾ … π⁽ᴶ⁾`.
    pub per_round_ce: Vec<f64>,
    /// Target belief of each state `π⁽⁰⁾ … π⁽ᴶ⁾`.
    pub target_beliefs: Vec<f64>,
}

/// Weighted combination of the enabled terms.
pub fn sl_loss(g: &mut Graph<'_>, states: &[Var], target: usize, cfg: &SupervisionConfig) -> Result<LossBreakdown> {
    cfg.validate()?;
    check_states(states)?;
    let mut total: Option<Var> = None;
    let mut add = |g: &mut Graph<'_>, v: Var, w: f64| -> Result<()> {
        let wv = g.scale(v, w)?;
        total = Some(match total {
            Some(t) => g.add(t, wv)?,
            None => wv,
        });
        Ok(())
    };
    let (mut es, mut ps, mut is_) = (0.0, 0.0, 0.0);
    if cfg.terms.es {
        let v = early_supervision(g, states, target)?;
        es = g.scalar(v);
        add(g, v, cfg.alpha)?;
    }
    if cfg.terms.ps {
        let v = plain_supervision(g, states, target)?;
        ps = g.scalar(v);
        add(g, v, cfg.alpha)?;
    }
    if cfg.terms.is {
        let v = incremental_supervision(g, states, target, cfg.c)?;
        is_ = g.scalar(v);
        add(g, v, 1.0 - cfg.alpha)?;
    }
    let total_var = match total {
        Some(t) => t,
        None => return Err(Error::Config("no supervision term enabled".into())),
    };
    let target_beliefs: Vec<f64> = states.iter().map(|s| g.value(*s).data()[target]).collect();
    let per_round_ce = target_beliefs[1..].iter().map(|p| -libm::log(p.max(CE_CLAMP))).collect();
    Ok(LossBreakdown { es, ps, is_, total: g.scalar(total_var), total_var, per_round_ce, target_beliefs })
}

/// Self-play update for one game.
///
/// The final guess was sampled from the last state; `reward` is 1 when it hit
/// the target and 0 otherwise. Only successful games carry a learning signal,
/// and for them the loss is [`sl_loss`] on the realized trace. Returns `None`
/// for failed games.
pub fn rl_step_loss(
    g: &mut Graph<'_>,
    states: &[Var],
    target: usize,
    sampled_guess: usize,
    reward: f64,
    cfg: &SupervisionConfig,
) -> Result<Option<LossBreakdown>> {
    if reward == 1.0 {
        if sampled_guess != target {
            return Err(Error::Contract(format!("reward 1 but guess {sampled_guess} != target {target}")));
        }
        sl_loss(g, states, target, cfg).map(Some)
    } else if reward == 0.0 {
        Ok(None)
    } else {
        Err(Error::Contract(format!("reward must be 0 or 1, got {reward}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Array;

    fn states(g: &mut Graph<'_>, rows: &[&[f64]]) -> Vec<Var> {
        rows.iter().map(|r| g.constant(Array::column(r.to_vec()))).collect()
    }

    #[test]
    fn uniform_early_supervision_is_log_m() {
        let mut g = Graph::new();
        let s = states(&mut g, &[&[0.25; 4] as &[f64]; 6]);
        let es = early_supervision(&mut g, &s, 2).unwrap();
        assert!((g.scalar(es) - libm::log(4.0)).abs() < 1e-9);
    }

    #[test]
    fn early_supervision_skips_the_last_round() {
        let mut g = Graph::new();
        let mut rows: Vec<&[f64]> = alloc::vec![&[0.5, 0.5]; 5];
        rows.push(&[0.0, 1.0]);
        let s = states(&mut g, &rows);
        let es = early_supervision(&mut g, &s, 0).unwrap();
        assert!((g.scalar(es) - libm::log(2.0)).abs() < 1e-12);
    }

    #[test]
    fn plain_supervision_worked_values() {
        let mut g = Graph::new();
        let s = states(&mut g, &[&[0.125; 8], &[0.125; 8]]);
        let ps = plain_supervision(&mut g, &s, 0).unwrap();
        assert!((g.scalar(ps) - libm::log(8.0)).abs() < 1e-12);
        let s = states(&mut g, &[&[0.5, 0.5], &[1.0, 0.0]]);
        let ps = plain_supervision(&mut g, &s, 0).unwrap();
        assert_eq!(g.scalar(ps), 0.0);
    }

    #[test]
    fn incremental_worked_values() {
        let mut g = Graph::new();
        let s = states(&mut g, &[&[0.3, 0.7] as &[f64]; 6]);
        let is = incremental_supervision(&mut g, &s, 0, 1.1).unwrap();
        assert!((g.scalar(is) + 5.0 * libm::log(1.1)).abs() < 1e-9);
        let s = states(&mut g, &[&[0.25, 0.75], &[0.9, 0.1]]);
        let is = incremental_supervision(&mut g, &s, 0, 1.1).unwrap();
        assert!((g.scalar(is) + libm::log(1.75)).abs() < 1e-12);
        assert!(matches!(incremental_supervision(&mut g, &s, 0, 1.0), Err(Error::Config(_))));
    }

    #[test]
    fn breakdown_recombines() {
        let mut g = Graph::new();
        let s = states(&mut g, &[&[0.25; 4], &[0.4, 0.2, 0.2, 0.2], &[0.1, 0.3, 0.3, 0.3], &[0.7, 0.1, 0.1, 0.1]]);
        let cfg = SupervisionConfig::default();
        let b = sl_loss(&mut g, &s, 0, &cfg).unwrap();
        assert!((b.total - (0.7 * (b.es + b.ps) + 0.3 * b.is_)).abs() < 1e-9);
        assert_eq!(b.target_beliefs, alloc::vec![0.25, 0.4, 0.1, 0.7]);
        assert_eq!(b.per_round_ce.len(), 3);

        let cfg = SupervisionConfig { terms: Terms::WITHOUT_IS, ..cfg };
        let b = sl_loss(&mut g, &s, 0, &cfg).unwrap();
        assert_eq!(b.is_, 0.0);
        assert!((b.total - 0.7 * (b.es + b.ps)).abs() < 1e-12);
    }

    #[test]
    fn rl_rewards() {
        let mut g = Graph::new();
        let s = states(&mut g, &[&[0.5, 0.5], &[0.8, 0.2]]);
        let cfg = SupervisionConfig::default();
        assert!(rl_step_loss(&mut g, &s, 0, 1, 0.0, &cfg).unwrap().is_none());
        assert!(rl_step_loss(&mut g, &s, 0, 0, 1.0, &cfg).unwrap().is_some());
        assert!(matches!(rl_step_loss(&mut g, &s, 0, 0, 0.5, &cfg), Err(Error::Contract(_))));
    }
}
