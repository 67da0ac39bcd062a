use alloc::vec::Vec;

use super::{Graph, Var};
use crate::error::{Error, Result};

/// Single-layer LSTM cell weights as graph nodes.
///
/// The input weight may be split into row blocks, one per input part, so a
/// concatenated input `[x_1; x_2]` is projected as `x_1·W_1 + x_2·W_2`.
/// Gate columns are ordered input, forget, candidate, output.
#[derive(Clone, Debug)]
pub struct LstmCell {
    pub weight_ih: Vec<Var>,
    pub weight_hh: Var,
    pub bias: Var,
    pub hidden: usize,
}

/// Carried `(hidden, cell)` pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LstmState {
    pub h: Var,
    pub c: Var,
}

impl LstmCell {
    /// Input projection `Σ_k parts[k] · weight_ih[k]`.
    pub fn project(&self, g: &mut Graph<'_>, parts: &[Var]) -> Result<Var> {
        if parts.len() != self.weight_ih.len() {
            return Err(Error::Contract(alloc::format!(
                "lstm expects {} input parts, got {}",
                self.weight_ih.len(),
                parts.len()
            )));
        }
        let mut acc = g.matmul(parts[0], self.weight_ih[0])?;
        for (x, w) in parts.iter().zip(&self.weight_ih).skip(1) {
            let p = g.matmul(*x, *w)?;
            acc = g.add(acc, p)?;
        }
        Ok(acc)
    }

    /// One step from an already projected input (`1 × 4·hidden`).
    pub fn step_projected(&self, g: &mut Graph<'_>, projected: Var, state: LstmState) -> Result<LstmState> {
        let d = self.hidden;
        let rec = g.matmul(state.h, self.weight_hh)?;
        let pre = g.add(projected, rec)?;
        let pre = g.add(pre, self.bias)?;
        let i = g.slice_cols(pre, 0, d)?;
        let f = g.slice_cols(pre, d, d)?;
        let cand = g.slice_cols(pre, 2 * d, d)?;
        let o = g.slice_cols(pre, 3 * d, d)?;
        let i = g.sigmoid(i)?;
        let f = g.sigmoid(f)?;
        let cand = g.tanh(cand)?;
        let o = g.sigmoid(o)?;
        let kept = g.mul(f, state.c)?;
        let written = g.mul(i, cand)?;
        let c = g.add(kept, written)?;
        let tc = g.tanh(c)?;
        let h = g.mul(o, tc)?;
        Ok(LstmState { h, c })
    }

    /// Standard LSTM step on input parts `parts`.
    pub fn step(&self, g: &mut Graph<'_>, parts: &[Var], state: LstmState) -> Result<LstmState> {
        let projected = self.project(g, parts)?;
        self.step_projected(g, projected, state)
    }

    /// Runs a whole sequence of single-part inputs.
    pub fn run(&self, g: &mut Graph<'_>, inputs: &[Var], mut state: LstmState) -> Result<LstmState> {
        for x in inputs {
            state = self.step(g, &[*x], state)?;
        }
        Ok(state)
    }
}

/// Free-function form of a single LSTM step with an unsplit input.
pub fn lstm_step(g: &mut Graph<'_>, x: Var, state: LstmState, cell: &LstmCell) -> Result<LstmState> {
    cell.step(g, &[x], state)
}
