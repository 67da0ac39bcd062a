//! Central finite-difference certification of analytic gradients.

use alloc::string::String;
use alloc::vec::Vec;

use super::{Array, Graph, ParameterStore, Var};
use crate::error::Result;

/// Largest disagreement found, with where it happened.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    pub max_rel_err: f64,
    /// Parameter name (or `input{k}`) and flat index of the worst entry.
    pub worst: (String, usize),
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

impl GradCheck {
    fn new() -> Self {
        GradCheck { max_rel_err: 0.0, worst: (String::new(), 0), analytic: 0.0, numeric: 0.0, checked: 0 }
    }

    fn update(&mut self, name: &str, index: usize, analytic: f64, numeric: f64) {
        let err = rel_err(analytic, numeric);
        self.checked += 1;
        if err > self.max_rel_err || self.checked == 1 {
            *self = GradCheck { max_rel_err: err, worst: (name.into(), index), analytic, numeric, checked: self.checked };
        }
    }
}

/// `|a − n| / max(|a|, |n|, 1e-6)`; the floor keeps entries whose true value is below the
/// rounding noise of the central difference from dominating.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Checks `d loss / d input` for every entry of every input array.
pub fn check_inputs<F>(inputs: &[Array], h: f64, build: F) -> Result<GradCheck>
where
    F: Fn(&mut Graph<'_>, &[Var]) -> Result<Var>,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|a| g.input(a.clone())).collect();
    let loss = build(&mut g, &vars)?;
    g.backward_inputs(loss)?;
    let analytic: Vec<Array> = vars
        .iter()
        .zip(inputs)
        .map(|(v, a)| g.grad(*v).cloned().unwrap_or_else(|| Array::zeros(a.rows(), a.cols())))
        .collect();
    let eval = |perturbed: &[Array]| -> Result<f64> {
        let mut g = Graph::new();
        let vars: Vec<Var> = perturbed.iter().map(|a| g.constant(a.clone())).collect();
        let loss = build(&mut g, &vars)?;
        Ok(g.scalar(loss))
    };
    let mut report = GradCheck::new();
    let mut work = inputs.to_vec();
    for k in 0..inputs.len() {
        for i in 0..inputs[k].len() {
            let x = inputs[k].data()[i];
            work[k].data_mut()[i] = x + h;
            let up = eval(&work)?;
            work[k].data_mut()[i] = x - h;
            let down = eval(&work)?;
            work[k].data_mut()[i] = x;
            report.update(&alloc::format!("input{k}"), i, analytic[k].data()[i], (up - down) / (2.0 * h));
        }
    }
    Ok(report)
}

/// Checks `d loss / d θ` for every scalar of every parameter in `store`.
pub fn check_params<F>(store: &ParameterStore, h: f64, build: F) -> Result<GradCheck>
where
    F: Fn(&mut Graph<'_>) -> Result<Var>,
{
    let mut grads = store.zero_grads();
    {
        let mut g = Graph::with_params(store);
        let loss = build(&mut g)?;
        g.backward(loss, &mut grads)?;
    }
    let eval = |s: &ParameterStore| -> Result<f64> {
        let mut g = Graph::with_params(s);
        let loss = build(&mut g)?;
        Ok(g.scalar(loss))
    };
    let mut report = GradCheck::new();
    let mut work = store.clone();
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        for i in 0..store.value(id).len() {
            let x = store.value(id).data()[i];
            work.values_mut(id)[i] = x + h;
            let up = eval(&work)?;
            work.values_mut(id)[i] = x - h;
            let down = eval(&work)?;
            work.values_mut(id)[i] = x;
            report.update(store.name(id), i, grads.get(id).data()[i], (up - down) / (2.0 * h));
        }
    }
    Ok(report)
}
