use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;

use super::Array;
use crate::error::{Error, Result};

/// Handle to a parameter inside a [`ParameterStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named trainable arrays. Names are unique and shapes never change after
/// registration; only the optimizer writes values, between steps.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterStore {
    seed: u64,
    names: Vec<String>,
    values: Vec<Array>,
}

impl ParameterStore {
    pub fn new(seed: u64) -> Self {
        ParameterStore { seed, names: Vec::new(), values: Vec::new() }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn add(&mut self, name: &str, value: Array) -> Result<ParamId> {
        if self.id(name).is_some() {
            return Err(Error::Config(format!("duplicate parameter name `{name}`")));
        }
        if let Some(i) = value.first_non_finite() {
            return Err(Error::Config(format!("parameter `{name}` has a non-finite value at {i}")));
        }
        self.names.push(name.to_string());
        self.values.push(value);
        Ok(ParamId(self.values.len() - 1))
    }

    /// Glorot-uniform init in `(-a, a)`, `a = sqrt(6 / (rows + cols))`.
    pub fn add_xavier<R: Rng>(&mut self, name: &str, rows: usize, cols: usize, rng: &mut R) -> Result<ParamId> {
        let a = libm::sqrt(6.0 / (rows + cols) as f64);
        let data = (0..rows * cols).map(|_| rng.gen_range(-a..a)).collect();
        self.add(name, Array::new(rows, cols, data)?)
    }

    pub fn add_zeros(&mut self, name: &str, rows: usize, cols: usize) -> Result<ParamId> {
        self.add(name, Array::zeros(rows, cols))
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    /// Looks up `name` and checks its shape.
    pub fn expect(&self, name: &str, rows: usize, cols: usize) -> Result<ParamId> {
        let id = self
            .id(name)
            .ok_or_else(|| Error::Config(format!("missing parameter `{name}`")))?;
        let shape = self.values[id.0].shape();
        if shape != (rows, cols) {
            return Err(Error::Config(format!(
                "parameter `{name}` has shape {}x{}, expected {rows}x{cols}",
                shape.0, shape.1
            )));
        }
        Ok(id)
    }

    pub fn value(&self, id: ParamId) -> &Array {
        &self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(Array::len).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Array)> {
        self.names
            .iter()
            .zip(&self.values)
            .enumerate()
            .map(|(i, (n, v))| (ParamId(i), n.as_str(), v))
    }

    /// Mutable access to the raw values of one parameter; the shape stays fixed.
    pub fn values_mut(&mut self, id: ParamId) -> &mut [f64] {
        self.values[id.0].data_mut()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    /// Fresh zeroed gradient buffers matching this store.
    pub fn zero_grads(&self) -> Gradients {
        Gradients {
            grads: self.values.iter().map(|v| Array::zeros(v.rows(), v.cols())).collect(),
        }
    }
}

/// Gradient buffers aligned with a [`ParameterStore`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    grads: Vec<Array>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> &Array {
        &self.grads[id.0]
    }

    pub(crate) fn get_mut(&mut self, id: ParamId) -> &mut Array {
        &mut self.grads[id.0]
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn zero(&mut self) {
        for g in &mut self.grads {
            g.data_mut().fill(0.0);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in &mut self.grads {
            g.data_mut().iter_mut().for_each(|x| *x *= factor);
        }
    }

    pub fn accumulate(&mut self, other: &Gradients) {
        for (a, b) in self.grads.iter_mut().zip(&other.grads) {
            a.add_assign(b);
        }
    }

    pub fn l2_norm(&self) -> f64 {
        libm::sqrt(self.grads.iter().flat_map(|g| g.data()).map(|x| x * x).sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.grads.iter().flat_map(|g| g.data()).fold(0.0, |m, x| m.max(x.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn names_are_unique() {
        let mut store = ParameterStore::new(1);
        store.add_zeros("w", 2, 2).unwrap();
        assert!(matches!(store.add_zeros("w", 1, 1), Err(Error::Config(_))));
    }

    #[test]
    fn xavier_bounds_and_determinism() {
        let mut a = ParameterStore::new(3);
        let mut b = ParameterStore::new(3);
        let ia = a.add_xavier("w", 4, 8, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        b.add_xavier("w", 4, 8, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
        let bound = libm::sqrt(6.0 / 12.0);
        assert!(a.value(ia).data().iter().all(|x| x.abs() < bound));
    }

    #[test]
    fn expect_checks_shape() {
        let mut store = ParameterStore::new(0);
        store.add_zeros("b", 1, 4).unwrap();
        assert!(store.expect("b", 1, 4).is_ok());
        assert!(store.expect("b", 4, 1).is_err());
        assert!(store.expect("missing", 1, 1).is_err());
    }
}
