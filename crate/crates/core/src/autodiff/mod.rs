//! Reverse-mode differentiation over dense 2-D arrays.
//!
//! Only the operations the guesser models need are provided. Every forward
//! op checks its output for NaN/Inf and fails with the op's name.

mod array;
pub mod gradcheck;
mod graph;
mod lstm;
mod params;

pub use array::Array;
pub use graph::{softmax_slice, Axis, Graph, Normalized, Var};
pub use lstm::{lstm_step, LstmCell, LstmState};
pub use params::{Gradients, ParamId, ParameterStore};
