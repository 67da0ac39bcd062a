//! Guessing state tracking for GuessWhat?!-style referential dialogue games.
//!
//! A guesser keeps a probability distribution over the candidate objects of a
//! scene and multiplies in a learned belief change after every
//! question/answer round. This crate holds everything that is pure
//! computation: the differentiation engine, the synthetic game world, the
//! model, its losses, the training loops and the evaluation metrics. File
//! formats, the CLI and the play server live in the `gst` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod autodiff;
pub mod certify;
pub mod encoder;
pub mod env;
pub mod error;
pub mod eval;
pub mod losses;
pub mod model;
pub mod tracker;
pub mod train;

pub use error::{Error, Result};
