//! File formats, the `gst` command line and the play server on top of
//! `gst-core`.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod error;
pub mod inspect;
pub mod manifest;
pub mod metrics;
pub mod parallel;
pub mod report;
pub mod server;

pub use error::{Error, Result};
