//! Static triage of unpacked Android applications: feature extraction,
//! mutual-information ranking, naive Bayes classification and
//! cross-validated evaluation.

pub mod catalog;
pub mod classifier;
pub mod corpus;
pub mod corpusgen;
pub mod detectors;
pub mod error;
pub mod eval;
pub mod matrix;
pub mod ranking;
pub mod rng;

pub use error::{Error, Result};
