//! Koopman operator learning from sparse snapshot data.

pub mod dictionary;
pub mod dynamics;
pub mod enrichment;
pub mod error;
pub mod experiment;
pub mod io;
pub mod linalg;
pub mod predictor;
pub mod solver;
pub mod spectrum;

pub use error::{Error, Result};
