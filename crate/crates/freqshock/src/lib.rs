//! Tooling for studying what finetuned language models actually learn when
//! extracting factual knowledge: frequency shock, range shift, and task
//! learning, reproduced at desk scale with a deterministic simulated LM.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod kg;
pub mod manifest;
pub mod predict;
pub mod recipe;
pub mod remote;
pub mod schedule;
pub mod sim;
pub mod stats;
pub mod world;

pub use error::{Error, Result};
