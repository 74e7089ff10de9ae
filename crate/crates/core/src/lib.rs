//! Attention-based denoising for personality detection from long texts.

pub mod aiem;
pub mod corpus;
pub mod embeddings;
pub mod ensemble;
pub mod error;
pub mod exec;
pub mod psycholex;
pub mod seed;
pub mod synthetic;
pub mod text;
pub mod trainer;

pub use error::{Error, Result};
pub use exec::Execution;
