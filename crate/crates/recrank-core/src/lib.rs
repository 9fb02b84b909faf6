//! Core library for the recrank pipeline: dataset preparation, user
//! sampling, initial recommenders, prompt construction, LLM completion,
//! output parsing, hybrid reranking, and evaluation.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod gateway;
pub mod ids;
pub mod parse;
pub mod pipeline;
pub mod prompt;
pub mod ranker;
pub mod ranklist;
pub mod recommender;
pub mod sampling;
pub mod stats;

pub use error::{Error, Result};
pub use ids::{ItemId, UserId};
