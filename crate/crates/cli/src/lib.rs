//! Command-line front end for the leadflow toolkit.
//!
//! The binary orchestrates the full pipeline — corpus ingestion, flow
//! networks, topic-model proximities, censored gravity estimation, the
//! structural-break comparison and the count-model robustness pass —
//! behind declarative TOML configs. The library side exposes the pieces so
//! integration tests can drive the same pipeline in-process.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod pipeline;
