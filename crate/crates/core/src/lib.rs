//! Imageability measurement for words and connected text.
//!
//! The pipeline runs in stages that each read and write plain files:
//! lexicon ingestion, prompt preparation, deformance, image generation
//! through a pluggable backend, scoring, and report emission.

pub mod analysis;
pub mod corpus;
pub mod deformance;
pub mod fsio;
pub mod genbridge;
pub mod lexicon;
pub mod metrics;
pub mod pipeline;
pub mod rng;
