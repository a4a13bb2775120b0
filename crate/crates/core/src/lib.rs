//! Library for synthesizing role-and-rules system prompts and conditioned
//! responses from instruction-tuning corpora, exporting SFT-ready triplet
//! datasets, constructing role-and-rules benchmarks, and scoring model
//! outputs with an LLM judge (rule-level / prompt-level pass rates, pairwise
//! winning score, and annotator agreement statistics).
//!
//! The pipeline is deterministic end to end: every random choice flows from
//! an explicit seed through [`seeded::DetRng`], every prompt template is a
//! versioned asset in [`assets`], and backend completions are cached by
//! content digest. Running twice with the same inputs, seed, and cache
//! produces byte-identical artifacts.

pub mod arena;
pub mod assets;
pub mod benchgen;
pub mod corpus;
pub mod digest;
pub mod error;
pub mod gateway;
pub mod ioutil;
pub mod judge;
pub mod promptgen;
pub mod rules;
pub mod seeded;
pub mod triplet;

pub use error::{Error, Result};
