//! Clarificational exchange analysis for situated dialogue corpora.
//!
//! The crate covers the whole offline pipeline:
//!
//! - [`corpus`]: the canonical corpus model, its JSON format, a SIMMC 2.0
//!   adapter, validation and descriptive statistics.
//! - [`extract`]: clarificational exchanges (Before-CR / CR / After-CR)
//!   derived from per-turn ambiguity annotations.
//! - [`tagger`]: keyword and regex tagging of each exchange by the
//!   disambiguating property it exploits.
//! - [`metrics`]: per-turn Object F1, pooled and per-turn aggregation,
//!   the relative Before/After delta, and candidate-object statistics.
//! - [`eval`]: prediction files, heuristic resolvers, subset evaluation
//!   and report rendering.
//! - [`synth`]: a deterministic generator of synthetic corpora.

pub mod corpus;
pub mod eval;
pub mod extract;
pub mod metrics;
pub mod synth;
pub mod tagger;

pub use corpus::{Corpus, Dialogue, ObjectId, Scene, SceneObject, Turn};
pub use extract::{ClarificationExchange, ExtractionStats};
pub use tagger::{PropertyTag, TagSet};

/// Key of a single user turn across the corpus.
pub type TurnKey = (String, usize);
