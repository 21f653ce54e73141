//! Open fact extraction as directed-acyclic-graph edge prediction.
//!
//! Facts are written into a token-pair edge matrix ([`codec`]), predicted
//! by a biaffine edge scorer ([`scorer`]), compared against a maximal-clique
//! representation ([`clique`]) and scored with string- and word-level
//! matching metrics ([`metrics`]).

pub mod clique;
pub mod codec;
pub mod corpus;
pub mod error;
pub mod metrics;
pub mod model;
pub mod scorer;

pub use error::{Error, Result};
