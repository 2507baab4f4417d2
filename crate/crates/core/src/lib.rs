//! Construction and evaluation of a hierarchical knowledge base of
//! procedures.
//!
//! Steps of how-to articles are linked to the article goals they paraphrase
//! using a two-stage pipeline: exact cosine retrieval of candidate goals
//! ([`retrieval`]) followed by a trained reranker with an explicit
//! unlinkable option ([`rerank`]). Linked steps are expanded recursively into
//! procedure trees ([`hierarchy`]). The result is evaluated intrinsically by
//! recall@N on held-out links ([`linkeval`]) and extrinsically by
//! hierarchy-expanded BM25 video retrieval ([`videoretrieval`]).

pub mod corpus;
pub mod embedding;
pub mod error;
pub mod exec;
pub mod hierarchy;
pub mod linkeval;
pub mod rerank;
pub mod retrieval;
pub mod synth;
pub mod text;
pub mod textsearch;
pub mod videoretrieval;

pub use error::{Error, Result};
pub use exec::Execution;
