//! Graph embedding models and the privacy attacks that measure what they leak.
//!
//! The crate trains node classifiers (GCN, GraphSAGE) and random-walk
//! embeddings (DeepWalk, Node2Vec) on attributed graphs, then runs
//! membership-inference, graph-reconstruction, link-inference and
//! attribute-inference attacks against the released predictions and
//! embeddings.
//!
//! Everything is deterministic given a seed; see [`rng`] for how component
//! seeds are derived.

pub mod attack;
pub mod embedding;
pub mod error;
pub mod gnn;
pub mod graph;
pub mod metrics;
pub mod rng;
pub mod tensor;
pub mod walk;

pub use embedding::EmbeddingMatrix;
pub use error::{Error, Result};
pub use graph::{Graph, Masks, Subgraph};
pub use tensor::Matrix;

/// Version string recorded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
