//! Minor-embedding toolkit and benchmark harness for quantum-annealing
//! workflows.
//!
//! The crate covers the classical side of an annealing pipeline: hardware-like
//! target graphs ([`graph`]), random Ising instances and reference solvers
//! ([`ising`]), embedding validation and quality metrics ([`embedding`]), a
//! greedy rip-up-and-reroute embedder ([`greedy`]), a deterministic Chimera
//! clique embedder ([`clique`]), embedded-model construction and majority-vote
//! unembedding ([`parameterize`]), and desk-scale experiment drivers
//! ([`bench`]).

pub mod bench;
pub mod clique;
pub mod embedding;
pub mod error;
pub mod graph;
pub mod greedy;
pub mod ising;
pub mod parameterize;
pub mod seed;
pub mod stats;

pub use embedding::{Embedding, EmbeddingMetrics, ValidationReport};
pub use error::{Error, Result};
pub use graph::{ChimeraSpec, Graph, GraphStats, NodeId};
pub use greedy::{EmbedOutcome, Embedder, GreedyEmbedder, GreedyParams};
pub use ising::{IsingModel, SampleSet, SpinAssignment};
