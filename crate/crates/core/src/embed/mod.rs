//! Node embeddings from biased second-order random walks and skip-gram with
//! negative sampling, and the policy state built from them.

mod skipgram;
mod table;
mod walks;

pub use skipgram::{train_skipgram, SkipGramConfig, SkipGramTrainer};
pub use table::{state_vector, EmbeddingTable};
pub use walks::{generate_walks, generate_walks_with, walks_on_adjacency, WalkConfig};

use crate::error::Result;
use crate::exec::Execution;
use crate::graph::StreetGraph;

/// Walks plus skip-gram over `graph`, one row per node in graph order.
pub fn embed_graph(graph: &StreetGraph, walk: &WalkConfig, sg: &SkipGramConfig, exec: Execution) -> Result<EmbeddingTable> {
    let walks = generate_walks_with(graph, walk, exec)?;
    let model = train_skipgram(&walks, sg)?;
    EmbeddingTable::from_rows(
        graph.nodes().iter().map(|n| n.id.clone()).collect(),
        sg.dim,
        (0..graph.node_count()).map(|i| model.vector(i).to_vec()).collect(),
    )
}
