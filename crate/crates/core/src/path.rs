use serde::{Deserialize, Serialize};

use crate::graph::{NodeIdx, StreetEdge, StreetGraph};

/// An ordered walk through the street graph with its cached length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoutePath {
    nodes: Vec<NodeIdx>,
    edges: Vec<StreetEdge>,
    length: f64,
}

impl RoutePath {
    /// A zero-length path sitting on `node`.
    pub fn single(node: NodeIdx) -> Self {
        RoutePath { nodes: vec![node], edges: Vec::new(), length: 0.0 }
    }

    /// Builds a path from `start` following `edges`; `None` if they do not chain.
    pub fn from_edges(start: NodeIdx, edges: impl IntoIterator<Item = StreetEdge>) -> Option<Self> {
        let mut path = RoutePath::single(start);
        for e in edges {
            if e.from != path.end() {
                return None;
            }
            path.push(e);
        }
        Some(path)
    }

    /// Builds the path through `nodes` using the graph's edges.
    pub fn from_nodes(graph: &StreetGraph, nodes: &[NodeIdx]) -> Option<Self> {
        let (&first, rest) = nodes.split_first()?;
        let mut path = RoutePath::single(first);
        for &n in rest {
            let e = graph.edge_between(path.end(), n)?;
            path.push(*e);
        }
        Some(path)
    }

    /// Appends an edge leaving the current end node.
    ///
    /// Panics if the edge does not start at [`RoutePath::end`].
    pub fn push(&mut self, edge: StreetEdge) {
        assert_eq!(edge.from, self.end(), "edge does not continue the path");
        self.length += edge.length;
        self.nodes.push(edge.to);
        self.edges.push(edge);
    }

    pub fn nodes(&self) -> &[NodeIdx] {
        &self.nodes
    }

    pub fn edges(&self) -> &[StreetEdge] {
        &self.edges
    }

    /// Sum of edge lengths in miles, accumulated in path order.
    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn start(&self) -> NodeIdx {
        self.nodes[0]
    }

    pub fn end(&self) -> NodeIdx {
        *self.nodes.last().expect("path always has a node")
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// `true` when no node appears twice.
    pub fn is_simple(&self) -> bool {
        let mut seen = std::collections::HashSet::with_capacity(self.nodes.len());
        self.nodes.iter().all(|n| seen.insert(*n))
    }

    /// The remainder of the path starting at node position `t`.
    pub fn suffix(&self, t: usize) -> RoutePath {
        RoutePath::from_edges(self.nodes[t], self.edges[t..].iter().copied()).expect("suffix of a valid path chains")
    }
}
