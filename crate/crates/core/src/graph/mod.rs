//! Directed intersection graph with compass-labelled edges.

mod load;
mod search;

pub use load::{load_map, read_nodes, read_streets};
pub use search::{
    dijkstra, dijkstra_by, hop_distances, k_hop_pairs, sample_k_hop_pairs, sample_k_hop_pairs_with, LexCost,
    PathCost, ShortestPath,
};

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{angular_distance, bearing_degrees, compass_sector, haversine_miles, midpoint, CompassAction, GeoPoint};

/// Position of a node in [`StreetGraph::nodes`]; nodes are stored sorted by id,
/// so index order equals id order.
pub type NodeIdx = usize;
/// Position of an edge in [`StreetGraph::edges`].
pub type EdgeIdx = usize;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub location: GeoPoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreetEdge {
    pub id: EdgeIdx,
    pub from: NodeIdx,
    pub to: NodeIdx,
    /// Miles, always > 0.
    pub length: f64,
    pub action: CompassAction,
    pub bearing: f64,
    pub midpoint: GeoPoint,
}

/// An input street: undirected, expanded into two directed edges.
#[derive(Clone, Debug, PartialEq)]
pub struct Street {
    pub from: String,
    pub to: String,
    /// Explicit length in miles; `None` uses the haversine distance.
    pub length: Option<f64>,
}

impl Street {
    pub fn new(from: impl Into<String>, to: impl Into<String>, length: Option<f64>) -> Self {
        Street { from: from.into(), to: to.into(), length }
    }
}

/// An edge whose action differs from the sector of its bearing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reassignment {
    pub from: NodeIdx,
    pub to: NodeIdx,
    pub natural: CompassAction,
    pub assigned: CompassAction,
}

impl Reassignment {
    /// Signed sector offset in [-4, 4).
    pub fn offset(&self) -> i32 {
        let d = (self.assigned.index() as i32 - self.natural.index() as i32).rem_euclid(8);
        if d >= 4 { d - 8 } else { d }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreetGraph {
    nodes: Vec<Node>,
    edges: Vec<StreetEdge>,
    reassignments: Vec<Reassignment>,
    #[serde(skip)]
    id_index: HashMap<String, NodeIdx>,
    /// Out-edge ids per node, ordered by action index.
    #[serde(skip)]
    out_edges: Vec<Vec<EdgeIdx>>,
    #[serde(skip)]
    action_table: Vec<[Option<EdgeIdx>; 8]>,
}

impl StreetGraph {
    /// Validates nodes and streets and assigns compass actions.
    pub fn build(nodes: Vec<(String, GeoPoint)>, streets: &[Street]) -> Result<Self> {
        let mut nodes: Vec<Node> = nodes
            .into_iter()
            .map(|(id, p)| GeoPoint::new(p.lat, p.lon).map(|location| Node { id, location }))
            .collect::<Result<_>>()?;
        nodes.sort_by(|a, b| a.id.cmp(&b.id));
        for w in nodes.windows(2) {
            if w[0].id == w[1].id {
                return Err(Error::DuplicateNode(w[0].id.clone()));
            }
        }
        let id_index: HashMap<String, NodeIdx> = nodes.iter().enumerate().map(|(i, n)| (n.id.clone(), i)).collect();
        let lookup = |id: &str| id_index.get(id).copied().ok_or_else(|| Error::UnknownNode(id.to_string()));

        struct Half {
            to: NodeIdx,
            length: f64,
            bearing: f64,
            midpoint: GeoPoint,
        }
        let mut halves: Vec<Vec<Half>> = (0..nodes.len()).map(|_| Vec::new()).collect();
        let mut seen = HashSet::new();
        for s in streets {
            let (a, b) = (lookup(&s.from)?, lookup(&s.to)?);
            if a == b {
                return Err(Error::SelfLoop(s.from.clone()));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(Error::DuplicateStreet(s.from.clone(), s.to.clone()));
            }
            let (pa, pb) = (nodes[a].location, nodes[b].location);
            let length = s.length.unwrap_or_else(|| haversine_miles(pa, pb));
            if !(length.is_finite() && length > 0.0) {
                return Err(Error::InvalidLength { from: s.from.clone(), to: s.to.clone(), length });
            }
            // One midpoint per street so both directions share it exactly.
            let mid = midpoint(pa, pb);
            halves[a].push(Half { to: b, length, bearing: bearing_degrees(pa, pb)?, midpoint: mid });
            halves[b].push(Half { to: a, length, bearing: bearing_degrees(pb, pa)?, midpoint: mid });
        }

        let mut edges = Vec::new();
        let mut reassignments = Vec::new();
        for (from, out) in halves.into_iter().enumerate() {
            let bearings: Vec<(NodeIdx, f64)> = out.iter().map(|h| (h.to, h.bearing)).collect();
            let actions = assign_actions(&bearings).map_err(|k| Error::ActionCollision {
                node: nodes[from].id.clone(),
                to: nodes[bearings[k].0].id.clone(),
                bearing: bearings[k].1,
            })?;
            let mut local: Vec<(CompassAction, Half)> = actions.into_iter().zip(out).collect();
            local.sort_by_key(|(a, _)| *a);
            for (action, h) in local {
                let natural = compass_sector(h.bearing);
                if natural != action {
                    log::debug!(
                        "{} -> {}: bearing {:.2} reassigned {} -> {}",
                        nodes[from].id,
                        nodes[h.to].id,
                        h.bearing,
                        natural,
                        action
                    );
                    reassignments.push(Reassignment { from, to: h.to, natural, assigned: action });
                }
                edges.push(StreetEdge {
                    id: edges.len(),
                    from,
                    to: h.to,
                    length: h.length,
                    action,
                    bearing: h.bearing,
                    midpoint: h.midpoint,
                });
            }
        }

        let mut graph = StreetGraph {
            nodes,
            edges,
            reassignments,
            id_index,
            out_edges: Vec::new(),
            action_table: Vec::new(),
        };
        graph.index_edges()?;
        Ok(graph)
    }

    fn index_edges(&mut self) -> Result<()> {
        let n = self.nodes.len();
        self.out_edges = vec![Vec::new(); n];
        self.action_table = vec![[None; 8]; n];
        for (i, e) in self.edges.iter().enumerate() {
            if e.id != i || e.from >= n || e.to >= n {
                return Err(Error::Format(format!("edge {i} is inconsistent")));
            }
            let slot = &mut self.action_table[e.from][e.action.index()];
            if slot.is_some() {
                return Err(Error::ActionCollision {
                    node: self.nodes[e.from].id.clone(),
                    to: self.nodes[e.to].id.clone(),
                    bearing: e.bearing,
                });
            }
            *slot = Some(i);
        }
        for (node, table) in self.action_table.iter().enumerate() {
            self.out_edges[node] = table.iter().flatten().copied().collect();
        }
        Ok(())
    }

    /// Rebuilds lookup tables after deserialization and re-checks invariants.
    pub fn from_artifact(json: &str) -> Result<Self> {
        let mut g: StreetGraph = serde_json::from_str(json)?;
        for w in g.nodes.windows(2) {
            if w[0].id >= w[1].id {
                return Err(Error::Format(format!("nodes not strictly sorted at `{}`", w[1].id)));
            }
        }
        for n in &g.nodes {
            GeoPoint::new(n.location.lat, n.location.lon)?;
        }
        g.id_index = g.nodes.iter().enumerate().map(|(i, n)| (n.id.clone(), i)).collect();
        g.index_edges()?;
        Ok(g)
    }

    pub fn to_artifact(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serializes")
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, idx: NodeIdx) -> &Node {
        &self.nodes[idx]
    }

    pub fn edges(&self) -> &[StreetEdge] {
        &self.edges
    }

    pub fn edge(&self, idx: EdgeIdx) -> &StreetEdge {
        &self.edges[idx]
    }

    pub fn reassignments(&self) -> &[Reassignment] {
        &self.reassignments
    }

    pub fn index_of(&self, id: &str) -> Result<NodeIdx> {
        self.id_index.get(id).copied().ok_or_else(|| Error::UnknownNode(id.to_string()))
    }

    pub fn out_edges(&self, node: NodeIdx) -> impl Iterator<Item = &StreetEdge> + '_ {
        self.out_edges[node].iter().map(move |&e| &self.edges[e])
    }

    pub fn out_degree(&self, node: NodeIdx) -> usize {
        self.out_edges[node].len()
    }

    /// The edge taken by `action` at `node`, if any.
    pub fn edge_for(&self, node: NodeIdx, action: CompassAction) -> Option<&StreetEdge> {
        self.action_table[node][action.index()].map(|e| &self.edges[e])
    }

    pub fn action_table(&self, node: NodeIdx) -> [Option<EdgeIdx>; 8] {
        self.action_table[node]
    }

    /// Available actions at `node` as a boolean mask indexed by action.
    pub fn available_actions(&self, node: NodeIdx) -> [bool; 8] {
        self.action_table[node].map(|e| e.is_some())
    }

    pub fn edge_between(&self, from: NodeIdx, to: NodeIdx) -> Option<&StreetEdge> {
        self.out_edges(from).find(|e| e.to == to)
    }

    /// Sorted, deduplicated neighbours ignoring edge direction.
    pub fn undirected_neighbors(&self) -> Vec<Vec<NodeIdx>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            adj[e.from].push(e.to);
            adj[e.to].push(e.from);
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }
}

/// Assigns one distinct compass action per out-edge given `(to, bearing)` pairs.
///
/// Each sector goes to the edge whose bearing is closest to its center; the
/// others take the nearest free sector within two steps, clockwise on ties.
/// On failure returns the position of the edge that could not be placed.
pub(crate) fn assign_actions(out: &[(NodeIdx, f64)]) -> Result<Vec<CompassAction>, usize> {
    let mut assigned: Vec<Option<CompassAction>> = vec![None; out.len()];
    let mut owner: [Option<usize>; 8] = [None; 8];
    let key = |i: usize| {
        let natural = compass_sector(out[i].1);
        (angular_distance(out[i].1, natural.center_degrees()), out[i].0)
    };
    let mut order: Vec<usize> = (0..out.len()).collect();
    order.sort_by(|&a, &b| key(a).partial_cmp(&key(b)).unwrap());

    let mut losers = Vec::new();
    for &i in &order {
        let s = compass_sector(out[i].1).index();
        if owner[s].is_none() {
            owner[s] = Some(i);
            assigned[i] = Some(CompassAction::ALL[s]);
        } else {
            losers.push(i);
        }
    }
    for i in losers {
        let natural = compass_sector(out[i].1);
        let best = [1, -1, 2, -2]
            .into_iter()
            .map(|k| natural.rotate(k))
            .filter(|a| owner[a.index()].is_none())
            .map(|a| (angular_distance(out[i].1, a.center_degrees()), a))
            // Stable min keeps the clockwise candidate on exact ties.
            .fold(None::<(f64, CompassAction)>, |acc, c| match acc {
                Some(b) if b.0 <= c.0 => Some(b),
                _ => Some(c),
            });
        let (_, a) = best.ok_or(i)?;
        owner[a.index()] = Some(i);
        assigned[i] = Some(a);
    }
    Ok(assigned.into_iter().map(|a| a.expect("every edge assigned")).collect())
}
