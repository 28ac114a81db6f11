use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{derive_seed, rng_from, Execution};
use crate::graph::{NodeIdx, StreetGraph};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WalkConfig {
    /// Return parameter: weight 1/p for stepping back to the previous node.
    pub p: f64,
    /// In-out parameter: weight 1/q for moving two hops away from the previous node.
    pub q: f64,
    /// Nodes per walk, including the start.
    pub walk_length: usize,
    pub walks_per_node: usize,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig { p: 1.0, q: 1.0, walk_length: 40, walks_per_node: 10, seed: 0 }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.p.is_finite() && self.p > 0.0 && self.q.is_finite() && self.q > 0.0 && self.walk_length > 0 && self.walks_per_node > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid walk configuration {self:?}")))
        }
    }
}

pub fn generate_walks(graph: &StreetGraph, cfg: &WalkConfig) -> Result<Vec<Vec<NodeIdx>>> {
    generate_walks_with(graph, cfg, Execution::default())
}

/// `walks_per_node` walks from every node over undirected connectivity.
pub fn generate_walks_with(graph: &StreetGraph, cfg: &WalkConfig, exec: Execution) -> Result<Vec<Vec<NodeIdx>>> {
    walks_on_adjacency(&graph.undirected_neighbors(), cfg, exec)
}

/// Walks over sorted adjacency lists; round `r` of node `v` is output at `r * n + v`.
pub fn walks_on_adjacency(adj: &[Vec<NodeIdx>], cfg: &WalkConfig, exec: Execution) -> Result<Vec<Vec<NodeIdx>>> {
    cfg.validate()?;
    let n = adj.len();
    Ok(exec.map(n * cfg.walks_per_node, |i| {
        let (round, start) = (i / n, i % n);
        let mut rng = rng_from(derive_seed(cfg.seed, &[round as u64, start as u64]));
        biased_walk(adj, start, cfg, &mut rng)
    }))
}

fn biased_walk(adj: &[Vec<NodeIdx>], start: NodeIdx, cfg: &WalkConfig, rng: &mut impl Rng) -> Vec<NodeIdx> {
    let mut walk = Vec::with_capacity(cfg.walk_length);
    walk.push(start);
    let mut weights = Vec::new();
    while walk.len() < cfg.walk_length {
        let cur = *walk.last().unwrap();
        let nbrs = &adj[cur];
        if nbrs.is_empty() {
            break;
        }
        let next = if walk.len() == 1 {
            nbrs[rng.gen_range(0..nbrs.len())]
        } else {
            let prev = walk[walk.len() - 2];
            weights.clear();
            weights.extend(nbrs.iter().map(|&x| {
                if x == prev {
                    1.0 / cfg.p
                } else if adj[prev].binary_search(&x).is_ok() {
                    1.0
                } else {
                    1.0 / cfg.q
                }
            }));
            let total: f64 = weights.iter().sum();
            let mut u = rng.gen::<f64>() * total;
            let mut pick = nbrs.len() - 1;
            for (k, w) in weights.iter().enumerate() {
                if u < *w {
                    pick = k;
                    break;
                }
                u -= w;
            }
            nbrs[pick]
        };
        walk.push(next);
    }
    walk
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isolated_node_walks_have_length_one() {
        let adj = vec![vec![]];
        let walks = walks_on_adjacency(&adj, &WalkConfig { walks_per_node: 3, ..Default::default() }, Execution::Sequential).unwrap();
        assert_eq!(walks, vec![vec![0], vec![0], vec![0]]);
    }

    #[test]
    fn triangle_transitions_are_uniform() {
        // Every neighbour of the current node is at distance ≤ 1 from the previous
        // node, so with p = q = 1 each step is uniform over two neighbours.
        let adj = vec![vec![1, 2], vec![0, 2], vec![0, 1]];
        let cfg = WalkConfig { walk_length: 10_001, walks_per_node: 1, seed: 5, ..Default::default() };
        let walks = walks_on_adjacency(&adj, &cfg, Execution::Sequential).unwrap();
        let walk = &walks[0];
        let mut counts = [[0usize; 3]; 3];
        for w in walk.windows(2) {
            counts[w[0]][w[1]] += 1;
        }
        for (from, row) in counts.iter().enumerate() {
            let n: usize = row.iter().sum();
            for (to, &c) in row.iter().enumerate() {
                if to == from {
                    assert_eq!(c, 0);
                    continue;
                }
                let sigma = (n as f64 * 0.25).sqrt();
                assert!((c as f64 - n as f64 / 2.0).abs() < 3.0 * sigma, "{from}->{to}: {c} of {n}");
            }
        }
    }

    #[test]
    fn large_q_stops_outward_moves() {
        let n = 50;
        let adj: Vec<Vec<usize>> = (0..n)
            .map(|i| {
                let mut v = Vec::new();
                if i > 0 {
                    v.push(i - 1);
                }
                if i + 1 < n {
                    v.push(i + 1);
                }
                v
            })
            .collect();
        let cfg = WalkConfig { q: 1e6, walk_length: 10_001, walks_per_node: 1, seed: 1, ..Default::default() };
        let walk = &walks_on_adjacency(&adj, &cfg, Execution::Sequential).unwrap()[n / 2];
        let outward = walk.windows(3).filter(|w| w[0] != w[2]).count();
        assert!((outward as f64) < 0.01 * 10_000.0, "{outward}");
    }

    #[test]
    fn connected_walks_have_exact_length_and_follow_edges() {
        let city = crate::synthetic::grid_city(4, 4, 0.001);
        let cfg = WalkConfig { walk_length: 12, walks_per_node: 2, seed: 3, p: 0.5, q: 2.0 };
        let walks = generate_walks(&city.graph, &cfg).unwrap();
        assert_eq!(walks.len(), 32);
        for w in &walks {
            assert_eq!(w.len(), 12);
            for pair in w.windows(2) {
                assert!(city.graph.edge_between(pair[0], pair[1]).is_some());
            }
        }
        assert_eq!(walks, generate_walks_with(&city.graph, &cfg, Execution::Sequential).unwrap());
    }

    #[test]
    fn rejects_bad_config() {
        let adj = vec![vec![]];
        assert!(walks_on_adjacency(&adj, &WalkConfig { p: 0.0, ..Default::default() }, Execution::Sequential).is_err());
        assert!(walks_on_adjacency(&adj, &WalkConfig { walk_length: 0, ..Default::default() }, Execution::Sequential).is_err());
    }
}
