use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::ops::Add;

use rand::seq::SliceRandom;

use super::{NodeIdx, StreetEdge, StreetGraph};
use crate::error::{Error, Result};
use crate::exec::{rng_from, Execution};
use crate::path::RoutePath;

/// Additive, totally ordered path cost.
pub trait PathCost: Copy + PartialOrd + Add<Output = Self> {
    fn zero() -> Self;
    /// Finite and non-negative.
    fn is_valid(&self) -> bool;
}

impl PathCost for f64 {
    fn zero() -> Self {
        0.0
    }

    fn is_valid(&self) -> bool {
        self.is_finite() && *self >= 0.0
    }
}

/// Two costs compared lexicographically (primary, then secondary).
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct LexCost(pub f64, pub f64);

impl Add for LexCost {
    type Output = LexCost;

    fn add(self, o: LexCost) -> LexCost {
        LexCost(self.0 + o.0, self.1 + o.1)
    }
}

impl PathCost for LexCost {
    fn zero() -> Self {
        LexCost(0.0, 0.0)
    }

    fn is_valid(&self) -> bool {
        self.0.is_valid() && self.1.is_valid()
    }
}

#[derive(Clone, Debug)]
pub struct ShortestPath<C> {
    pub path: RoutePath,
    pub cost: C,
}

struct Entry<C> {
    cost: C,
    node: NodeIdx,
}

impl<C: PartialOrd> PartialEq for Entry<C> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<C: PartialOrd> Eq for Entry<C> {}

impl<C: PartialOrd> PartialOrd for Entry<C> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<C: PartialOrd> Ord for Entry<C> {
    // Reversed for a min-heap.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .partial_cmp(&self.cost)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.node.cmp(&self.node))
    }
}

/// Length-weighted shortest path.
pub fn dijkstra(graph: &StreetGraph, src: NodeIdx, dst: NodeIdx) -> Result<Option<ShortestPath<f64>>> {
    dijkstra_by(graph, src, dst, |e| e.length)
}

/// Minimum-cost path from `src` to `dst` under `weight`.
///
/// Among equal-cost paths the one with the lexicographically smallest node
/// sequence wins. Costs accumulate along the path from `src`, so the returned
/// cost equals the in-order sum of the path's edge weights.
pub fn dijkstra_by<C, W>(graph: &StreetGraph, src: NodeIdx, dst: NodeIdx, weight: W) -> Result<Option<ShortestPath<C>>>
where
    C: PathCost,
    W: Fn(&StreetEdge) -> C,
{
    let n = graph.node_count();
    for id in [src, dst] {
        if id >= n {
            return Err(Error::UnknownNode(format!("#{id}")));
        }
    }
    let mut dist: Vec<Option<C>> = vec![None; n];
    let mut pred: Vec<Option<usize>> = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[src] = Some(C::zero());
    heap.push(Entry { cost: C::zero(), node: src });

    while let Some(Entry { cost, node: u }) = heap.pop() {
        if done[u] || dist[u].is_none_or(|d| d < cost) {
            continue;
        }
        done[u] = true;
        if u == dst {
            break;
        }
        for e in graph.out_edges(u) {
            let w = weight(e);
            if !w.is_valid() {
                return Err(Error::Config(format!("invalid weight on edge {}", e.id)));
            }
            let v = e.to;
            if done[v] {
                continue;
            }
            let cand = cost + w;
            let better = match dist[v] {
                None => true,
                Some(d) if cand < d => true,
                Some(d) if cand == d => {
                    let current = pred[v].map(|p| graph.edge(p).from).expect("reached node has a predecessor");
                    node_sequence(graph, &pred, u, Some(v)) < node_sequence(graph, &pred, current, Some(v))
                }
                _ => false,
            };
            if better {
                let improved = dist[v].is_none_or(|d| cand < d);
                dist[v] = Some(cand);
                pred[v] = Some(e.id);
                if improved {
                    heap.push(Entry { cost: cand, node: v });
                }
            }
        }
    }

    let Some(cost) = dist[dst].filter(|_| done[dst]) else {
        return Ok(None);
    };
    let mut edges = Vec::new();
    let mut cur = dst;
    while let Some(e) = pred[cur] {
        let edge = *graph.edge(e);
        edges.push(edge);
        cur = edge.from;
    }
    edges.reverse();
    let path = RoutePath::from_edges(src, edges).expect("predecessor chain is connected");
    Ok(Some(ShortestPath { path, cost }))
}

fn node_sequence(graph: &StreetGraph, pred: &[Option<usize>], end: NodeIdx, tail: Option<NodeIdx>) -> Vec<NodeIdx> {
    let mut seq: Vec<NodeIdx> = tail.into_iter().collect();
    let mut cur = end;
    seq.push(cur);
    while let Some(e) = pred[cur] {
        cur = graph.edge(e).from;
        seq.push(cur);
    }
    seq.reverse();
    seq
}

/// Directed hop counts from `src` (`None` = unreachable).
pub fn hop_distances(graph: &StreetGraph, src: NodeIdx) -> Vec<Option<usize>> {
    let mut dist = vec![None; graph.node_count()];
    let mut queue = VecDeque::new();
    dist[src] = Some(0);
    queue.push_back(src);
    while let Some(u) = queue.pop_front() {
        let d = dist[u].unwrap();
        for e in graph.out_edges(u) {
            if dist[e.to].is_none() {
                dist[e.to] = Some(d + 1);
                queue.push_back(e.to);
            }
        }
    }
    dist
}

/// Every `(src, dst)` pair at hop distance exactly `k`, ordered by `(src, dst)`.
pub fn k_hop_pairs(graph: &StreetGraph, k: usize, exec: Execution) -> Vec<(NodeIdx, NodeIdx)> {
    exec.map(graph.node_count(), |src| {
        hop_distances(graph, src)
            .into_iter()
            .enumerate()
            .filter(|(_, d)| *d == Some(k))
            .map(|(dst, _)| (src, dst))
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect()
}

/// Samples up to `count` distinct pairs at hop distance exactly `k`.
pub fn sample_k_hop_pairs(graph: &StreetGraph, k: usize, count: usize, seed: u64) -> Vec<(NodeIdx, NodeIdx)> {
    sample_k_hop_pairs_with(graph, k, count, seed, Execution::default())
}

pub fn sample_k_hop_pairs_with(
    graph: &StreetGraph,
    k: usize,
    count: usize,
    seed: u64,
    exec: Execution,
) -> Vec<(NodeIdx, NodeIdx)> {
    if k == 0 || graph.node_count() == 0 {
        return Vec::new();
    }
    let mut all = k_hop_pairs(graph, k, exec);
    let mut rng = rng_from(seed);
    let (picked, _) = all.partial_shuffle(&mut rng, count);
    picked.to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::GeoPoint;
    use crate::graph::Street;
    use crate::synthetic;

    fn path_graph() -> StreetGraph {
        let nodes = ["a", "b", "c"].iter().enumerate().map(|(i, id)| (id.to_string(), GeoPoint::new(0.0, i as f64 * 0.001).unwrap())).collect();
        StreetGraph::build(nodes, &[Street::new("a", "b", None), Street::new("b", "c", None)]).unwrap()
    }

    #[test]
    fn trivial_paths() {
        let g = path_graph();
        let sp = dijkstra(&g, 1, 1).unwrap().unwrap();
        assert_eq!(sp.path.nodes(), &[1]);
        assert_eq!(sp.cost, 0.0);
        let sp = dijkstra(&g, 0, 1).unwrap().unwrap();
        assert_eq!(sp.path.nodes(), &[0, 1]);
        assert!(dijkstra(&g, 0, 7).is_err());
    }

    #[test]
    fn unreachable() {
        let nodes = vec![("a".into(), GeoPoint::new(0.0, 0.0).unwrap()), ("b".into(), GeoPoint::new(0.0, 0.001).unwrap())];
        let g = StreetGraph::build(nodes, &[]).unwrap();
        assert!(dijkstra(&g, 0, 1).unwrap().is_none());
    }

    #[test]
    fn tie_break_is_lexicographic() {
        // Uniform grid: many equal-length shortest paths. Brute force the
        // lexicographically smallest among all shortest simple paths.
        let city = synthetic::grid_city(4, 4, 0.001);
        let g = &city.graph;
        let unit = |_: &StreetEdge| 1.0;
        for (s, t) in [(0, 15), (3, 12), (5, 10), (15, 0)] {
            let sp = dijkstra_by(g, s, t, unit).unwrap().unwrap();
            let mut best: Option<(f64, Vec<usize>)> = None;
            let mut stack = vec![vec![s]];
            while let Some(p) = stack.pop() {
                let last = *p.last().unwrap();
                if last == t {
                    let c = (p.len() - 1) as f64;
                    if best.as_ref().map_or(true, |(bc, bp)| c < *bc || (c == *bc && p < *bp)) {
                        best = Some((c, p));
                    }
                    continue;
                }
                for e in g.out_edges(last) {
                    if !p.contains(&e.to) {
                        let mut q = p.clone();
                        q.push(e.to);
                        stack.push(q);
                    }
                }
            }
            let (c, p) = best.unwrap();
            assert_eq!(sp.cost, c);
            assert_eq!(sp.path.nodes(), p.as_slice());
        }
    }

    #[test]
    fn unit_weight_matches_bfs() {
        let city = synthetic::grid_city(5, 5, 0.001);
        let g = &city.graph;
        for s in 0..g.node_count() {
            let hops = hop_distances(g, s);
            for t in 0..g.node_count() {
                let sp = dijkstra_by(g, s, t, |_| 1.0).unwrap().unwrap();
                assert_eq!(Some(sp.path.edge_count()), hops[t]);
            }
        }
    }

    #[test]
    fn length_sum_matches_cost() {
        let city = synthetic::grid_city(6, 6, 0.0013);
        let g = &city.graph;
        let sp = dijkstra(g, 0, 35).unwrap().unwrap();
        let sum: f64 = sp.path.edges().iter().map(|e| e.length).sum();
        assert!((sum - sp.cost).abs() < 1e-9);
        assert_eq!(sp.path.length(), sp.cost);
    }

    #[test]
    fn k_hop_sampling() {
        let g = path_graph();
        let pairs = sample_k_hop_pairs(&g, 2, 10, 1);
        let mut sorted = pairs.clone();
        sorted.sort();
        assert_eq!(sorted, vec![(0, 2), (2, 0)]);
        assert!(sample_k_hop_pairs(&g, 3, 10, 1).is_empty());
    }

    #[test]
    fn k_hop_sampling_on_grid_is_exact_and_reproducible() {
        let city = synthetic::grid_city(8, 8, 0.001);
        let g = &city.graph;
        let pairs = sample_k_hop_pairs(g, 5, 20, 42);
        assert_eq!(pairs.len(), 20);
        for &(s, t) in &pairs {
            // Independent BFS by layers over out-edges.
            let mut frontier = vec![s];
            let mut seen = vec![false; g.node_count()];
            seen[s] = true;
            let mut depth = 0;
            while !frontier.contains(&t) {
                let mut next = Vec::new();
                for &u in &frontier {
                    for e in g.out_edges(u) {
                        if !seen[e.to] {
                            seen[e.to] = true;
                            next.push(e.to);
                        }
                    }
                }
                frontier = next;
                depth += 1;
            }
            assert_eq!(depth, 5);
        }
        assert_eq!(pairs, sample_k_hop_pairs(g, 5, 20, 42));
        assert_eq!(pairs, sample_k_hop_pairs_with(g, 5, 20, 42, Execution::Sequential));
        let mut dedup = pairs.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), 20);
    }
}
