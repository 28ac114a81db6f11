//! Inference: stochastic beam search over the trained policy, loop removal
//! and route export.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::crime::CrimeIndex;
use crate::embed::{state_vector, EmbeddingTable};
use crate::error::{Error, Result};
use crate::exec::{rng_from, Execution};
use crate::graph::{dijkstra, NodeIdx, StreetGraph};
use crate::metrics::{global_avg, local_avg};
use crate::path::RoutePath;
use crate::policy::{argmax, mask_and_renormalize, sample_action, PolicyNetwork};
use crate::train::RepeatMask;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeamConfig {
    /// Beam size Z: live entries, samples per entry and successes collected.
    pub beam_width: usize,
    pub max_len: usize,
}

impl Default for BeamConfig {
    fn default() -> Self {
        BeamConfig { beam_width: 5, max_len: 40 }
    }
}

impl BeamConfig {
    pub fn validate(&self) -> Result<()> {
        if self.beam_width == 0 {
            return Err(Error::Config("beam_width must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct BeamEntry {
    pub path: RoutePath,
    /// Sum of log masked probabilities of the actions taken.
    pub log_prob: f64,
    taken: RepeatMask,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RouteResult {
    pub path: RoutePath,
    pub local_avg: f64,
    pub global_avg: f64,
    pub length: f64,
    pub success: bool,
    /// The route came from Dijkstra because the beam found no path.
    pub fallback: bool,
    /// Distinct successful paths found by the beam.
    pub candidate_count: usize,
}

impl RouteResult {
    pub fn from_path(path: RoutePath, index: &CrimeIndex, fallback: bool, candidate_count: usize) -> Result<Self> {
        Ok(RouteResult {
            local_avg: local_avg(&path, index)?,
            global_avg: global_avg(&path, index)?,
            length: path.length(),
            success: !fallback,
            fallback,
            candidate_count,
            path,
        })
    }
}

/// Splices out cycles left to right: when a node reappears, everything after
/// its first occurrence is dropped.
pub fn remove_loops(path: &RoutePath) -> RoutePath {
    let mut nodes = vec![path.start()];
    let mut edges = Vec::with_capacity(path.edge_count());
    let mut pos: HashMap<NodeIdx, usize> = HashMap::from([(path.start(), 0)]);
    for e in path.edges() {
        if let Some(&j) = pos.get(&e.to) {
            for n in nodes.drain(j + 1..) {
                pos.remove(&n);
            }
            edges.truncate(j);
        } else {
            pos.insert(e.to, nodes.len());
            nodes.push(e.to);
            edges.push(*e);
        }
    }
    RoutePath::from_edges(path.start(), edges).expect("spliced edges still chain")
}

fn check_query(graph: &StreetGraph, start: NodeIdx, target: NodeIdx) -> Result<()> {
    for n in [start, target] {
        if n >= graph.node_count() {
            return Err(Error::UnknownNode(format!("#{n}")));
        }
    }
    if start == target {
        return Err(Error::SameEndpoints(graph.node(start).id.clone()));
    }
    Ok(())
}

/// Children of one entry: `width` sampled actions, deduplicated in draw order.
fn expand(
    net: &PolicyNetwork,
    graph: &StreetGraph,
    emb: &EmbeddingTable,
    entry: &BeamEntry,
    target: NodeIdx,
    width: usize,
    seed: u64,
) -> Result<Vec<BeamEntry>> {
    let cur = entry.path.end();
    let mask = entry.taken.mask(graph, cur);
    if !mask.iter().any(|&m| m) {
        return Ok(Vec::new());
    }
    let q = mask_and_renormalize(&net.forward(&state_vector(emb, cur, target)?)?, &mask)?;
    let mut rng = rng_from(seed);
    let mut drawn = Vec::with_capacity(width);
    for _ in 0..width {
        let a = sample_action(&q, &mut rng);
        if !drawn.contains(&a) {
            drawn.push(a);
        }
    }
    Ok(drawn
        .into_iter()
        .map(|a| {
            let mut child = entry.clone();
            child.taken.take(cur, a);
            child.path.push(*graph.edge_for(cur, a).expect("masked actions have edges"));
            child.log_prob += q[a.index()].ln();
            child
        })
        .collect())
}

/// Adds `entry` unless an identical node sequence is present; keeps the higher log-probability.
fn merge_into(list: &mut Vec<BeamEntry>, entry: BeamEntry) {
    match list.iter_mut().find(|e| e.path.nodes() == entry.path.nodes()) {
        Some(existing) if entry.log_prob > existing.log_prob => *existing = entry,
        Some(_) => {}
        None => list.push(entry),
    }
}

fn by_log_prob_desc(a: &BeamEntry, b: &BeamEntry) -> std::cmp::Ordering {
    b.log_prob.total_cmp(&a.log_prob)
}

/// Raw successful beam paths (loops not yet removed), highest log-probability first.
#[allow(clippy::too_many_arguments)]
pub fn beam_candidates<R: Rng + ?Sized>(
    net: &PolicyNetwork,
    graph: &StreetGraph,
    emb: &EmbeddingTable,
    start: NodeIdx,
    target: NodeIdx,
    cfg: &BeamConfig,
    rng: &mut R,
    exec: Execution,
) -> Result<Vec<BeamEntry>> {
    cfg.validate()?;
    check_query(graph, start, target)?;
    let z = cfg.beam_width;
    let mut live = vec![BeamEntry { path: RoutePath::single(start), log_prob: 0.0, taken: RepeatMask::default() }];
    let mut successes: Vec<BeamEntry> = Vec::new();
    for _ in 0..cfg.max_len {
        if live.is_empty() || successes.len() >= z {
            break;
        }
        let seeds: Vec<u64> = live.iter().map(|_| rng.gen()).collect();
        let children = exec.map(live.len(), |i| expand(net, graph, emb, &live[i], target, z, seeds[i]));
        let mut next = Vec::new();
        let mut done = Vec::new();
        for c in children {
            for child in c? {
                if child.path.end() == target {
                    merge_into(&mut done, child);
                } else {
                    merge_into(&mut next, child);
                }
            }
        }
        for d in done {
            merge_into(&mut successes, d);
        }
        successes.sort_by(by_log_prob_desc);
        successes.truncate(z);
        next.sort_by(by_log_prob_desc);
        next.truncate(z - successes.len());
        live = next;
    }
    Ok(successes)
}

/// Beam search, then the loop-free success farthest from crime on average.
/// With no success the length-shortest path is returned, flagged as fallback.
#[allow(clippy::too_many_arguments)]
pub fn beam_search<R: Rng + ?Sized>(
    net: &PolicyNetwork,
    graph: &StreetGraph,
    emb: &EmbeddingTable,
    index: &CrimeIndex,
    start: NodeIdx,
    target: NodeIdx,
    cfg: &BeamConfig,
    rng: &mut R,
    exec: Execution,
) -> Result<RouteResult> {
    if index.is_empty() {
        return Err(Error::NoCrimes);
    }
    let successes = beam_candidates(net, graph, emb, start, target, cfg, rng, exec)?;
    let count = successes.len();
    let mut best: Option<(RoutePath, f64, f64)> = None;
    for s in successes {
        let path = remove_loops(&s.path);
        let score = local_avg(&path, index)?;
        let better = match &best {
            None => true,
            Some((_, bs, bl)) => score > *bs || (score == *bs && s.log_prob > *bl),
        };
        if better {
            best = Some((path, score, s.log_prob));
        }
    }
    match best {
        Some((path, _, _)) => RouteResult::from_path(path, index, false, count),
        None => {
            let sp = dijkstra(graph, start, target)?
                .ok_or_else(|| Error::Unreachable(graph.node(start).id.clone(), graph.node(target).id.clone()))?;
            RouteResult::from_path(sp.path, index, true, 0)
        }
    }
}

/// Highest-probability action at every step, with repeat masking.
pub fn greedy_decode(
    net: &PolicyNetwork,
    graph: &StreetGraph,
    emb: &EmbeddingTable,
    start: NodeIdx,
    target: NodeIdx,
    max_len: usize,
) -> Result<(RoutePath, bool)> {
    let mut path = RoutePath::single(start);
    let mut taken = RepeatMask::default();
    while path.end() != target && path.edge_count() < max_len {
        let cur = path.end();
        let mask = taken.mask(graph, cur);
        if !mask.iter().any(|&m| m) {
            break;
        }
        let q = mask_and_renormalize(&net.forward(&state_vector(emb, cur, target)?)?, &mask)?;
        let a = argmax(&q);
        taken.take(cur, a);
        path.push(*graph.edge_for(cur, a).expect("masked actions have edges"));
    }
    let ok = path.end() == target;
    Ok((path, ok))
}

/// GeoJSON Feature with a LineString geometry (`[lon, lat]` pairs).
pub fn route_geojson(graph: &StreetGraph, route: &RouteResult) -> serde_json::Value {
    let coords: Vec<[f64; 2]> = route
        .path
        .nodes()
        .iter()
        .map(|&n| {
            let p = graph.node(n).location;
            [p.lon, p.lat]
        })
        .collect();
    let ids: Vec<&str> = route.path.nodes().iter().map(|&n| graph.node(n).id.as_str()).collect();
    json!({
        "type": "Feature",
        "geometry": { "type": "LineString", "coordinates": coords },
        "properties": {
            "nodes": ids,
            "length_miles": route.length,
            "local_avg": route.local_avg,
            "global_avg": route.global_avg,
            "fallback": route.fallback,
        }
    })
}
