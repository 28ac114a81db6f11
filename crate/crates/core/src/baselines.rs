//! Reference routers: length-shortest Dijkstra and a SafePath-style router
//! that trades length against KDE crime risk along the lower convex hull.

use std::io::Write;
use std::path::Path;

use log::warn;

use crate::crime::CrimeIndex;
use crate::error::{io_err, Error, Result};
use crate::exec::Execution;
use crate::graph::{dijkstra_by, LexCost, NodeIdx, StreetGraph};
use crate::path::RoutePath;

const MAX_HULL_DEPTH: usize = 32;
const HULL_REL_TOL: f64 = 1e-12;

/// Per-edge risk, indexed by edge id: KDE density at the midpoint times length.
#[derive(Clone, Debug, PartialEq)]
pub struct RiskWeights(Vec<f64>);

impl RiskWeights {
    pub fn new(risk: Vec<f64>) -> Result<Self> {
        if risk.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::Config("risk weights must be finite and non-negative".into()));
        }
        Ok(RiskWeights(risk))
    }

    pub fn get(&self, edge: usize) -> f64 {
        self.0[edge]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn path_risk(&self, path: &RoutePath) -> f64 {
        path.edges().iter().map(|e| self.0[e.id]).sum()
    }
}

pub fn compute_risk_weights(graph: &StreetGraph, index: &CrimeIndex, bandwidth: f64, exec: Execution) -> Result<RiskWeights> {
    if index.is_empty() {
        return Err(Error::NoCrimesForDensity);
    }
    let risk = exec.map(graph.edge_count(), |i| {
        let e = graph.edge(i);
        index.kde_density(bandwidth, e.midpoint).map(|d| d * e.length)
    });
    RiskWeights::new(risk.into_iter().collect::<Result<_>>()?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParetoPath {
    pub path: RoutePath,
    pub length: f64,
    pub risk: f64,
}

/// Lower-hull paths sorted by increasing length (and so non-increasing risk).
#[derive(Clone, Debug, PartialEq)]
pub struct ParetoPathSet(Vec<ParetoPath>);

impl ParetoPathSet {
    pub fn paths(&self) -> &[ParetoPath] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "length,risk")?;
        for p in &self.0 {
            writeln!(out, "{},{}", p.length, p.risk)?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        self.write_csv(&mut buf).map_err(io_err(path))?;
        std::fs::write(path, buf).map_err(io_err(path))
    }
}

fn scored(path: RoutePath, weights: &RiskWeights) -> ParetoPath {
    let risk = weights.path_risk(&path);
    ParetoPath { length: path.length(), risk, path }
}

/// Recursive hull construction between a shorter path `a` and a safer path `b`.
fn refine(
    graph: &StreetGraph,
    weights: &RiskWeights,
    src: NodeIdx,
    dst: NodeIdx,
    a: &ParetoPath,
    b: &ParetoPath,
    depth: usize,
    out: &mut Vec<ParetoPath>,
) -> Result<()> {
    if depth >= MAX_HULL_DEPTH {
        warn!("hull refinement stopped at depth {MAX_HULL_DEPTH}");
        return Ok(());
    }
    let lambda = (a.risk - b.risk) / (b.length - a.length);
    if !(lambda.is_finite() && lambda > 0.0) {
        return Ok(());
    }
    let Some(sp) = dijkstra_by(graph, src, dst, |e| weights.get(e.id) + lambda * e.length)? else {
        return Ok(());
    };
    let c = scored(sp.path, weights);
    let on_segment = a.risk + lambda * a.length;
    let below = c.risk + lambda * c.length < on_segment * (1.0 - HULL_REL_TOL);
    let distinct = c.path.nodes() != a.path.nodes() && c.path.nodes() != b.path.nodes();
    if !(below && distinct && a.length < c.length && c.length < b.length) {
        return Ok(());
    }
    refine(graph, weights, src, dst, a, &c, depth + 1, out)?;
    out.push(c.clone());
    refine(graph, weights, src, dst, &c, b, depth + 1, out)
}

/// Non-dominated paths on the lower convex hull of (length, risk).
pub fn safepath_pareto(graph: &StreetGraph, weights: &RiskWeights, src: NodeIdx, dst: NodeIdx) -> Result<ParetoPathSet> {
    let unreachable = || Error::Unreachable(graph.node(src).id.clone(), graph.node(dst).id.clone());
    let short = dijkstra_by(graph, src, dst, |e| LexCost(e.length, weights.get(e.id)))?.ok_or_else(unreachable)?;
    let safe = dijkstra_by(graph, src, dst, |e| LexCost(weights.get(e.id), e.length))?.ok_or_else(unreachable)?;
    let short = scored(short.path, weights);
    let safe = scored(safe.path, weights);
    if safe.risk >= short.risk || safe.length <= short.length || safe.path.nodes() == short.path.nodes() {
        return Ok(ParetoPathSet(vec![short]));
    }
    let mut out = vec![short.clone()];
    refine(graph, weights, src, dst, &short, &safe, 0, &mut out)?;
    out.push(safe);
    Ok(ParetoPathSet(out))
}

/// Minimum risk, ties to the shorter path.
pub fn select_safest(set: &ParetoPathSet) -> Result<&ParetoPath> {
    set.0
        .iter()
        .min_by(|a, b| a.risk.total_cmp(&b.risk).then(a.length.total_cmp(&b.length)))
        .ok_or(Error::EmptyPathSet)
}

/// Lower median by length: index ⌊(k−1)/2⌋.
pub fn select_median(set: &ParetoPathSet) -> Result<&ParetoPath> {
    if set.0.is_empty() {
        return Err(Error::EmptyPathSet);
    }
    Ok(&set.0[(set.0.len() - 1) / 2])
}
