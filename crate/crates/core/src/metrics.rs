//! Crime-distance reward and the path evaluation metrics.
//!
//! Every edge contributes the crimes lying within one edge-length of its
//! midpoint. The local average is the mean distance over all of those
//! (edge, crime) pairs; the reward divides that by the path length.

use serde::{Deserialize, Serialize};

use crate::crime::CrimeIndex;
use crate::error::{Error, Result};
use crate::geo::haversine_miles;
use crate::path::RoutePath;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardConfig {
    /// Reward for paths with no crime inside any edge radius.
    pub kappa: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig { kappa: 1.0 }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if self.kappa.is_finite() && self.kappa > 0.0 {
            Ok(())
        } else {
            Err(Error::Config(format!("kappa must be positive, got {}", self.kappa)))
        }
    }
}

/// Per-edge `(sum of distances, count)` of crimes within the edge radius.
pub fn edge_stats(path: &RoutePath, index: &CrimeIndex) -> Vec<(f64, usize)> {
    path.edges().iter().map(|e| index.edge_crime_stats(e)).collect()
}

fn reward_from_stats(stats: &[(f64, usize)], lengths: &[f64], kappa: f64) -> f64 {
    let (mut sum, mut count, mut length) = (0.0, 0usize, 0.0);
    for (&(s, c), &l) in stats.iter().zip(lengths) {
        sum += s;
        count += c;
        length += l;
    }
    if count == 0 {
        kappa
    } else {
        (sum / count as f64) / length
    }
}

/// Average in-radius crime distance divided by path length, or κ when no
/// edge radius contains a crime.
pub fn r_crime(path: &RoutePath, index: &CrimeIndex, cfg: &RewardConfig) -> Result<f64> {
    if path.is_empty() {
        return Err(Error::EmptyPath);
    }
    let lengths: Vec<f64> = path.edges().iter().map(|e| e.length).collect();
    Ok(reward_from_stats(&edge_stats(path, index), &lengths, cfg.kappa))
}

/// Reward of every remaining sub-path: entry `t` scores edges `t..`.
pub fn suffix_rewards(path: &RoutePath, index: &CrimeIndex, cfg: &RewardConfig) -> Result<Vec<f64>> {
    if path.is_empty() {
        return Err(Error::EmptyPath);
    }
    let stats = edge_stats(path, index);
    let lengths: Vec<f64> = path.edges().iter().map(|e| e.length).collect();
    Ok((0..stats.len()).map(|t| reward_from_stats(&stats[t..], &lengths[t..], cfg.kappa)).collect())
}

/// Mean distance over in-radius (edge, crime) pairs. When no edge radius
/// holds a crime, falls back to the mean over edges of the distance from the
/// midpoint to the nearest crime anywhere.
pub fn local_avg(path: &RoutePath, index: &CrimeIndex) -> Result<f64> {
    if path.is_empty() {
        return Err(Error::EmptyPath);
    }
    let (sum, count) = edge_stats(path, index).iter().fold((0.0, 0usize), |(s, c), &(es, ec)| (s + es, c + ec));
    if count > 0 {
        return Ok(sum / count as f64);
    }
    avg_min_crime(path, index)
}

/// Mean over edges of the nearest-crime distance from each midpoint.
pub fn avg_min_crime(path: &RoutePath, index: &CrimeIndex) -> Result<f64> {
    if path.is_empty() {
        return Err(Error::EmptyPath);
    }
    let mut total = 0.0;
    for e in path.edges() {
        total += index.nearest(e.midpoint).ok_or(Error::NoCrimes)?.1;
    }
    Ok(total / path.edge_count() as f64)
}

/// Σ over edges and all crimes of midpoint-to-crime distance.
pub fn global_sum(path: &RoutePath, index: &CrimeIndex) -> Result<f64> {
    if path.is_empty() {
        return Err(Error::EmptyPath);
    }
    if index.is_empty() {
        return Err(Error::NoCrimes);
    }
    Ok(path
        .edges()
        .iter()
        .map(|e| index.records().iter().map(|c| haversine_miles(e.midpoint, c.location)).sum::<f64>())
        .sum())
}

/// Mean midpoint-to-crime distance over all (edge, crime) pairs.
pub fn global_avg(path: &RoutePath, index: &CrimeIndex) -> Result<f64> {
    Ok(global_sum(path, index)? / (path.edge_count() * index.len()) as f64)
}

pub fn path_length(path: &RoutePath) -> f64 {
    path.edges().iter().map(|e| e.length).sum()
}
