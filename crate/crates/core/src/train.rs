//! Two-phase training: imitation of length-shortest paths, then
//! reward-weighted policy gradient with a per-epoch running baseline.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use log::warn;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::crime::CrimeIndex;
use crate::embed::{state_vector, EmbeddingTable};
use crate::error::{io_err, Error, Result};
use crate::exec::{derive_seed, rng_from, Execution};
use crate::geo::CompassAction;
use crate::graph::{dijkstra, NodeIdx, StreetGraph};
use crate::metrics::{r_crime, suffix_rewards, RewardConfig};
use crate::path::RoutePath;
use crate::policy::{adam_step, mask_and_renormalize, sample_action, ActionMask, AdamConfig, AdamState, Gradient, PolicyNetwork};

const SUPERVISED_STREAM: u64 = 1;
const RETRAIN_STREAM: u64 = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub episodes_per_epoch: usize,
    /// Epochs of reward-driven retraining.
    pub epochs: usize,
    /// Epochs of supervised imitation.
    pub supervised_epochs: usize,
    /// Rollouts per retraining episode (T).
    pub rollouts: usize,
    pub max_len: usize,
    pub hop_k: usize,
    /// Number of training pairs sampled at `hop_k` hops.
    pub pairs: usize,
    pub reward: RewardConfig,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            episodes_per_epoch: 2000,
            epochs: 60,
            supervised_epochs: 30,
            rollouts: 5,
            max_len: 40,
            hop_k: 5,
            pairs: 2000,
            reward: RewardConfig::default(),
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.reward.validate()?;
        self.adam.validate()?;
        let problem = if self.rollouts == 0 {
            Some("rollouts must be at least 1")
        } else if self.episodes_per_epoch == 0 {
            Some("episodes_per_epoch must be at least 1")
        } else if self.hop_k == 0 {
            Some("hop_k must be at least 1")
        } else if self.max_len < self.hop_k {
            Some("max_len must be at least hop_k")
        } else {
            None
        };
        match problem {
            Some(p) => Err(Error::Config(p.into())),
            None => Ok(()),
        }
    }
}

/// One decision of a rollout, kept for the gradient.
#[derive(Clone, Debug)]
pub struct Step {
    pub state: Vec<f64>,
    pub action: CompassAction,
    pub mask: ActionMask,
}

#[derive(Clone, Debug)]
pub struct Rollout {
    pub path: RoutePath,
    pub steps: Vec<Step>,
    pub success: bool,
}

/// Tracks (node, action) pairs already taken within one trajectory.
#[derive(Default, Clone, Debug)]
pub struct RepeatMask(HashSet<(NodeIdx, usize)>);

impl RepeatMask {
    /// Available actions at `node` minus those already taken there.
    pub fn mask(&self, graph: &StreetGraph, node: NodeIdx) -> ActionMask {
        let mut m = graph.available_actions(node);
        for (k, allowed) in m.iter_mut().enumerate() {
            *allowed &= !self.0.contains(&(node, k));
        }
        m
    }

    pub fn take(&mut self, node: NodeIdx, action: CompassAction) {
        self.0.insert((node, action.index()));
    }
}

/// Samples a trajectory from `start` until `target` is reached, `max_len`
/// steps pass, or no untaken action is left.
pub fn rollout<R: Rng + ?Sized>(
    net: &PolicyNetwork,
    graph: &StreetGraph,
    emb: &EmbeddingTable,
    start: NodeIdx,
    target: NodeIdx,
    max_len: usize,
    rng: &mut R,
) -> Result<Rollout> {
    let mut path = RoutePath::single(start);
    let mut steps = Vec::new();
    let mut taken = RepeatMask::default();
    while path.end() != target && steps.len() < max_len {
        let cur = path.end();
        let mask = taken.mask(graph, cur);
        if !mask.iter().any(|&m| m) {
            break;
        }
        let state = state_vector(emb, cur, target)?;
        let q = mask_and_renormalize(&net.forward(&state)?, &mask)?;
        let action = sample_action(&q, rng);
        taken.take(cur, action);
        path.push(*graph.edge_for(cur, action).expect("masked actions have edges"));
        steps.push(Step { state, action, mask });
    }
    let success = path.end() == target;
    Ok(Rollout { path, steps, success })
}

/// Length-shortest paths for the pairs; unreachable pairs are dropped with a warning.
pub fn teacher_paths(graph: &StreetGraph, pairs: &[(NodeIdx, NodeIdx)], exec: Execution) -> Result<Vec<RoutePath>> {
    let found = exec.map(pairs.len(), |i| dijkstra(graph, pairs[i].0, pairs[i].1));
    let mut out = Vec::with_capacity(pairs.len());
    for (res, &(s, t)) in found.into_iter().zip(pairs) {
        match res? {
            Some(sp) if !sp.path.is_empty() => out.push(sp.path),
            Some(_) => {}
            None => warn!("skipping unreachable pair {} -> {}", graph.node(s).id, graph.node(t).id),
        }
    }
    Ok(out)
}

/// Episode order for one epoch: repeated independent shuffles of `0..n`.
fn episode_order(n: usize, episodes: usize, seed: u64, stream: u64, epoch: usize) -> Vec<usize> {
    let mut order = Vec::with_capacity(episodes);
    let mut pass = 0u64;
    while order.len() < episodes {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng_from(derive_seed(seed, &[stream, epoch as u64, pass])));
        order.extend(idx.into_iter().take(episodes - order.len()));
        pass += 1;
    }
    order
}

/// Steps of the teacher path with the masks a rollout would have seen.
fn teacher_steps(graph: &StreetGraph, emb: &EmbeddingTable, path: &RoutePath) -> Result<Vec<Step>> {
    let target = path.end();
    let mut taken = RepeatMask::default();
    path.edges()
        .iter()
        .map(|e| {
            let mask = taken.mask(graph, e.from);
            taken.take(e.from, e.action);
            Ok(Step { state: state_vector(emb, e.from, target)?, action: e.action, mask })
        })
        .collect()
}

/// One supervised epoch: every episode takes one Adam step on Σ_t ∇log π(a_t|s_t)
/// along a teacher path.
pub fn supervised_epoch(
    net: &mut PolicyNetwork,
    adam: &mut AdamState,
    graph: &StreetGraph,
    emb: &EmbeddingTable,
    teachers: &[RoutePath],
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<()> {
    if teachers.is_empty() {
        return Ok(());
    }
    for i in episode_order(teachers.len(), cfg.episodes_per_epoch, cfg.seed, SUPERVISED_STREAM, epoch) {
        let mut grad = Gradient::zeros_like(net);
        for step in teacher_steps(graph, emb, &teachers[i])? {
            net.accumulate_grad(&step.state, step.action, &step.mask, 1.0, &mut grad)?;
        }
        adam_step(net, adam, &grad, 1.0)?;
    }
    Ok(())
}

/// Runs `cfg.supervised_epochs` imitation epochs over the pairs' shortest paths.
pub fn supervised_train(
    net: &mut PolicyNetwork,
    adam: &mut AdamState,
    graph: &StreetGraph,
    emb: &EmbeddingTable,
    pairs: &[(NodeIdx, NodeIdx)],
    cfg: &TrainConfig,
    exec: Execution,
) -> Result<()> {
    cfg.validate()?;
    let teachers = teacher_paths(graph, pairs, exec)?;
    for epoch in 0..cfg.supervised_epochs {
        supervised_epoch(net, adam, graph, emb, &teachers, cfg, epoch)?;
    }
    Ok(())
}

/// Training telemetry for one retraining episode.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeLog {
    pub episode: usize,
    pub success: bool,
    pub max_reward: f64,
    /// Baseline used for the update; `None` when no update happened.
    pub baseline: Option<f64>,
    pub best_path: Vec<NodeIdx>,
    pub path_len: f64,
}

/// Writes `episode,success,max_reward,baseline,path_len`; blank baseline means no update.
pub fn write_episode_log(logs: &[EpisodeLog], out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "episode,success,max_reward,baseline,path_len")?;
    for l in logs {
        let b = l.baseline.map(|b| b.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{},{},{}", l.episode, u8::from(l.success), l.max_reward, b, l.path_len)?;
    }
    Ok(())
}

pub fn save_episode_log(logs: &[EpisodeLog], path: impl AsRef<Path>, append: bool) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::OpenOptions::new()
        .create(true)
        .write(true)
        .append(append)
        .truncate(!append)
        .open(path)
        .map_err(io_err(path))?;
    let mut w = std::io::BufWriter::new(file);
    if append {
        let mut buf = Vec::new();
        write_episode_log(logs, &mut buf).map_err(io_err(path))?;
        let body = buf.splitn(2, |&b| b == b'\n').nth(1).unwrap_or_default();
        w.write_all(body).map_err(io_err(path))?;
    } else {
        write_episode_log(logs, &mut w).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// One reward-driven epoch. The running baseline state starts fresh.
#[allow(clippy::too_many_arguments)]
pub fn retrain_epoch(
    net: &mut PolicyNetwork,
    adam: &mut AdamState,
    graph: &StreetGraph,
    emb: &EmbeddingTable,
    index: &CrimeIndex,
    pairs: &[(NodeIdx, NodeIdx)],
    cfg: &TrainConfig,
    epoch: usize,
    exec: Execution,
) -> Result<Vec<EpisodeLog>> {
    let mut logs = Vec::with_capacity(cfg.episodes_per_epoch);
    if pairs.is_empty() {
        return Ok(logs);
    }
    let mut avg_rwd = 0.0;
    let mut num_success = 0usize;
    let order = episode_order(pairs.len(), cfg.episodes_per_epoch, cfg.seed, RETRAIN_STREAM, epoch);
    for (episode, &i) in order.iter().enumerate() {
        let (start, target) = pairs[i];
        let snapshot: &PolicyNetwork = net;
        let rollouts = exec.map(cfg.rollouts, |r| {
            let seed = derive_seed(cfg.seed, &[RETRAIN_STREAM, epoch as u64, episode as u64, r as u64]);
            rollout(snapshot, graph, emb, start, target, cfg.max_len, &mut rng_from(seed))
        });
        let mut max_rwd = 0.0;
        let mut best: Option<Rollout> = None;
        for ro in rollouts {
            let ro = ro?;
            if !ro.success || ro.path.is_empty() {
                continue;
            }
            let rwd = r_crime(&ro.path, index, &cfg.reward)?;
            if rwd > max_rwd {
                max_rwd = rwd;
                best = Some(ro);
            }
        }
        let global = epoch * cfg.episodes_per_epoch + episode;
        let mut log = EpisodeLog {
            episode: global,
            success: best.is_some(),
            max_reward: max_rwd,
            baseline: None,
            best_path: Vec::new(),
            path_len: 0.0,
        };
        if let Some(best) = best.filter(|_| max_rwd != 0.0) {
            let b = avg_rwd / num_success.max(1) as f64;
            let returns = suffix_rewards(&best.path, index, &cfg.reward)?;
            let mut grad = Gradient::zeros_like(net);
            for (step, r) in best.steps.iter().zip(&returns) {
                net.accumulate_grad(&step.state, step.action, &step.mask, r - b, &mut grad)?;
            }
            adam_step(net, adam, &grad, 1.0)?;
            num_success += 1;
            avg_rwd += max_rwd;
            log.baseline = Some(b);
            log.path_len = best.path.length();
            log.best_path = best.path.nodes().to_vec();
        }
        logs.push(log);
    }
    Ok(logs)
}

/// Runs `cfg.epochs` retraining epochs and returns the concatenated episode logs.
#[allow(clippy::too_many_arguments)]
pub fn retrain_with_rewards(
    net: &mut PolicyNetwork,
    adam: &mut AdamState,
    graph: &StreetGraph,
    emb: &EmbeddingTable,
    index: &CrimeIndex,
    pairs: &[(NodeIdx, NodeIdx)],
    cfg: &TrainConfig,
    exec: Execution,
) -> Result<Vec<EpisodeLog>> {
    cfg.validate()?;
    let mut logs = Vec::new();
    for epoch in 0..cfg.epochs {
        logs.extend(retrain_epoch(net, adam, graph, emb, index, pairs, cfg, epoch, exec)?);
    }
    Ok(logs)
}

/// Fresh optimizer state for a network.
pub fn new_adam(net: &PolicyNetwork, cfg: &TrainConfig) -> AdamState {
    AdamState::for_net(net, cfg.adam)
}
