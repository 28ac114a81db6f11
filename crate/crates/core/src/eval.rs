//! Experiment runner: sampled k-hop queries, every router on the same pairs,
//! mean metrics per router and percent improvements of the learned router.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{compute_risk_weights, safepath_pareto, select_median, select_safest, RiskWeights};
use crate::crime::{CrimeIndex, DEFAULT_BANDWIDTH_MILES};
use crate::embed::EmbeddingTable;
use crate::error::{io_err, Error, Result};
use crate::exec::{derive_seed, rng_from, Execution};
use crate::graph::{dijkstra, sample_k_hop_pairs_with, NodeIdx, StreetGraph};
use crate::metrics::{global_avg, local_avg};
use crate::path::RoutePath;
use crate::policy::PolicyNetwork;
use crate::routing::{beam_search, BeamConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Router {
    Dijkstra,
    SafepathMedian,
    SafepathSafest,
    Saferoute,
}

impl Router {
    pub const ALL: [Router; 4] = [Router::Dijkstra, Router::SafepathMedian, Router::SafepathSafest, Router::Saferoute];

    pub fn name(self) -> &'static str {
        match self {
            Router::Dijkstra => "dijkstra",
            Router::SafepathMedian => "safepath_median",
            Router::SafepathSafest => "safepath_safest",
            Router::Saferoute => "saferoute",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub city: String,
    pub hops: Vec<usize>,
    pub pairs: usize,
    pub routers: Vec<Router>,
    /// One run per seed; pairs are re-sampled for every run.
    pub seeds: Vec<u64>,
    pub bandwidth: f64,
    /// Taken from the run-level beam settings when loaded from a config file.
    #[serde(skip)]
    pub beam: BeamConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            city: "city".into(),
            hops: vec![5, 10],
            pairs: 100,
            routers: Router::ALL.to_vec(),
            seeds: vec![0, 1, 2],
            bandwidth: DEFAULT_BANDWIDTH_MILES,
            beam: BeamConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.beam.validate()?;
        let problem = if self.hops.is_empty() || self.hops.contains(&0) {
            Some("hops must be a non-empty list of positive counts")
        } else if self.pairs == 0 {
            Some("pairs must be at least 1")
        } else if self.seeds.is_empty() {
            Some("at least one seed is required")
        } else if self.routers.is_empty() {
            Some("at least one router is required")
        } else if !(self.bandwidth.is_finite() && self.bandwidth > 0.0) {
            Some("bandwidth must be positive")
        } else if self.city.is_empty() || self.city.contains(['/', '\\']) {
            Some("city must be a plain name")
        } else {
            None
        };
        match problem {
            Some(p) => Err(Error::Config(p.into())),
            None => Ok(()),
        }
    }
}

/// Metrics of one router on one query.
#[derive(Clone, Debug, PartialEq)]
pub struct PairOutcome {
    pub router: Router,
    pub local: f64,
    pub global: f64,
    pub length: f64,
    pub fallback: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsRow {
    pub router: String,
    pub local: f64,
    pub global: f64,
    pub length: f64,
    pub failure_rate: f64,
}

/// Per-run and pooled rows for one hop setting.
#[derive(Clone, Debug, PartialEq)]
pub struct HopReport {
    pub hops: usize,
    /// Means over every pair of every run.
    pub rows: Vec<MetricsRow>,
    /// One row set per seed.
    pub runs: Vec<Vec<MetricsRow>>,
    /// Queries per run, aligned with the seeds.
    pub pairs: Vec<Vec<(NodeIdx, NodeIdx)>>,
}

/// Improvement of SafeRoute over one baseline, averaged over runs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Improvement {
    pub baseline: String,
    pub local_pct: f64,
    pub global_pct: f64,
    pub length_pct: f64,
}

/// Signed percentages `(local, global, length)`. Positive local/global means
/// `other` is farther from crime; positive length means `other` is shorter.
pub fn percent_improvement(base: &MetricsRow, other: &MetricsRow) -> Result<(f64, f64, f64)> {
    for (v, col) in [(base.local, "local"), (base.global, "global"), (base.length, "length")] {
        if v <= 0.0 {
            return Err(Error::ZeroBase(col));
        }
    }
    Ok((
        100.0 * (other.local - base.local) / base.local,
        100.0 * (other.global - base.global) / base.global,
        100.0 * (base.length - other.length) / base.length,
    ))
}

struct Artifacts<'a> {
    graph: &'a StreetGraph,
    index: &'a CrimeIndex,
    emb: &'a EmbeddingTable,
    net: &'a PolicyNetwork,
    risk: Option<RiskWeights>,
}

fn outcome(router: Router, path: &RoutePath, index: &CrimeIndex, fallback: bool) -> Result<PairOutcome> {
    Ok(PairOutcome { router, local: local_avg(path, index)?, global: global_avg(path, index)?, length: path.length(), fallback })
}

fn evaluate_pair(a: &Artifacts, cfg: &ExperimentConfig, (s, t): (NodeIdx, NodeIdx), seed: u64) -> Result<Vec<PairOutcome>> {
    let unreachable = || Error::Unreachable(a.graph.node(s).id.clone(), a.graph.node(t).id.clone());
    let pareto = match &a.risk {
        Some(w) => Some(safepath_pareto(a.graph, w, s, t)?),
        None => None,
    };
    let mut out = Vec::with_capacity(cfg.routers.len());
    for &router in &cfg.routers {
        let o = match router {
            Router::Dijkstra => {
                let sp = dijkstra(a.graph, s, t)?.ok_or_else(unreachable)?;
                outcome(router, &sp.path, a.index, false)?
            }
            Router::SafepathMedian => outcome(router, &select_median(pareto.as_ref().unwrap())?.path, a.index, false)?,
            Router::SafepathSafest => outcome(router, &select_safest(pareto.as_ref().unwrap())?.path, a.index, false)?,
            Router::Saferoute => {
                let r = beam_search(a.net, a.graph, a.emb, a.index, s, t, &cfg.beam, &mut rng_from(seed), Execution::Sequential)?;
                PairOutcome { router, local: r.local_avg, global: r.global_avg, length: r.length, fallback: r.fallback }
            }
        };
        out.push(o);
    }
    Ok(out)
}

/// Means over outcomes. Fallback routes are left out of the means unless
/// every query fell back.
pub fn aggregate(router: Router, outcomes: &[&PairOutcome]) -> MetricsRow {
    let failures = outcomes.iter().filter(|o| o.fallback).count();
    let mut used: Vec<&&PairOutcome> = outcomes.iter().filter(|o| !o.fallback).collect();
    if used.is_empty() {
        used = outcomes.iter().collect();
    }
    let n = used.len() as f64;
    let mean = |f: fn(&PairOutcome) -> f64| used.iter().map(|o| f(o)).sum::<f64>() / n;
    MetricsRow {
        router: router.name().into(),
        local: mean(|o| o.local),
        global: mean(|o| o.global),
        length: mean(|o| o.length),
        failure_rate: failures as f64 / outcomes.len() as f64,
    }
}

fn rows_for(routers: &[Router], outcomes: &[Vec<PairOutcome>]) -> Vec<MetricsRow> {
    routers
        .iter()
        .enumerate()
        .map(|(k, &r)| aggregate(r, &outcomes.iter().map(|o| &o[k]).collect::<Vec<_>>()))
        .collect()
}

pub fn run_experiment(
    cfg: &ExperimentConfig,
    graph: &StreetGraph,
    index: &CrimeIndex,
    emb: &EmbeddingTable,
    net: &PolicyNetwork,
    exec: Execution,
) -> Result<Vec<HopReport>> {
    cfg.validate()?;
    if index.is_empty() {
        return Err(Error::NoCrimes);
    }
    let needs_risk = cfg.routers.iter().any(|r| matches!(r, Router::SafepathMedian | Router::SafepathSafest));
    let risk = if needs_risk { Some(compute_risk_weights(graph, index, cfg.bandwidth, exec)?) } else { None };
    let art = Artifacts { graph, index, emb, net, risk };

    let mut reports = Vec::with_capacity(cfg.hops.len());
    for &h in &cfg.hops {
        let mut all = Vec::new();
        let mut runs = Vec::new();
        let mut run_pairs = Vec::new();
        for &seed in &cfg.seeds {
            let pairs = sample_k_hop_pairs_with(graph, h, cfg.pairs, derive_seed(seed, &[h as u64]), exec);
            if pairs.is_empty() {
                return Err(Error::NoPairs(h));
            }
            let outcomes = exec
                .map(pairs.len(), |i| evaluate_pair(&art, cfg, pairs[i], derive_seed(seed, &[h as u64, i as u64])))
                .into_iter()
                .collect::<Result<Vec<_>>>()?;
            runs.push(rows_for(&cfg.routers, &outcomes));
            all.extend(outcomes);
            run_pairs.push(pairs);
        }
        reports.push(HopReport { hops: h, rows: rows_for(&cfg.routers, &all), runs, pairs: run_pairs });
    }
    Ok(reports)
}

/// SafeRoute against every other router, averaged over runs.
pub fn improvements(report: &HopReport) -> Result<Vec<Improvement>> {
    let ours = Router::Saferoute.name();
    let Some(first) = report.runs.first() else { return Ok(Vec::new()) };
    if !first.iter().any(|r| r.router == ours) {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for base in first.iter().filter(|r| r.router != ours) {
        let mut acc = (0.0, 0.0, 0.0);
        for run in &report.runs {
            let b = run.iter().find(|r| r.router == base.router).unwrap();
            let o = run.iter().find(|r| r.router == ours).unwrap();
            let (l, g, n) = percent_improvement(b, o)?;
            acc = (acc.0 + l, acc.1 + g, acc.2 + n);
        }
        let k = report.runs.len() as f64;
        out.push(Improvement { baseline: base.router.clone(), local_pct: acc.0 / k, global_pct: acc.1 / k, length_pct: acc.2 / k });
    }
    Ok(out)
}

pub fn results_csv(report: &HopReport) -> String {
    let mut s = String::from("router,local,global,length,failure_rate\n");
    for r in &report.rows {
        writeln!(s, "{},{},{},{},{}", r.router, r.local, r.global, r.length, r.failure_rate).unwrap();
    }
    s
}

/// Positive local/global: SafeRoute farther from crime. Positive length: SafeRoute shorter.
pub fn improvements_csv(imps: &[Improvement]) -> String {
    let mut s = String::from("baseline,local_pct_safer,global_pct_safer,length_pct_shorter\n");
    for i in imps {
        writeln!(s, "{},{},{},{}", i.baseline, i.local_pct, i.global_pct, i.length_pct).unwrap();
    }
    s
}

/// Aligned text rendering of every hop setting.
pub fn render_table(city: &str, reports: &[HopReport]) -> String {
    let mut s = String::new();
    for rep in reports {
        writeln!(s, "{city}, {}-hop", rep.hops).unwrap();
        writeln!(s, "{:<18}{:>10}{:>10}{:>10}{:>10}", "router", "local", "global", "length", "failed").unwrap();
        for r in &rep.rows {
            writeln!(s, "{:<18}{:>10.4}{:>10.4}{:>10.4}{:>9.1}%", r.router, r.local, r.global, r.length, 100.0 * r.failure_rate)
                .unwrap();
        }
        s.push('\n');
    }
    s
}

/// Writes `results_<city>_<hops>.csv` and `improvement_<city>_<hops>.csv` for every report.
pub fn write_reports(dir: impl AsRef<Path>, city: &str, reports: &[HopReport]) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    for rep in reports {
        let results = dir.join(format!("results_{city}_{}.csv", rep.hops));
        std::fs::write(&results, results_csv(rep)).map_err(io_err(&results))?;
        written.push(results);
        let imp = improvements(rep)?;
        if !imp.is_empty() {
            let p = dir.join(format!("improvement_{city}_{}.csv", rep.hops));
            std::fs::write(&p, improvements_csv(&imp)).map_err(io_err(&p))?;
            written.push(p);
        }
    }
    let table = dir.join(format!("table_{city}.txt"));
    std::fs::write(&table, render_table(city, reports)).map_err(io_err(&table))?;
    written.push(table);
    Ok(written)
}
