//! Command-line front end. Each subcommand is a thin wrapper over the library.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::RunConfig;
use crate::crime::{load_crimes, CrimeIndex};
use crate::embed::{embed_graph, EmbeddingTable};
use crate::error::Error;
use crate::eval::{render_table, run_experiment, write_reports};
use crate::exec::{derive_seed, rng_from, set_threads, Execution};
use crate::graph::{load_map, sample_k_hop_pairs_with, StreetGraph};
use crate::policy::{load_weights, save_weights, AdamState, PolicyNetwork};
use crate::routing::{beam_search, route_geojson};
use crate::train::{new_adam, retrain_epoch, save_episode_log, supervised_epoch, teacher_paths};

#[derive(Parser, Debug)]
#[command(name = "saferoute", version, about = "Safety-aware pedestrian routing")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, env = "SAFEROUTE_CONFIG")]
    pub config: Option<PathBuf>,
    /// Overrides the configured run seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Caps the number of worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Runs every data-parallel loop on the calling thread.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Load node and street CSVs and write a graph artifact.
    BuildGraph {
        #[arg(long)]
        nodes: Option<PathBuf>,
        #[arg(long)]
        edges: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train node embeddings for a graph artifact.
    Embed {
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Supervised imitation and/or reward-driven retraining.
    Train(TrainArgs),
    /// Route one query with beam search.
    Route {
        #[command(flatten)]
        inputs: ModelInputs,
        #[arg(long = "from")]
        from: String,
        #[arg(long = "to")]
        to: String,
        /// Write the route as GeoJSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the evaluation protocol and write report files.
    Evaluate {
        #[command(flatten)]
        inputs: ModelInputs,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Export streets (and optionally crimes) as a GeoJSON FeatureCollection.
    ExportGeojson {
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        crimes: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
pub struct ModelInputs {
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub crimes: Option<PathBuf>,
    #[arg(long)]
    pub weights: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Supervised,
    Retrain,
    Both,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Required for retraining.
    #[arg(long)]
    pub crimes: Option<PathBuf>,
    /// Start from these weights instead of a fresh initialization.
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "both")]
    pub phase: Phase,
    /// Continue from the checkpoint in the output directory.
    #[arg(long)]
    pub resume: bool,
}

/// `true` when the error is a caller mistake rather than a failure.
pub fn is_usage_error(err: &anyhow::Error) -> bool {
    matches!(err.downcast_ref::<Error>(), Some(Error::SameEndpoints(_)))
}

fn pick(flag: &Option<PathBuf>, cfg: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    flag.clone().or_else(|| cfg.clone()).with_context(|| format!("missing {what} path (flag or [paths] entry)"))
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        set_threads(n);
    }
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    let ctx = Ctx { cfg, exec };
    match &cli.command {
        Command::BuildGraph { nodes, edges, out } => ctx.build_graph(nodes, edges, out),
        Command::Embed { graph, out } => ctx.embed(graph, out),
        Command::Train(args) => ctx.train(args),
        Command::Route { inputs, from, to, out } => ctx.route(inputs, from, to, out.as_deref()),
        Command::Evaluate { inputs, out_dir } => ctx.evaluate(inputs, out_dir),
        Command::ExportGeojson { graph, crimes, out } => ctx.export_geojson(graph, crimes, out),
    }
}

struct Ctx {
    cfg: RunConfig,
    exec: Execution,
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn load_graph(path: &Path) -> Result<StreetGraph> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading graph artifact {}", path.display()))?;
    StreetGraph::from_artifact(&text).with_context(|| format!("graph artifact {}", path.display()))
}

fn load_embeddings(path: &Path, graph: &StreetGraph) -> Result<EmbeddingTable> {
    let table = EmbeddingTable::load(path).with_context(|| format!("embeddings {}", path.display()))?;
    Ok(table.align_to(graph)?)
}

/// Progress of an interrupted training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Manifest {
    phase: Phase,
    epochs_done: usize,
}

impl Ctx {
    fn crimes(&self, path: &Path) -> Result<CrimeIndex> {
        let idx = load_crimes(path, &self.cfg.crime.categories).with_context(|| format!("crimes {}", path.display()))?;
        Ok(CrimeIndex::with_cell_size(idx.records().to_vec(), self.cfg.crime.cell_degrees)?)
    }

    fn build_graph(&self, nodes: &Option<PathBuf>, edges: &Option<PathBuf>, out: &Option<PathBuf>) -> Result<()> {
        let p = &self.cfg.paths;
        let nodes = pick(nodes, &p.nodes, "nodes")?;
        let edges = pick(edges, &p.edges, "edges")?;
        let out = pick(out, &p.graph, "graph output")?;
        let graph = load_map(&nodes, &edges)?;
        write(&out, graph.to_artifact())?;
        println!("nodes: {}", graph.node_count());
        println!("directed edges: {}", graph.edge_count());
        println!("reassignments: {}", graph.reassignments().len());
        for r in graph.reassignments() {
            println!("  {} -> {}: {} reassigned to {}", graph.node(r.from).id, graph.node(r.to).id, r.natural, r.assigned);
        }
        Ok(())
    }

    fn embed(&self, graph: &Option<PathBuf>, out: &Option<PathBuf>) -> Result<()> {
        let g = load_graph(&pick(graph, &self.cfg.paths.graph, "graph")?)?;
        let out = pick(out, &self.cfg.paths.embeddings, "embeddings output")?;
        let table = embed_graph(&g, &self.cfg.walks, &self.cfg.skipgram, self.exec)?;
        write(&out, table.to_text())?;
        info!("wrote {} embeddings of dimension {}", table.len(), table.dim());
        Ok(())
    }

    fn train(&self, args: &TrainArgs) -> Result<()> {
        let p = &self.cfg.paths;
        let tc = &self.cfg.train;
        let graph = load_graph(&pick(&args.graph, &p.graph, "graph")?)?;
        let emb = load_embeddings(&pick(&args.embeddings, &p.embeddings, "embeddings")?, &graph)?;
        let out_dir = pick(&args.out_dir, &p.out_dir, "output directory")?;
        std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
        let crimes = match args.phase {
            Phase::Supervised => None,
            _ => Some(self.crimes(&pick(&args.crimes, &p.crimes, "crimes")?)?),
        };
        let ckpt = out_dir.join("checkpoint");
        let manifest_path = ckpt.join("manifest.json");
        let log_path = out_dir.join("train_log.csv");

        let phases: Vec<(Phase, usize)> = match args.phase {
            Phase::Supervised => vec![(Phase::Supervised, tc.supervised_epochs)],
            Phase::Retrain => vec![(Phase::Retrain, tc.epochs)],
            Phase::Both => vec![(Phase::Supervised, tc.supervised_epochs), (Phase::Retrain, tc.epochs)],
        };
        let input = 2 * emb.dim();
        let (mut net, mut resume_at) = if args.resume {
            let text = std::fs::read_to_string(&manifest_path)
                .with_context(|| format!("no checkpoint to resume at {}", manifest_path.display()))?;
            let m: Manifest = serde_json::from_str(&text).context("checkpoint manifest")?;
            (load_weights(ckpt.join("weights.txt"), Some(input))?, Some(m))
        } else {
            let net = match &args.init {
                Some(path) => load_weights(path, Some(input))?,
                None => PolicyNetwork::new(input, &self.cfg.policy)?,
            };
            (net, None)
        };

        let pairs = sample_k_hop_pairs_with(&graph, tc.hop_k, tc.pairs, derive_seed(tc.seed, &[0]), self.exec);
        if pairs.is_empty() {
            bail!("graph has no pairs at {} hops", tc.hop_k);
        }
        info!("training on {} pairs at {} hops", pairs.len(), tc.hop_k);
        let teachers = teacher_paths(&graph, &pairs, self.exec)?;

        let mut fresh_log = !args.resume;
        for (phase, epochs) in phases {
            let order = |p: Phase| u8::from(p == Phase::Retrain);
            let (start, mut adam) = match resume_at.take() {
                Some(m) if order(m.phase) > order(phase) => {
                    resume_at = Some(m);
                    continue;
                }
                Some(m) if m.phase == phase => (m.epochs_done, AdamState::load(ckpt.join("adam.txt"))?),
                _ => (0, new_adam(&net, tc)),
            };
            for epoch in start..epochs {
                match phase {
                    Phase::Supervised => supervised_epoch(&mut net, &mut adam, &graph, &emb, &teachers, tc, epoch)?,
                    _ => {
                        let index = crimes.as_ref().expect("crimes are loaded for retraining");
                        let logs = retrain_epoch(&mut net, &mut adam, &graph, &emb, index, &pairs, tc, epoch, self.exec)?;
                        save_episode_log(&logs, &log_path, !fresh_log && log_path.exists())?;
                        fresh_log = false;
                        let ok = logs.iter().filter(|l| l.success).count();
                        info!("retrain epoch {}: {ok}/{} successful episodes", epoch + 1, logs.len());
                    }
                }
                if net.params().iter().any(|v| !v.is_finite()) {
                    bail!(Error::NonFiniteParameter);
                }
                std::fs::create_dir_all(&ckpt).with_context(|| format!("creating {}", ckpt.display()))?;
                save_weights(&net, ckpt.join("weights.txt"))?;
                adam.save(ckpt.join("adam.txt"))?;
                write(&manifest_path, serde_json::to_string(&Manifest { phase, epochs_done: epoch + 1 })?)?;
                info!("{phase:?} epoch {} of {epochs} done", epoch + 1);
            }
        }
        if let Some(m) = resume_at {
            bail!("checkpoint is for phase {:?}, which this run does not include", m.phase);
        }
        save_weights(&net, out_dir.join("weights.txt"))?;
        Ok(())
    }

    fn model(&self, inputs: &ModelInputs) -> Result<(StreetGraph, EmbeddingTable, CrimeIndex, PolicyNetwork)> {
        let p = &self.cfg.paths;
        let graph = load_graph(&pick(&inputs.graph, &p.graph, "graph")?)?;
        let emb = load_embeddings(&pick(&inputs.embeddings, &p.embeddings, "embeddings")?, &graph)?;
        let crimes = self.crimes(&pick(&inputs.crimes, &p.crimes, "crimes")?)?;
        let wpath = pick(&inputs.weights, &p.weights, "weights")?;
        let net = load_weights(&wpath, Some(2 * emb.dim())).with_context(|| format!("weights {}", wpath.display()))?;
        Ok((graph, emb, crimes, net))
    }

    fn route(&self, inputs: &ModelInputs, from: &str, to: &str, out: Option<&Path>) -> Result<()> {
        let (graph, emb, crimes, net) = self.model(inputs)?;
        let (s, t) = (graph.index_of(from)?, graph.index_of(to)?);
        let mut rng = rng_from(derive_seed(self.cfg.train.seed, &[7]));
        let r = beam_search(&net, &graph, &emb, &crimes, s, t, &self.cfg.beam, &mut rng, self.exec)?;
        let ids: Vec<&str> = r.path.nodes().iter().map(|&n| graph.node(n).id.as_str()).collect();
        println!("route: {}", ids.join(" "));
        println!("length_miles: {}", r.length);
        println!("local_avg: {}", r.local_avg);
        println!("global_avg: {}", r.global_avg);
        println!("fallback: {}", r.fallback);
        println!("candidates: {}", r.candidate_count);
        if let Some(out) = out {
            write(out, serde_json::to_string_pretty(&route_geojson(&graph, &r))?)?;
        }
        Ok(())
    }

    fn evaluate(&self, inputs: &ModelInputs, out_dir: &Option<PathBuf>) -> Result<()> {
        let (graph, emb, crimes, net) = self.model(inputs)?;
        let out_dir = pick(out_dir, &self.cfg.paths.out_dir, "output directory")?;
        let ev = &self.cfg.evaluation;
        let reports = run_experiment(ev, &graph, &crimes, &emb, &net, self.exec)?;
        write_reports(&out_dir, &ev.city, &reports)?;
        print!("{}", render_table(&ev.city, &reports));
        Ok(())
    }

    fn export_geojson(&self, graph: &Option<PathBuf>, crimes: &Option<PathBuf>, out: &Path) -> Result<()> {
        let graph = load_graph(&pick(graph, &self.cfg.paths.graph, "graph")?)?;
        let mut features = Vec::new();
        for e in graph.edges().iter().filter(|e| e.from < e.to) {
            let (a, b) = (graph.node(e.from), graph.node(e.to));
            features.push(json!({
                "type": "Feature",
                "geometry": { "type": "LineString", "coordinates": [[a.location.lon, a.location.lat], [b.location.lon, b.location.lat]] },
                "properties": { "kind": "street", "from": a.id, "to": b.id, "length_miles": e.length },
            }));
        }
        if let Some(path) = crimes.clone().or_else(|| self.cfg.paths.crimes.clone()) {
            for c in self.crimes(&path)?.records() {
                features.push(json!({
                    "type": "Feature",
                    "geometry": { "type": "Point", "coordinates": [c.location.lon, c.location.lat] },
                    "properties": { "kind": "crime", "id": c.id, "category": c.category },
                }));
            }
        }
        write(out, serde_json::to_string_pretty(&json!({ "type": "FeatureCollection", "features": features }))?)
    }
}
