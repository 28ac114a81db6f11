//! Command-line behaviour, driving the built binary.

use std::path::Path;
use std::process::{Command, Output};

use saferoute::crime::load_crimes;
use saferoute::graph::{dijkstra, StreetGraph};
use saferoute::metrics::{global_avg, local_avg};
use saferoute::policy::{load_weights, PolicyConfig, PolicyNetwork};

const NODES: &str = "id,lat,lon\na,42.3500,-71.0600\nb,42.3500,-71.0570\nc,42.3530,-71.0570\nd,42.3530,-71.0600\n";
const EDGES: &str = "from,to,length_miles\na,b,\nb,c,\nc,d,\nd,a,\n";
const CRIMES: &str = "id,lat,lon,category,timestamp\n\
    k1,42.3501,-71.0585,assault,\n\
    k2,42.3516,-71.0571,robbery,\n\
    k3,42.3529,-71.0590,shooting,\n\
    k4,42.3515,-71.0602,theft,\n";
const CONFIG: &str = "[run]\nseed = 9\n[skipgram]\ndim = 4\nepochs = 2\n[walks]\nwalks_per_node = 4\nwalk_length = 8\n\
    [policy]\nhidden1 = 8\nhidden2 = 8\n[train]\nepisodes_per_epoch = 10\nepochs = 3\nsupervised_epochs = 2\n\
    pairs = 8\nhop_k = 2\nmax_len = 6\n[evaluation]\ncity = \"square\"\nhops = [2]\npairs = 1\nseeds = [0]\n";

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for (name, body) in [("nodes.csv", NODES), ("edges.csv", EDGES), ("crimes.csv", CRIMES), ("run.toml", CONFIG)] {
        std::fs::write(dir.path().join(name), body).unwrap();
    }
    dir
}

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_saferoute"))
        .current_dir(dir)
        .env_remove("SAFEROUTE_CONFIG")
        .args(["--config", "run.toml"])
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn build(dir: &Path) -> String {
    ok(dir, &["build-graph", "--nodes", "nodes.csv", "--edges", "edges.csv", "--out", "graph.json"])
}

fn embed(dir: &Path) {
    build(dir);
    ok(dir, &["embed", "--graph", "graph.json", "--out", "emb.txt"]);
}

const TRAIN: &[&str] = &["train", "--graph", "graph.json", "--embeddings", "emb.txt", "--crimes", "crimes.csv"];
const MODEL: &[&str] = &["--graph", "graph.json", "--embeddings", "emb.txt", "--crimes", "crimes.csv", "--weights", "m/weights.txt"];

fn with(base: &[&str], extra: &[&'static str]) -> Vec<&'static str> {
    base.iter().chain(extra).map(|s| -> &'static str { Box::leak(s.to_string().into_boxed_str()) }).collect()
}

#[test]
fn build_graph_summary_and_determinism() {
    let dir = setup();
    let summary = build(dir.path());
    assert!(summary.contains("nodes: 4"), "{summary}");
    assert!(summary.contains("directed edges: 8"), "{summary}");
    let first = std::fs::read(dir.path().join("graph.json")).unwrap();
    build(dir.path());
    assert_eq!(first, std::fs::read(dir.path().join("graph.json")).unwrap());
}

#[test]
fn bad_row_reports_line() {
    let dir = setup();
    std::fs::write(dir.path().join("nodes.csv"), "id,lat,lon\na,42.35,-71.06\nb,not-a-number,-71.05\n").unwrap();
    let out = run(dir.path(), &["build-graph", "--nodes", "nodes.csv", "--edges", "edges.csv", "--out", "graph.json"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("nodes.csv:3"), "{err}");
}

#[test]
fn embed_writes_one_line_per_node() {
    let dir = setup();
    embed(dir.path());
    let text = std::fs::read_to_string(dir.path().join("emb.txt")).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).skip(1).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.split_whitespace().count() == 1 + 4));
    let first = text.clone();
    ok(dir.path(), &["embed", "--graph", "graph.json", "--out", "emb.txt"]);
    assert_eq!(first, std::fs::read_to_string(dir.path().join("emb.txt")).unwrap());
}

#[test]
fn embed_without_graph_names_the_file() {
    let dir = setup();
    let out = run(dir.path(), &["embed", "--graph", "missing.json", "--out", "emb.txt"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.json"));
}

#[test]
fn supervised_phase_needs_no_crimes() {
    let dir = setup();
    embed(dir.path());
    ok(
        dir.path(),
        &["train", "--graph", "graph.json", "--embeddings", "emb.txt", "--crimes", "absent.csv", "--phase", "supervised", "--out-dir", "m"],
    );
    assert!(dir.path().join("m/weights.txt").exists());
}

#[test]
fn zero_epochs_keeps_initial_weights() {
    let dir = setup();
    embed(dir.path());
    let cfg = CONFIG.replace("epochs = 3\nsupervised_epochs = 2", "epochs = 0\nsupervised_epochs = 0");
    std::fs::write(dir.path().join("run.toml"), cfg).unwrap();
    ok(dir.path(), &with(TRAIN, &["--out-dir", "a"]));
    let seed = saferoute::exec::derive_seed(9, &[3]);
    let init = PolicyNetwork::new(8, &PolicyConfig { hidden1: 8, hidden2: 8, seed }).unwrap();
    let trained = load_weights(dir.path().join("a/weights.txt"), Some(8)).unwrap();
    assert_eq!(trained, init);
    ok(dir.path(), &with(TRAIN, &["--out-dir", "b", "--init", "a/weights.txt"]));
    assert_eq!(
        std::fs::read(dir.path().join("a/weights.txt")).unwrap(),
        std::fs::read(dir.path().join("b/weights.txt")).unwrap()
    );
}

#[test]
fn resume_matches_uninterrupted_run() {
    let dir = setup();
    embed(dir.path());
    ok(dir.path(), &with(TRAIN, &["--out-dir", "full"]));

    // Stop after one retraining epoch, then resume with the full schedule.
    std::fs::write(dir.path().join("run.toml"), CONFIG.replace("epochs = 3\n", "epochs = 1\n")).unwrap();
    ok(dir.path(), &with(TRAIN, &["--out-dir", "part"]));
    std::fs::write(dir.path().join("run.toml"), CONFIG).unwrap();
    ok(dir.path(), &with(TRAIN, &["--out-dir", "part", "--resume"]));

    for f in ["weights.txt", "train_log.csv"] {
        assert_eq!(
            std::fs::read(dir.path().join("full").join(f)).unwrap(),
            std::fs::read(dir.path().join("part").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn route_outputs_and_errors() {
    let dir = setup();
    embed(dir.path());
    ok(dir.path(), &with(TRAIN, &["--out-dir", "m"]));

    let same = run(dir.path(), &with(&["route"], &with(MODEL, &["--from", "a", "--to", "a"])));
    assert_eq!(same.status.code(), Some(2));

    let unknown = run(dir.path(), &with(&["route"], &with(MODEL, &["--from", "a", "--to", "zz"])));
    assert!(!unknown.status.success());
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("zz"));

    // A one-step beam can only return the direct street.
    std::fs::write(dir.path().join("run.toml"), format!("{CONFIG}[beam]\nmax_len = 1\n")).unwrap();
    let args = with(&["route"], &with(MODEL, &["--from", "a", "--to", "b", "--out", "r.geojson"]));
    let first = ok(dir.path(), &args);
    assert!(first.contains("route: a b"), "{first}");
    let gj: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.geojson")).unwrap()).unwrap();
    assert_eq!(gj["geometry"]["type"], "LineString");
    assert_eq!(gj["geometry"]["coordinates"].as_array().unwrap().len(), 2);
    assert_eq!(first, ok(dir.path(), &args));
}

#[test]
fn evaluate_single_pair_matches_direct_metrics() {
    let dir = setup();
    embed(dir.path());
    ok(dir.path(), &with(TRAIN, &["--out-dir", "m"]));
    ok(dir.path(), &with(&["evaluate"], &with(MODEL, &["--out-dir", "rep"])));

    let text = std::fs::read_to_string(dir.path().join("rep/results_square_2.csv")).unwrap();
    let row: Vec<&str> = text.lines().find(|l| l.starts_with("dijkstra,")).unwrap().split(',').collect();
    let graph = StreetGraph::from_artifact(&std::fs::read_to_string(dir.path().join("graph.json")).unwrap()).unwrap();
    let crimes = load_crimes(dir.path().join("crimes.csv"), &["shooting".into(), "assault".into(), "robbery".into()]).unwrap();
    // Every 2-hop pair on the square is a diagonal with the same metrics up to rounding.
    let (a, c) = (graph.index_of("a").unwrap(), graph.index_of("c").unwrap());
    let path = dijkstra(&graph, a, c).unwrap().unwrap().path;
    let close = |s: &str, want: f64| (s.parse::<f64>().unwrap() - want).abs() <= 1e-12 * want.abs().max(1.0);
    assert!(close(row[1], local_avg(&path, &crimes).unwrap()), "{row:?}");
    assert!(close(row[2], global_avg(&path, &crimes).unwrap()), "{row:?}");
    assert!(close(row[3], path.length()), "{row:?}");
    assert_eq!(row[4], "0");
}

#[test]
fn evaluate_missing_weights_names_the_file() {
    let dir = setup();
    embed(dir.path());
    let out = run(dir.path(), &with(&["evaluate"], &with(MODEL, &["--out-dir", "rep"])));
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("m/weights.txt"));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = setup();
    build(dir.path());
    ok(dir.path(), &["embed", "--graph", "graph.json", "--out", "e9.txt"]);
    ok(dir.path(), &["--seed", "9", "embed", "--graph", "graph.json", "--out", "f9.txt"]);
    ok(dir.path(), &["--seed", "10", "embed", "--graph", "graph.json", "--out", "e10.txt"]);
    let read = |f: &str| std::fs::read(dir.path().join(f)).unwrap();
    assert_eq!(read("e9.txt"), read("f9.txt"));
    assert_ne!(read("e9.txt"), read("e10.txt"));
}
