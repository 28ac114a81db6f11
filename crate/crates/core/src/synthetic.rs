//! Small generated cities for tests, benchmarks and demos.

use rand::Rng;

use crate::crime::{CrimeIndex, CrimeRecord};
use crate::exec::rng_from;
use crate::geo::{haversine_miles, GeoPoint};
use crate::graph::{NodeIdx, Street, StreetGraph};

const ORIGIN: (f64, f64) = (42.35, -71.06);

pub struct SyntheticCity {
    pub graph: StreetGraph,
    pub crimes: CrimeIndex,
    /// Suggested evaluation queries, if the layout has natural ones.
    pub queries: Vec<(NodeIdx, NodeIdx)>,
}

fn at(dlat: f64, dlon: f64) -> GeoPoint {
    GeoPoint::new(ORIGIN.0 + dlat, ORIGIN.1 + dlon).expect("synthetic coordinates are valid")
}

/// Rectangular street grid with ids `rRRcCC`, so node index = `row * cols + col`.
pub fn grid_city(rows: usize, cols: usize, spacing_deg: f64) -> SyntheticCity {
    let id = |r: usize, c: usize| format!("r{r:02}c{c:02}");
    let mut nodes = Vec::new();
    let mut streets = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            nodes.push((id(r, c), at(r as f64 * spacing_deg, c as f64 * spacing_deg)));
            if c + 1 < cols {
                streets.push(Street::new(id(r, c), id(r, c + 1), None));
            }
            if r + 1 < rows {
                streets.push(Street::new(id(r, c), id(r + 1, c), None));
            }
        }
    }
    SyntheticCity {
        graph: StreetGraph::build(nodes, &streets).expect("grid city is valid"),
        crimes: CrimeIndex::empty(),
        queries: Vec::new(),
    }
}

/// Two equal-length corridors between a west and an east hub, with short
/// approach streets on both sides and a dead-end spur off each corridor.
///
/// `crimes` incidents are planted along the north corridor, whose node ids
/// sort first, so length-only routing with lexicographic tie-break takes the
/// dangerous corridor. Queries pair every west approach node with every east
/// one.
pub fn two_corridor_city(crimes: usize, seed: u64) -> SyntheticCity {
    let mut nodes: Vec<(String, GeoPoint)> = vec![
        ("w2".into(), at(0.0, -0.006)),
        ("w1".into(), at(0.0, -0.003)),
        ("w0".into(), at(0.0, 0.0)),
        ("e0".into(), at(0.0, 0.016)),
        ("e1".into(), at(0.0, 0.019)),
        ("e2".into(), at(0.0, 0.022)),
    ];
    let corridor = [0.002, 0.006, 0.010, 0.014];
    for (i, lon) in corridor.iter().enumerate() {
        nodes.push((format!("n{}", i + 1), at(0.004, *lon)));
        nodes.push((format!("s{}", i + 1), at(-0.004, *lon)));
    }
    nodes.push(("nx".into(), at(0.007, 0.006)));
    nodes.push(("sx".into(), at(-0.007, 0.006)));

    let loc = |id: &str| nodes.iter().find(|(n, _)| n == id).map(|(_, p)| *p).unwrap();
    let mut streets = vec![
        Street::new("w2", "w1", None),
        Street::new("w1", "w0", None),
        Street::new("e0", "e1", None),
        Street::new("e1", "e2", None),
    ];
    // Mirror-image corridors get identical lengths, taken from the north side.
    let mut pair = |a: &str, b: &str| {
        let len = haversine_miles(loc(a), loc(b));
        let flip = |s: &str| if s.starts_with('n') { s.replacen('n', "s", 1) } else { s.to_string() };
        streets.push(Street::new(a, b, Some(len)));
        streets.push(Street::new(flip(a), flip(b), Some(len)));
    };
    pair("w0", "n1");
    pair("n1", "n2");
    pair("n2", "n3");
    pair("n3", "n4");
    pair("n4", "e0");
    pair("n2", "nx");

    let mut rng = rng_from(seed);
    let records = (0..crimes)
        .map(|i| CrimeRecord {
            id: format!("k{i:03}"),
            location: at(0.004 + (rng.gen::<f64>() - 0.5) * 0.0006, 0.003 + rng.gen::<f64>() * 0.010),
            category: "assault".into(),
            timestamp: None,
        })
        .collect();

    let graph = StreetGraph::build(nodes, &streets).expect("two-corridor city is valid");
    let mut queries = Vec::new();
    for s in ["w2", "w1", "w0"] {
        for t in ["e0", "e1", "e2"] {
            queries.push((graph.index_of(s).unwrap(), graph.index_of(t).unwrap()));
        }
    }
    SyntheticCity { graph, crimes: CrimeIndex::new(records).expect("planted crimes are valid"), queries }
}

/// Random connected-ish geometric graph on `n` nodes: each node links to its
/// `k` nearest neighbours. Returns `None` if compass assignment fails.
pub fn random_geometric(n: usize, k: usize, seed: u64) -> Option<StreetGraph> {
    let mut rng = rng_from(seed);
    let pts: Vec<GeoPoint> = (0..n).map(|_| at(rng.gen::<f64>() * 0.01, rng.gen::<f64>() * 0.01)).collect();
    let mut streets = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for i in 0..n {
        let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        order.sort_by(|&a, &b| haversine_miles(pts[i], pts[a]).total_cmp(&haversine_miles(pts[i], pts[b])));
        for &j in order.iter().take(k) {
            if seen.insert((i.min(j), i.max(j))) {
                streets.push(Street::new(format!("v{i:02}"), format!("v{j:02}"), None));
            }
        }
    }
    let nodes = pts.into_iter().enumerate().map(|(i, p)| (format!("v{i:02}"), p)).collect();
    StreetGraph::build(nodes, &streets).ok()
}

/// `n` crimes scattered uniformly over the bounding box of `graph`, padded by `pad_deg`.
pub fn scatter_crimes(graph: &StreetGraph, n: usize, pad_deg: f64, seed: u64) -> CrimeIndex {
    let mut rng = rng_from(seed);
    let (mut lat0, mut lat1, mut lon0, mut lon1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for node in graph.nodes() {
        lat0 = lat0.min(node.location.lat);
        lat1 = lat1.max(node.location.lat);
        lon0 = lon0.min(node.location.lon);
        lon1 = lon1.max(node.location.lon);
    }
    let records = (0..n)
        .map(|i| CrimeRecord {
            id: format!("x{i:05}"),
            location: GeoPoint::new(
                lat0 - pad_deg + rng.gen::<f64>() * (lat1 - lat0 + 2.0 * pad_deg),
                lon0 - pad_deg + rng.gen::<f64>() * (lon1 - lon0 + 2.0 * pad_deg),
            )
            .unwrap(),
            category: "robbery".into(),
            timestamp: None,
        })
        .collect();
    CrimeIndex::new(records).expect("scattered crimes are valid")
}
