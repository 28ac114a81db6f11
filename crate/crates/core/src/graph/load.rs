use std::path::Path;

use serde::Deserialize;

use super::{Street, StreetGraph};
use crate::csvio::read_rows;
use crate::error::{Error, Result};
use crate::geo::GeoPoint;

#[derive(Deserialize)]
struct NodeRow {
    id: String,
    lat: f64,
    lon: f64,
}

#[derive(Deserialize)]
struct EdgeRow {
    from: String,
    to: String,
    #[serde(default)]
    length_miles: Option<f64>,
}

/// Reads a `id,lat,lon` nodes file.
pub fn read_nodes(path: &Path) -> Result<Vec<(String, GeoPoint)>> {
    read_rows::<NodeRow>(path, &["id", "lat", "lon"])?
        .into_iter()
        .map(|(line, row)| {
            let p = GeoPoint::new(row.lat, row.lon).map_err(|e| Error::Row {
                path: path.to_path_buf(),
                line,
                message: e.to_string(),
            })?;
            Ok((row.id, p))
        })
        .collect()
}

/// Reads a `from,to,length_miles` streets file; blank lengths become `None`.
pub fn read_streets(path: &Path) -> Result<Vec<Street>> {
    Ok(read_rows::<EdgeRow>(path, &["from", "to", "length_miles"])?
        .into_iter()
        .map(|(_, row)| Street { from: row.from, to: row.to, length: row.length_miles })
        .collect())
}

/// Loads and validates a street graph from nodes and streets CSV files.
pub fn load_map(nodes_file: impl AsRef<Path>, edges_file: impl AsRef<Path>) -> Result<StreetGraph> {
    let nodes = read_nodes(nodes_file.as_ref())?;
    let streets = read_streets(edges_file.as_ref())?;
    StreetGraph::build(nodes, &streets)
}
