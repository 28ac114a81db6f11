//! Crime records bucketed on a uniform lat/lon grid, with exact radius
//! queries, nearest-crime lookup and Gaussian kernel density.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{haversine_miles, GeoPoint, EARTH_RADIUS_MILES};
use crate::graph::StreetEdge;

pub const DEFAULT_CELL_DEGREES: f64 = 0.005;
pub const DEFAULT_BANDWIDTH_MILES: f64 = 0.25;

/// Kernel contributions beyond this many bandwidths are skipped when the
/// skipped mass is provably negligible.
const KDE_CUTOFF_BANDWIDTHS: f64 = 10.0;
const KDE_REL_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrimeRecord {
    pub id: String,
    pub location: GeoPoint,
    pub category: String,
    pub timestamp: Option<String>,
}

#[derive(Clone, Debug)]
pub struct CrimeIndex {
    records: Vec<CrimeRecord>,
    cell_deg: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl CrimeIndex {
    pub fn new(records: Vec<CrimeRecord>) -> Result<Self> {
        Self::with_cell_size(records, DEFAULT_CELL_DEGREES)
    }

    pub fn with_cell_size(records: Vec<CrimeRecord>, cell_deg: f64) -> Result<Self> {
        if !(cell_deg.is_finite() && cell_deg > 0.0) {
            return Err(Error::Config(format!("cell size must be positive, got {cell_deg}")));
        }
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, r) in records.iter().enumerate() {
            GeoPoint::new(r.location.lat, r.location.lon)?;
            if r.category.trim().is_empty() {
                return Err(Error::Format(format!("crime `{}` has an empty category", r.id)));
            }
            buckets.entry(cell_of(r.location, cell_deg)).or_default().push(i);
        }
        Ok(CrimeIndex { records, cell_deg, buckets })
    }

    pub fn empty() -> Self {
        CrimeIndex { records: Vec::new(), cell_deg: DEFAULT_CELL_DEGREES, buckets: HashMap::new() }
    }

    pub fn records(&self) -> &[CrimeRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn cell_degrees(&self) -> f64 {
        self.cell_deg
    }

    /// Grid cell holding `p`.
    pub fn cell(&self, p: GeoPoint) -> (i64, i64) {
        cell_of(p, self.cell_deg)
    }

    /// Record indices stored in a cell.
    pub fn bucket(&self, cell: (i64, i64)) -> &[usize] {
        self.buckets.get(&cell).map_or(&[], Vec::as_slice)
    }

    pub fn bucket_count(&self) -> usize {
        self.buckets.len()
    }

    /// Record indices whose distance to `center` is ≤ `radius`, with distances,
    /// ordered by record id.
    pub fn within_radius_indices(&self, center: GeoPoint, radius: f64) -> Vec<(usize, f64)> {
        if self.records.is_empty() || radius.is_nan() || radius < 0.0 {
            return Vec::new();
        }
        let mut hits: Vec<(usize, f64)> = Vec::new();
        let mut consider = |i: usize| {
            let d = haversine_miles(center, self.records[i].location);
            if d <= radius {
                hits.push((i, d));
            }
        };
        match self.cell_window(center, radius) {
            Some((lat_lo, lat_hi, lon_lo, lon_hi)) => {
                for ci in lat_lo..=lat_hi {
                    for cj in lon_lo..=lon_hi {
                        if let Some(b) = self.buckets.get(&(ci, cj)) {
                            b.iter().for_each(|&i| consider(i));
                        }
                    }
                }
            }
            None => (0..self.records.len()).for_each(&mut consider),
        }
        hits.sort_by(|a, b| self.records[a.0].id.cmp(&self.records[b.0].id).then(a.0.cmp(&b.0)));
        hits
    }

    /// Exactly the records within `radius` miles of `center`, ordered by id.
    pub fn crimes_within_radius(&self, center: GeoPoint, radius: f64) -> Vec<(&CrimeRecord, f64)> {
        self.within_radius_indices(center, radius)
            .into_iter()
            .map(|(i, d)| (&self.records[i], d))
            .collect()
    }

    /// Cell rectangle guaranteed to contain every point within `radius`, or
    /// `None` when a full scan is cheaper or the window wraps.
    fn cell_window(&self, center: GeoPoint, radius: f64) -> Option<(i64, i64, i64, i64)> {
        let arc = radius / EARTH_RADIUS_MILES;
        let pad = |x: f64| x * (1.0 + 1e-9) + 1e-12;
        let dlat = pad(arc.to_degrees());
        let (lat_lo, lat_hi) = (center.lat - dlat, center.lat + dlat);
        if lat_lo <= -90.0 || lat_hi >= 90.0 {
            return None;
        }
        // Widest longitude offset of a small circle centred at this latitude.
        let s = arc.sin() / center.lat.to_radians().cos();
        if arc >= PI / 2.0 || s >= 1.0 {
            return None;
        }
        let dlon = pad(s.asin().to_degrees());
        let (lon_lo, lon_hi) = (center.lon - dlon, center.lon + dlon);
        if lon_lo < -180.0 || lon_hi >= 180.0 {
            return None;
        }
        let c = self.cell_deg;
        let window = (
            (lat_lo / c).floor() as i64,
            (lat_hi / c).floor() as i64,
            (lon_lo / c).floor() as i64,
            (lon_hi / c).floor() as i64,
        );
        let cells = (window.1 - window.0 + 1) as u128 * (window.3 - window.2 + 1) as u128;
        if cells > (self.buckets.len() as u128).max(9) * 4 {
            return None;
        }
        Some(window)
    }

    /// Nearest record to `p` and its distance.
    pub fn nearest(&self, p: GeoPoint) -> Option<(&CrimeRecord, f64)> {
        if self.records.is_empty() {
            return None;
        }
        let mut radius = self.cell_deg.to_radians() * EARTH_RADIUS_MILES;
        // Any record outside a searched radius is farther than every hit inside it.
        for _ in 0..24 {
            let hits = self.within_radius_indices(p, radius);
            if let Some(&(i, d)) = hits.iter().min_by(|a, b| a.1.total_cmp(&b.1)) {
                return Some((&self.records[i], d));
            }
            radius *= 2.0;
        }
        self.records
            .iter()
            .map(|r| (r, haversine_miles(p, r.location)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }

    /// Sum of distances and count of crimes within `edge.length` of its midpoint.
    pub fn edge_crime_stats(&self, edge: &StreetEdge) -> (f64, usize) {
        let hits = self.within_radius_indices(edge.midpoint, edge.length);
        (hits.iter().map(|h| h.1).sum(), hits.len())
    }

    /// Gaussian kernel density at `query`, in crimes per square mile
    /// normalised to integrate to one.
    ///
    /// Uses the grid to skip far-away records whenever their combined
    /// contribution is below 1e-12 of the partial sum; otherwise falls back
    /// to the full sum.
    pub fn kde_density(&self, bandwidth: f64, query: GeoPoint) -> Result<f64> {
        check_bandwidth(bandwidth)?;
        if self.records.is_empty() {
            return Err(Error::NoCrimesForDensity);
        }
        let cutoff = KDE_CUTOFF_BANDWIDTHS * bandwidth;
        let near = self.within_radius_indices(query, cutoff);
        let inv = 1.0 / (2.0 * bandwidth * bandwidth);
        let partial: f64 = near.iter().map(|&(_, d)| (-d * d * inv).exp()).sum();
        let skipped = (self.records.len() - near.len()) as f64;
        let bound = skipped * (-cutoff * cutoff * inv).exp();
        if bound <= KDE_REL_TOLERANCE * partial {
            Ok(partial * self.kde_norm(bandwidth))
        } else {
            self.kde_density_direct(bandwidth, query)
        }
    }

    /// Gaussian kernel density summed over every record.
    pub fn kde_density_direct(&self, bandwidth: f64, query: GeoPoint) -> Result<f64> {
        check_bandwidth(bandwidth)?;
        if self.records.is_empty() {
            return Err(Error::NoCrimesForDensity);
        }
        let inv = 1.0 / (2.0 * bandwidth * bandwidth);
        let sum: f64 = self
            .records
            .iter()
            .map(|r| {
                let d = haversine_miles(query, r.location);
                (-d * d * inv).exp()
            })
            .sum();
        Ok(sum * self.kde_norm(bandwidth))
    }

    fn kde_norm(&self, h: f64) -> f64 {
        1.0 / (self.records.len() as f64 * 2.0 * PI * h * h)
    }
}

fn check_bandwidth(h: f64) -> Result<()> {
    if h.is_finite() && h > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("bandwidth must be positive, got {h}")))
    }
}

fn cell_of(p: GeoPoint, cell: f64) -> (i64, i64) {
    ((p.lat / cell).floor() as i64, (p.lon / cell).floor() as i64)
}

#[derive(Deserialize)]
struct CrimeRow {
    id: String,
    lat: f64,
    lon: f64,
    category: String,
    #[serde(default)]
    timestamp: Option<String>,
}

/// Loads a `id,lat,lon,category,timestamp` file keeping only categories in
/// `filter` (case-insensitive; empty filter keeps everything).
pub fn load_crimes(path: impl AsRef<Path>, filter: &[String]) -> Result<CrimeIndex> {
    let path = path.as_ref();
    let wanted: Vec<String> = filter.iter().map(|c| c.trim().to_lowercase()).collect();
    let rows = crate::csvio::read_rows::<CrimeRow>(path, &["id", "lat", "lon", "category", "timestamp"])?;
    let mut records = Vec::new();
    for (line, row) in rows {
        let bad = |message: String| Error::Row { path: path.to_path_buf(), line, message };
        let location = GeoPoint::new(row.lat, row.lon).map_err(|e| bad(e.to_string()))?;
        if row.category.trim().is_empty() {
            return Err(bad("empty category".into()));
        }
        if !wanted.is_empty() && !wanted.contains(&row.category.trim().to_lowercase()) {
            continue;
        }
        records.push(CrimeRecord {
            id: row.id,
            location,
            category: row.category,
            timestamp: row.timestamp.filter(|t| !t.is_empty()),
        });
    }
    CrimeIndex::new(records)
}
