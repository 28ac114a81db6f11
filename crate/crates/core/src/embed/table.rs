use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{io_err, Error, Result};
use crate::graph::{NodeIdx, StreetGraph};

/// Node id → d-dimensional vector. Rows are stored contiguously in insertion order.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    ids: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
}

impl EmbeddingTable {
    pub fn from_rows(ids: Vec<String>, dim: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        if ids.len() != rows.len() {
            return Err(Error::DimensionMismatch { expected: ids.len(), actual: rows.len() });
        }
        let mut index = HashMap::with_capacity(ids.len());
        let mut data = Vec::with_capacity(ids.len() * dim);
        for (i, (id, row)) in ids.iter().zip(&rows).enumerate() {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, actual: row.len() });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Format(format!("non-finite embedding for node `{id}`")));
            }
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::DuplicateNode(id.clone()));
            }
            data.extend_from_slice(row);
        }
        Ok(EmbeddingTable { dim, ids, index, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.index.get(id).map(|&i| self.row(i))
    }

    /// Row by position. After [`EmbeddingTable::align_to`] positions equal node indices.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Reorders rows to the graph's node order; fails if a node has no vector.
    pub fn align_to(&self, graph: &StreetGraph) -> Result<EmbeddingTable> {
        let ids: Vec<String> = graph.nodes().iter().map(|n| n.id.clone()).collect();
        let rows = ids
            .iter()
            .map(|id| self.get(id).map(<[f64]>::to_vec).ok_or_else(|| Error::UnknownNode(id.clone())))
            .collect::<Result<Vec<_>>>()?;
        EmbeddingTable::from_rows(ids, self.dim, rows)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.len(), self.dim);
        for (i, id) in self.ids.iter().enumerate() {
            out.push_str(id);
            for v in self.row(i) {
                write!(out, " {v}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: String| Error::Format(m);
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| bad("empty embedding file".into()))?;
        let nums: Vec<usize> = header
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad(format!("bad header `{header}`")))?;
        let [count, dim] = nums[..] else {
            return Err(bad(format!("bad header `{header}`")));
        };
        let mut ids = Vec::with_capacity(count);
        let mut rows = Vec::with_capacity(count);
        for (n, line) in lines.enumerate() {
            let mut parts = line.split_whitespace();
            let id = parts.next().unwrap().to_string();
            let row: Vec<f64> = parts
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad(format!("line {}: bad number", n + 2)))?;
            if row.len() != dim {
                return Err(bad(format!("line {}: expected {dim} values, got {}", n + 2, row.len())));
            }
            ids.push(id);
            rows.push(row);
        }
        if ids.len() != count {
            return Err(bad(format!("header announces {count} rows, found {}", ids.len())));
        }
        EmbeddingTable::from_rows(ids, dim, rows)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(io_err(path))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_text(&std::fs::read_to_string(path).map_err(io_err(path))?)
    }
}

/// `(e_current, e_target − e_current)`, rows addressed by node index.
pub fn state_vector(table: &EmbeddingTable, current: NodeIdx, target: NodeIdx) -> Result<Vec<f64>> {
    if current >= table.len() || target >= table.len() {
        return Err(Error::UnknownNode(format!("#{}", current.max(target))));
    }
    let (c, t) = (table.row(current), table.row(target));
    let mut s = Vec::with_capacity(2 * table.dim);
    s.extend_from_slice(c);
    s.extend(t.iter().zip(c).map(|(t, c)| t - c));
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn table(rows: Vec<Vec<f64>>) -> EmbeddingTable {
        let ids = (0..rows.len()).map(|i| format!("n{i}")).collect();
        let dim = rows[0].len();
        EmbeddingTable::from_rows(ids, dim, rows).unwrap()
    }

    #[test]
    fn state_vector_examples() {
        let t = table(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(state_vector(&t, 0, 1).unwrap(), vec![1.0, 0.0, -1.0, 1.0]);
        assert_eq!(state_vector(&t, 1, 1).unwrap(), vec![0.0, 1.0, 0.0, 0.0]);
        assert!(state_vector(&t, 0, 2).is_err());
    }

    #[test]
    fn first_half_is_current() {
        let mut rng = crate::exec::rng_from(3);
        let rows: Vec<Vec<f64>> = (0..10).map(|_| (0..5).map(|_| rng.gen::<f64>() - 0.5).collect()).collect();
        let t = table(rows.clone());
        for c in 0..10 {
            for g in 0..10 {
                let s = state_vector(&t, c, g).unwrap();
                assert_eq!(s.len(), 10);
                assert_eq!(&s[..5], &rows[c][..]);
            }
        }
    }

    #[test]
    fn text_round_trip_is_exact() {
        let mut rng = crate::exec::rng_from(8);
        let rows: Vec<Vec<f64>> = (0..7).map(|_| (0..4).map(|_| rng.gen::<f64>() * 1e-3 - 3.0).collect()).collect();
        let t = table(rows);
        let back = EmbeddingTable::from_text(&t.to_text()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn malformed_text_rejected() {
        assert!(EmbeddingTable::from_text("").is_err());
        assert!(EmbeddingTable::from_text("2 2\na 1 2\n").is_err());
        assert!(EmbeddingTable::from_text("1 2\na 1\n").is_err());
        assert!(EmbeddingTable::from_text("1 2\na 1 x\n").is_err());
        assert!(EmbeddingTable::from_rows(vec!["a".into(), "a".into()], 1, vec![vec![0.0], vec![1.0]]).is_err());
    }
}
