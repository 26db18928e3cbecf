//! Line-delimited JSON graph records.
//!
//! Each line is `{"n": N, "adjacency": [N*N row-major 0/1], "features": [...]?,
//! "sensitive": [...]?}`. `features` is row-major N x F when present.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::fairness::SensitiveAttributes;
use super::stats;
use crate::error::{Error, Result};
use crate::state::{pairs, GraphState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphRecord {
    pub n: usize,
    pub adjacency: Vec<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensitive: Option<Vec<u8>>,
}

impl GraphRecord {
    /// Quantizes the adjacency at 0.5 and keeps the features verbatim.
    pub fn from_state(g: &GraphState, sensitive: Option<&SensitiveAttributes>) -> Self {
        let q = stats::quantize(g, 0.5);
        let n = g.n_nodes();
        let adjacency = q.dense_adjacency().into_iter().map(|v| u8::from(v != 0.0)).collect();
        Self {
            n,
            adjacency,
            features: (g.n_features() > 0).then(|| g.features().to_vec()),
            sensitive: sensitive.map(|z| z.as_slice().to_vec()),
        }
    }

    pub fn to_state(&self) -> std::result::Result<GraphState, String> {
        let n = self.n;
        if self.adjacency.len() != n * n {
            return Err(format!(
                "adjacency has {} entries, expected {}",
                self.adjacency.len(),
                n * n
            ));
        }
        if self.adjacency.iter().any(|&v| v > 1) {
            return Err("adjacency entries must be 0 or 1".into());
        }
        let f = match &self.features {
            Some(x) if n == 0 => {
                if !x.is_empty() {
                    return Err("features given for an empty graph".into());
                }
                0
            }
            Some(x) if x.len() % n != 0 => {
                return Err(format!("{} feature values do not divide into {n} rows", x.len()));
            }
            Some(x) => x.len() / n,
            None => 0,
        };
        let dense: Vec<f64> = self.adjacency.iter().map(|&v| f64::from(v)).collect();
        GraphState::from_dense(n, f, self.features.as_deref().unwrap_or(&[]), &dense).map_err(|e| e.to_string())
    }

    pub fn sensitive_attributes(&self) -> std::result::Result<Option<SensitiveAttributes>, String> {
        match &self.sensitive {
            None => Ok(None),
            Some(z) if z.len() != self.n => Err(format!("{} sensitive attributes for {} nodes", z.len(), self.n)),
            Some(z) => SensitiveAttributes::new(z.clone()).map(Some).map_err(|e| e.to_string()),
        }
    }
}

pub fn read_records(path: &Path) -> Result<Vec<GraphRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: GraphRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// Reads records and converts them to states, reporting the offending line on
/// malformed shapes.
pub fn read_graphs(path: &Path) -> Result<Vec<(GraphState, Option<SensitiveAttributes>)>> {
    let records = read_records(path)?;
    let mut out = Vec::with_capacity(records.len());
    for (idx, rec) in records.iter().enumerate() {
        let parse = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            message,
        };
        let g = rec.to_state().map_err(parse)?;
        let z = rec.sensitive_attributes().map_err(parse)?;
        out.push((g, z));
    }
    Ok(out)
}

pub fn write_records(path: &Path, records: &[GraphRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for rec in records {
        let line = serde_json::to_string(rec).expect("records serialize");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Embeds `g` into `n` nodes: extra nodes are isolated with zero features.
pub fn pad_to(g: &GraphState, n: usize) -> Result<GraphState> {
    if n < g.n_nodes() {
        return Err(Error::Shape {
            expected: format!("at most {n} nodes"),
            got: g.n_nodes().to_string(),
        });
    }
    let f = g.n_features();
    let mut out = GraphState::zeros(n, f);
    out.features_mut()[..g.features().len()].copy_from_slice(g.features());
    for ((i, j), &v) in pairs(g.n_nodes()).zip(g.edges()) {
        out.set_adj(i, j, v);
    }
    Ok(out)
}

/// Pads every graph to the largest node count; feature widths must agree.
pub fn pad_all(graphs: &[GraphState]) -> Result<Vec<GraphState>> {
    let n = graphs.iter().map(GraphState::n_nodes).max().unwrap_or(0);
    if let Some(first) = graphs.first() {
        if let Some(bad) = graphs.iter().find(|g| g.n_features() != first.n_features()) {
            return Err(Error::Shape {
                expected: format!("{} features per node", first.n_features()),
                got: bad.n_features().to_string(),
            });
        }
    }
    graphs.iter().map(|g| pad_to(g, n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::stats::fixtures::*;

    #[test]
    fn roundtrip_through_a_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.jsonl");
        let mut g = star(4);
        let z = SensitiveAttributes::new(vec![0, 1, 0, 1]).unwrap();
        write_records(
            &path,
            &[
                GraphRecord::from_state(&g, Some(&z)),
                GraphRecord::from_state(&cycle(5), None),
            ],
        )
        .unwrap();
        let back = read_graphs(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].0, g);
        assert_eq!(back[0].1.as_ref(), Some(&z));
        assert_eq!(back[1].0, cycle(5));
        g.set_adj(0, 1, 0.7);
        assert_eq!(GraphRecord::from_state(&g, None).adjacency[1], 1);
    }

    #[test]
    fn malformed_lines_report_their_position() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(
            &path,
            "{\"n\":2,\"adjacency\":[0,1,1,0]}\n{\"n\":2,\"adjacency\":[0,1]}\n",
        )
        .unwrap();
        match read_graphs(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        std::fs::write(&path, "{\"n\":2,\"adjacency\":[0,1,0,0]}\n").unwrap();
        assert!(read_graphs(&path).is_err());
        assert!(matches!(
            read_records(&dir.path().join("missing")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn padding_keeps_edges_and_isolates_new_nodes() {
        let padded = pad_all(&[star(3), cycle(5)]).unwrap();
        assert_eq!(padded[0].n_nodes(), 5);
        assert_eq!(stats::edge_count(&padded[0]), 4.0);
        assert_eq!(padded[0].degrees()[4], 0.0);
        assert_eq!(padded[1], cycle(5));
    }
}
