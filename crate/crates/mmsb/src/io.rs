//! Edge lists and membership matrices on disk.
//!
//! Edge lists hold one `u<TAB>v` pair per line (any whitespace is accepted),
//! 0-indexed, with `#` comments and an optional first line
//! `% nodes=<n> directed=<0|1>`. Memberships are CSV with one column per
//! community and one row per node.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use mmsb_core::Graph;
use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EdgeListHeader {
    pub nodes: Option<usize>,
    pub directed: Option<bool>,
}

fn parse_header(line: &str, number: usize) -> Result<EdgeListHeader> {
    let mut header = EdgeListHeader::default();
    for field in line.trim_start_matches('%').split_whitespace() {
        let bad = || Error::Parse {
            line: number,
            message: format!("bad header field `{field}`"),
        };
        let (key, value) = field.split_once('=').ok_or_else(bad)?;
        match key {
            "nodes" => header.nodes = Some(value.parse().map_err(|_| bad())?),
            "directed" => {
                header.directed = Some(match value {
                    "0" => false,
                    "1" => true,
                    _ => return Err(bad()),
                })
            }
            _ => return Err(bad()),
        }
    }
    Ok(header)
}

/// Reads an edge list. `directed` applies when the header does not say.
///
/// Undirected lists may name each edge once or in both directions.
pub fn read_edge_list<R: Read>(reader: R, directed: bool) -> Result<Graph> {
    let mut header = EdgeListHeader::default();
    let mut edges = Vec::new();
    let mut max_node = None::<usize>;
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let number = i + 1;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        if text.starts_with('%') {
            if !edges.is_empty() || header != EdgeListHeader::default() {
                return Err(Error::Parse {
                    line: number,
                    message: "header must precede the edges".into(),
                });
            }
            header = parse_header(text, number)?;
            continue;
        }
        let mut fields = text.split_whitespace();
        let mut node = || -> Result<usize> {
            let field = fields.next().ok_or_else(|| Error::Parse {
                line: number,
                message: "expected two node indices".into(),
            })?;
            field.parse().map_err(|_| Error::Parse {
                line: number,
                message: format!("`{field}` is not a node index"),
            })
        };
        let (u, v) = (node()?, node()?);
        if fields.next().is_some() {
            return Err(Error::Parse {
                line: number,
                message: "expected exactly two fields".into(),
            });
        }
        max_node = max_node.max(Some(u.max(v)));
        edges.push((u, v));
    }
    let inferred = max_node.map_or(0, |m| m + 1);
    let n = match header.nodes {
        Some(n) if n < inferred => {
            return Err(Error::Invalid(format!("header declares {n} nodes but node {} appears", inferred - 1)))
        }
        Some(n) => n,
        None => inferred,
    };
    let directed = header.directed.unwrap_or(directed);
    Ok(Graph::from_edges(n, directed, edges)?)
}

pub fn write_edge_list<W: Write>(writer: W, g: &Graph) -> Result<()> {
    let mut w = BufWriter::new(writer);
    writeln!(w, "% nodes={} directed={}", g.n(), u8::from(g.is_directed()))?;
    for (u, v) in g.edges() {
        writeln!(w, "{u}\t{v}")?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a `k x n` membership matrix as `n` CSV rows under `c0..c{k-1}`.
pub fn write_memberships<W: Write>(writer: W, pi: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record((0..pi.nrows()).map(|i| format!("c{i}")))?;
    for col in pi.column_iter() {
        w.write_record(col.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the format of [`write_memberships`] back into a `k x n` matrix.
pub fn read_memberships<R: Read>(reader: R) -> Result<DMatrix<f64>> {
    let mut r = csv::Reader::from_reader(reader);
    let k = r.headers()?.len();
    if k == 0 {
        return Err(Error::Invalid("membership file has no columns".into()));
    }
    let mut values = Vec::new();
    for (row, record) in r.records().enumerate() {
        for field in record?.iter() {
            values.push(field.trim().parse::<f64>().map_err(|_| Error::Parse {
                line: row + 2,
                message: format!("`{field}` is not a number"),
            })?);
        }
    }
    let n = values.len() / k;
    Ok(DMatrix::from_column_slice(k, n, &values))
}

pub fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

pub fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::io(path, e))
}

pub fn read_graph_file(path: &Path, directed: bool) -> Result<Graph> {
    read_edge_list(open(path)?, directed)
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(open(path)?))?)
}
