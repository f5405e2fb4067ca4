//! Undirected weighted graphs, SNAP edge-list ingestion and the normalized
//! Laplacian.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read};

use ndarray::Array2;

use crate::error::{Error, Result};

/// One undirected edge, stored with `u < v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

impl Edge {
    pub fn new(a: usize, b: usize, weight: f64) -> Self {
        let (u, v) = if a < b { (a, b) } else { (b, a) };
        Edge { u, v, weight }
    }

    fn key(&self) -> (usize, usize) {
        (self.u, self.v)
    }
}

/// Undirected graph over the node universe `0..num_nodes`.
///
/// Edges are kept sorted by `(u, v)` with no duplicates and no self-loops, so
/// two graphs built from the same edge set compare equal regardless of input
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    num_nodes: usize,
    edges: Vec<Edge>,
    original_ids: Vec<u64>,
}

impl Graph {
    /// Builds a graph from arbitrary edges. Self-loops are dropped and for
    /// duplicate pairs the first occurrence wins.
    pub fn from_edges(num_nodes: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        let mut seen: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for e in edges {
            let e = Edge::new(e.u, e.v, e.weight);
            if e.v >= num_nodes {
                return Err(Error::contract(format!(
                    "edge ({}, {}) outside node universe of size {num_nodes}",
                    e.u, e.v
                )));
            }
            if !(e.weight.is_finite() && e.weight > 0.0) {
                return Err(Error::contract(format!(
                    "edge ({}, {}) has non-positive weight {}",
                    e.u, e.v, e.weight
                )));
            }
            if e.u != e.v {
                seen.entry(e.key()).or_insert(e.weight);
            }
        }
        let edges = seen
            .into_iter()
            .map(|((u, v), weight)| Edge { u, v, weight })
            .collect();
        Ok(Graph {
            num_nodes,
            edges,
            original_ids: (0..num_nodes as u64).collect(),
        })
    }

    /// Builds a graph from unit-weight pairs.
    pub fn from_pairs(num_nodes: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        Self::from_edges(num_nodes, pairs.iter().map(|&(u, v)| Edge::new(u, v, 1.0)))
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Original node id for each contiguous id.
    pub fn original_ids(&self) -> &[u64] {
        &self.original_ids
    }

    /// A graph over the same node universe (and id mapping) with a subset of edges.
    pub fn with_edges(&self, edges: Vec<Edge>) -> Result<Self> {
        let mut g = Graph::from_edges(self.num_nodes, edges)?;
        g.original_ids = self.original_ids.clone();
        Ok(g)
    }

    /// Weighted degree of every node.
    pub fn degrees(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.num_nodes];
        for e in &self.edges {
            d[e.u] += e.weight;
            d[e.v] += e.weight;
        }
        d
    }

    /// Dense symmetric adjacency matrix.
    pub fn adjacency(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.num_nodes, self.num_nodes));
        for e in &self.edges {
            a[[e.u, e.v]] = e.weight;
            a[[e.v, e.u]] = e.weight;
        }
        a
    }

    /// Serializes to SNAP edge-list text using the contiguous ids.
    ///
    /// Nodes without edges are written as self-loops so that re-parsing keeps
    /// the node universe intact. Non-unit weights are written as a third column.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        let mut touched = vec![false; self.num_nodes];
        for e in &self.edges {
            touched[e.u] = true;
            touched[e.v] = true;
        }
        for (i, _) in touched.iter().enumerate().filter(|(_, t)| !**t) {
            let _ = writeln!(out, "{i} {i}");
        }
        for e in &self.edges {
            if e.weight == 1.0 {
                let _ = writeln!(out, "{} {}", e.u, e.v);
            } else {
                let _ = writeln!(out, "{} {} {}", e.u, e.v, e.weight);
            }
        }
        out
    }
}

/// Counts gathered while parsing an edge list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ParseReport {
    pub num_nodes: usize,
    /// Undirected edges after symmetrization and deduplication.
    pub num_edges: usize,
    /// Data lines read (arcs, for a directed file).
    pub raw_pairs: usize,
    pub self_loops: usize,
    /// Whether the input was read as arcs.
    pub directed: bool,
    pub duplicates: usize,
}

/// Parses SNAP edge-list text: whitespace-separated integer pairs, one edge per
/// line, `#` comments. An optional third column is read as the edge weight.
///
/// Node ids are remapped to `0..N` in sorted order of the original ids. Every
/// id that appears on a data line is part of the node universe, including ids
/// that only occur in self-loops. With `directed = true`, reciprocal arcs merge
/// into one undirected edge.
pub fn parse_edge_list<R: Read>(reader: R, directed: bool) -> Result<(Graph, ParseReport)> {
    let mut pairs: Vec<(u64, u64, f64)> = Vec::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with('%') {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let mut id = |what: &str| -> Result<u64> {
            let tok = tokens.next().ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("missing {what} node id"),
            })?;
            tok.parse::<u64>().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("invalid {what} node id {tok:?}"),
            })
        };
        let a = id("source")?;
        let b = id("target")?;
        let weight = match tokens.next() {
            None => 1.0,
            Some(tok) => match tok.parse::<f64>() {
                Ok(w) if w.is_finite() && w > 0.0 => w,
                _ => {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("invalid edge weight {tok:?}"),
                    })
                }
            },
        };
        if let Some(extra) = tokens.next() {
            return Err(Error::Parse {
                line: line_no,
                message: format!("unexpected token {extra:?}"),
            });
        }
        pairs.push((a, b, weight));
    }
    if pairs.is_empty() {
        return Err(Error::EmptyInput);
    }

    let mut ids: Vec<u64> = pairs.iter().flat_map(|&(a, b, _)| [a, b]).collect();
    ids.sort_unstable();
    ids.dedup();
    let index = |id: u64| ids.binary_search(&id).expect("id collected above");

    let mut report = ParseReport {
        num_nodes: ids.len(),
        raw_pairs: pairs.len(),
        directed,
        ..ParseReport::default()
    };
    // Undirected input may still list both orientations, so symmetrizing a
    // directed file and deduplicating an undirected one are the same step.
    let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for &(a, b, w) in &pairs {
        if a == b {
            report.self_loops += 1;
            continue;
        }
        let key = Edge::new(index(a), index(b), w).key();
        match merged.entry(key) {
            std::collections::btree_map::Entry::Occupied(_) => report.duplicates += 1,
            std::collections::btree_map::Entry::Vacant(slot) => {
                slot.insert(w);
            }
        }
    }
    report.num_edges = merged.len();

    let graph = Graph {
        num_nodes: ids.len(),
        edges: merged
            .into_iter()
            .map(|((u, v), weight)| Edge { u, v, weight })
            .collect(),
        original_ids: ids,
    };
    Ok((graph, report))
}

/// Dense normalized Laplacian `L = I - D^{-1/2} A D^{-1/2}`.
///
/// Rows and columns of degree-0 nodes are all zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMatrix(Array2<f64>);

impl LaplacianMatrix {
    /// Builds the normalized Laplacian of a dense symmetric non-negative
    /// adjacency matrix. The diagonal of `adjacency` is ignored.
    pub fn from_adjacency(adjacency: &Array2<f64>) -> Result<Self> {
        let n = adjacency.nrows();
        if adjacency.ncols() != n {
            return Err(Error::contract("adjacency matrix must be square"));
        }
        let mut degree = vec![0.0; n];
        for (i, row) in adjacency.outer_iter().enumerate() {
            degree[i] = row
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &w)| w)
                .sum();
        }
        let mut l = Array2::zeros((n, n));
        for i in 0..n {
            if degree[i] <= 0.0 {
                continue;
            }
            l[[i, i]] = 1.0;
            for j in 0..n {
                let w = adjacency[[i, j]];
                if j != i && w != 0.0 {
                    l[[i, j]] = -w / (degree[i] * degree[j]).sqrt();
                }
            }
        }
        Ok(LaplacianMatrix(l))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }
}

/// Normalized Laplacian of a graph (see [`LaplacianMatrix`]).
pub fn normalized_laplacian(g: &Graph) -> LaplacianMatrix {
    let n = g.num_nodes();
    let d = g.degrees();
    let mut l = Array2::zeros((n, n));
    for i in 0..n {
        if d[i] > 0.0 {
            l[[i, i]] = 1.0;
        }
    }
    for e in g.edges() {
        let x = -e.weight / (d[e.u] * d[e.v]).sqrt();
        l[[e.u, e.v]] = x;
        l[[e.v, e.u]] = x;
    }
    LaplacianMatrix(l)
}
