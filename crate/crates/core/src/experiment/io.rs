use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{parse_edge_list, Graph};
use crate::linalg::Labeling;
use crate::metrics::{cluster_similarity, SimilarityScore};
use crate::partition::{distribute_with_plan, PartitionPlan};

#[derive(Debug, Serialize, Deserialize)]
struct LabelRow {
    node_id: u64,
    label: usize,
}

/// Writes `node_id,label` rows keyed by the graph's original node ids.
pub fn write_labels<W: Write>(writer: W, graph: &Graph, labels: &Labeling) -> Result<()> {
    if labels.len() != graph.num_nodes() {
        return Err(Error::contract(format!(
            "{} labels for {} nodes",
            labels.len(),
            graph.num_nodes()
        )));
    }
    let mut w = csv::Writer::from_writer(writer);
    for (&node_id, &label) in graph.original_ids().iter().zip(labels.as_slice()) {
        w.serialize(LabelRow { node_id, label })?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_labels_file(path: &Path, graph: &Graph, labels: &Labeling) -> Result<()> {
    write_labels(BufWriter::new(File::create(path)?), graph, labels)
}

/// Reads a `node_id,label` CSV into a map ordered by node id.
pub fn read_labels(path: &Path) -> Result<BTreeMap<u64, usize>> {
    let mut r = csv::Reader::from_reader(BufReader::new(File::open(path)?));
    let mut out = BTreeMap::new();
    for row in r.deserialize() {
        let row: LabelRow = row?;
        if out.insert(row.node_id, row.label).is_some() {
            return Err(Error::contract(format!(
                "{}: node {} listed twice",
                path.display(),
                row.node_id
            )));
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(out)
}

/// Scores an aggregated labeling file against a global one. Both files must
/// cover the same node ids.
pub fn similarity_from_files(global: &Path, aggregated: &Path) -> Result<SimilarityScore> {
    let g = read_labels(global)?;
    let a = read_labels(aggregated)?;
    if !g.keys().eq(a.keys()) {
        return Err(Error::contract("label files cover different node ids"));
    }
    cluster_similarity(
        &Labeling::new(g.into_values().collect()),
        &Labeling::new(a.into_values().collect()),
    )
}

/// Outcome of comparing a dataset's parsed size with expected counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub path: PathBuf,
    pub directed: bool,
    pub nodes: usize,
    /// Undirected edges after merging duplicates.
    pub edges: usize,
    /// Data lines read.
    pub arcs: usize,
    pub self_loops: usize,
    pub expected_nodes: usize,
    pub expected_edges: usize,
}

impl VerifyReport {
    /// Arcs when read as directed, undirected edges otherwise.
    pub fn observed_edges(&self) -> usize {
        if self.directed {
            self.arcs
        } else {
            self.edges
        }
    }

    pub fn passed(&self) -> bool {
        self.nodes == self.expected_nodes && self.observed_edges() == self.expected_edges
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let unit = if self.directed { "arcs" } else { "edges" };
        write!(
            f,
            "{}: nodes={} (expected {}), {unit}={} (expected {}), undirected edges={}, self-loops={}: {}",
            self.path.display(),
            self.nodes,
            self.expected_nodes,
            self.observed_edges(),
            self.expected_edges,
            self.edges,
            self.self_loops,
            if self.passed() { "PASS" } else { "FAIL" }
        )
    }
}

/// Parses `path` and compares node and edge counts with the expected values.
pub fn verify_dataset(
    path: &Path,
    directed: bool,
    expected_nodes: usize,
    expected_edges: usize,
) -> Result<VerifyReport> {
    let (_, report) = parse_edge_list(BufReader::new(File::open(path)?), directed)?;
    Ok(VerifyReport {
        path: path.to_path_buf(),
        directed,
        nodes: report.num_nodes,
        edges: report.num_edges,
        arcs: report.raw_pairs,
        self_loops: report.self_loops,
        expected_nodes,
        expected_edges,
    })
}

/// Writes one `client_<id>.txt` edge list per shard into `dir`.
pub fn partition_dump(graph: &Graph, plan: &PartitionPlan, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    distribute_with_plan(graph, plan)?
        .iter()
        .map(|shard| {
            let path = dir.join(format!("client_{}.txt", shard.client_id()));
            std::fs::write(&path, shard.to_edge_list(plan))?;
            Ok(path)
        })
        .collect()
}

/// Writes serializable rows as CSV or as JSON lines.
pub fn write_rows<W: Write, T: Serialize>(writer: W, rows: &[T], json: bool) -> Result<()> {
    if json {
        let mut w = BufWriter::new(writer);
        for row in rows {
            serde_json::to_writer(&mut w, row)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
    } else {
        let mut w = csv::Writer::from_writer(writer);
        for row in rows {
            w.serialize(row)?;
        }
        w.flush()?;
    }
    Ok(())
}

/// Writes rows to `path`, or to stdout when `path` is `None`.
pub fn write_rows_to<T: Serialize>(path: Option<&Path>, rows: &[T], json: bool) -> Result<()> {
    match path {
        Some(p) => write_rows(File::create(p)?, rows, json),
        None => write_rows(std::io::stdout().lock(), rows, json),
    }
}
