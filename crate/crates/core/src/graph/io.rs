use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{EdgeRecord, GraphError, IngestReport, KnowledgeGraph, NodeRecord, Result};

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| GraphError::Io {
            path: path.display().to_string(),
            source,
        })
}

fn read_jsonl<T: DeserializeOwned, R: BufRead>(reader: R, origin: &str) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| GraphError::Io {
            path: origin.to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| GraphError::Parse {
            path: origin.to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

/// Reads line-delimited node objects (`id`, `name`, `type`, optional `description`).
pub fn read_nodes<R: BufRead>(reader: R, origin: &str) -> Result<Vec<NodeRecord>> {
    read_jsonl(reader, origin)
}

/// Reads line-delimited edge objects (`src`, `dst`, `relation`).
pub fn read_edges<R: BufRead>(reader: R, origin: &str) -> Result<Vec<EdgeRecord>> {
    read_jsonl(reader, origin)
}

pub fn load_graph(nodes_path: &Path, edges_path: &Path) -> Result<(KnowledgeGraph, IngestReport)> {
    let nodes = read_nodes(open(nodes_path)?, &nodes_path.display().to_string())?;
    let edges = read_edges(open(edges_path)?, &edges_path.display().to_string())?;
    let (graph, report) = KnowledgeGraph::new(nodes, edges)?;
    if report.self_loops_dropped > 0 || report.duplicate_edges_dropped > 0 {
        log::warn!(
            "dropped {} self-loops and {} duplicate edges from {}",
            report.self_loops_dropped,
            report.duplicate_edges_dropped,
            edges_path.display()
        );
    }
    Ok((graph, report))
}

fn write_jsonl<T: Serialize, W: Write>(mut out: W, items: &[T]) -> std::io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn write_nodes<W: Write>(out: W, graph: &KnowledgeGraph) -> std::io::Result<()> {
    write_jsonl(out, graph.nodes())
}

pub fn write_edges<W: Write>(out: W, graph: &KnowledgeGraph) -> std::io::Result<()> {
    write_jsonl(out, graph.edges())
}
