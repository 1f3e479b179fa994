//! Embedding file formats.
//!
//! Text: a header line `dim=<d> count=<n>` followed by `n` lines
//! `id<TAB>v1,v2,...,vd`.
//!
//! Binary: a blob of little-endian `f32` values plus a sidecar index with the
//! same header line followed by `n` lines `id<TAB>byte_offset`, where each
//! offset points at `d` consecutive floats in the blob.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::{EmbeddingError, EmbeddingStore, Result};
use crate::graph::NodeId;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EmbeddingError + '_ {
    move |source| EmbeddingError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> EmbeddingError {
    EmbeddingError::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn parse_header(path: &Path, line: &str) -> Result<(usize, usize)> {
    let mut dim = None;
    let mut count = None;
    for field in line.split_whitespace() {
        match field.split_once('=') {
            Some(("dim", v)) => dim = v.parse().ok(),
            Some(("count", v)) => count = v.parse().ok(),
            _ => {
                return Err(parse_err(
                    path,
                    1,
                    format!("unexpected header field {field:?}"),
                ))
            }
        }
    }
    match (dim, count) {
        (Some(d), Some(n)) if d > 0 => Ok((d, n)),
        _ => Err(parse_err(path, 1, "header must be `dim=<d> count=<n>`")),
    }
}

/// Non-blank lines with their 1-based line numbers.
fn numbered_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

fn split_row<'a>(path: &Path, line_no: usize, line: &'a str) -> Result<(NodeId, &'a str)> {
    let (id, rest) = line
        .split_once('\t')
        .ok_or_else(|| parse_err(path, line_no, "expected `id<TAB>...`"))?;
    let id = id
        .trim()
        .parse()
        .map_err(|_| parse_err(path, line_no, format!("bad node id {id:?}")))?;
    Ok((id, rest))
}

fn check_count(path: &Path, store: &EmbeddingStore, count: usize) -> Result<()> {
    if store.len() != count {
        return Err(parse_err(
            path,
            1,
            format!("header declares {count} vectors, found {}", store.len()),
        ));
    }
    Ok(())
}

pub fn read_text(path: &Path) -> Result<EmbeddingStore> {
    let lines = numbered_lines(path)?;
    let Some((_, header)) = lines.first() else {
        return Err(parse_err(path, 1, "empty embedding file"));
    };
    let (dim, count) = parse_header(path, header)?;
    let mut store = EmbeddingStore::new(dim)?;
    for (line_no, line) in &lines[1..] {
        let (id, values) = split_row(path, *line_no, line)?;
        let vector = values
            .split(',')
            .map(|v| v.trim().parse::<f32>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_err(path, *line_no, e.to_string()))?;
        store
            .insert(id, vector)
            .map_err(|e| parse_err(path, *line_no, e.to_string()))?;
    }
    check_count(path, &store, count)?;
    Ok(store)
}

pub fn write_text<W: Write>(mut out: W, store: &EmbeddingStore) -> std::io::Result<()> {
    writeln!(out, "dim={} count={}", store.dim(), store.len())?;
    for (id, v) in store.iter() {
        write!(out, "{id}\t")?;
        for (i, x) in v.iter().enumerate() {
            if i > 0 {
                out.write_all(b",")?;
            }
            write!(out, "{x}")?;
        }
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_binary(blob_path: &Path, index_path: &Path) -> Result<EmbeddingStore> {
    let blob = fs::read(blob_path).map_err(io_err(blob_path))?;
    let lines = numbered_lines(index_path)?;
    let Some((_, header)) = lines.first() else {
        return Err(parse_err(index_path, 1, "empty index file"));
    };
    let (dim, count) = parse_header(index_path, header)?;
    let width = dim * 4;
    let mut store = EmbeddingStore::new(dim)?;
    for (line_no, line) in &lines[1..] {
        let (id, offset) = split_row(index_path, *line_no, line)?;
        let offset: usize = offset
            .trim()
            .parse()
            .map_err(|_| parse_err(index_path, *line_no, format!("bad offset {offset:?}")))?;
        let bytes = blob
            .get(offset..offset + width)
            .ok_or_else(|| parse_err(index_path, *line_no, "offset past end of blob"))?;
        let vector = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        store
            .insert(id, vector)
            .map_err(|e| parse_err(index_path, *line_no, e.to_string()))?;
    }
    check_count(index_path, &store, count)?;
    Ok(store)
}

pub fn write_binary<B: Write, I: Write>(
    mut blob: B,
    mut index: I,
    store: &EmbeddingStore,
) -> std::io::Result<()> {
    writeln!(index, "dim={} count={}", store.dim(), store.len())?;
    let mut offset = 0usize;
    for (id, v) in store.iter() {
        writeln!(index, "{id}\t{offset}")?;
        for x in v {
            blob.write_all(&x.to_le_bytes())?;
        }
        offset += v.len() * 4;
    }
    blob.flush()?;
    index.flush()
}
