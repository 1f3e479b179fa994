use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use graphaudit::embedding::{read_binary, read_text, EmbeddingStore};
use graphaudit::graph::{load_graph, KnowledgeGraph};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{io_error, json_error, CliError, Result};

pub const BUNDLE_MANIFEST: &str = "manifest.json";
pub const NODES_FILE: &str = "nodes.jsonl";
pub const EDGES_FILE: &str = "edges.jsonl";
pub const EMBEDDINGS_FILE: &str = "embeddings.txt";
pub const QUERIES_FILE: &str = "queries.jsonl";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Writes through a temporary file in the same directory, then renames it
/// into place. Returns the checksum of what was written.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<String> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(io_error(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_error(dir))?;
    tmp.write_all(bytes).map_err(io_error(path))?;
    tmp.as_file().sync_all().map_err(io_error(path))?;
    tmp.persist(path)
        .map_err(|e| CliError::Data(format!("{}: {}", path.display(), e.error)))?;
    Ok(sha256_hex(bytes))
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("serializable output");
    bytes.push(b'\n');
    bytes
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<String> {
    write_atomic(path, &to_json_bytes(value))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_error(path))?;
    serde_json::from_str(&text).map_err(json_error(path))
}

/// `*.json` files directly inside `dir`, by file name.
pub fn json_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_error(dir))? {
        let path = entry.map_err(io_error(dir))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "json") {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// Query ids become file names, so they are restricted to a safe alphabet.
pub fn check_qid(qid: &str) -> Result<()> {
    let ok = !qid.is_empty()
        && !qid.starts_with('.')
        && qid
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || "._-".contains(c));
    if ok {
        Ok(())
    } else {
        Err(CliError::Data(format!(
            "query id {qid:?} is not usable as a file name"
        )))
    }
}

pub struct Bundle {
    pub graph: KnowledgeGraph,
    pub store: EmbeddingStore,
}

#[derive(serde::Deserialize)]
struct BundleManifest {
    checksums: BTreeMap<String, String>,
}

/// Loads a `build` output directory after checking every file against the
/// manifest checksums.
pub fn load_bundle(dir: &Path) -> Result<Bundle> {
    let manifest: BundleManifest = read_json(&dir.join(BUNDLE_MANIFEST))?;
    for (name, want) in &manifest.checksums {
        let path = dir.join(name);
        let got = sha256_hex(&fs::read(&path).map_err(io_error(&path))?);
        if &got != want {
            return Err(CliError::Data(format!(
                "{}: checksum does not match the bundle manifest",
                path.display()
            )));
        }
    }
    let (graph, _) = load_graph(&dir.join(NODES_FILE), &dir.join(EDGES_FILE))?;
    let store = read_text(&dir.join(EMBEDDINGS_FILE))?;
    store.check_covers(&graph)?;
    Ok(Bundle { graph, store })
}

pub fn read_embeddings(path: &Path, index: Option<&Path>) -> Result<EmbeddingStore> {
    Ok(match index {
        Some(index) => read_binary(path, index)?,
        None => read_text(path)?,
    })
}
