use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use graphaudit::audit::{audit_query, build_context, importance_scores, AuditReport};
use graphaudit::embedding::{EmbeddingStore, QueryEmbedding};
use graphaudit::graph::{
    load_graph, write_edges, write_nodes, IngestReport, KnowledgeGraph, NodeId,
};
use graphaudit::mgnan::{
    encode, from_json, to_json, Attribution, AttributionRecord, GraphInput, Link, MGnanModel,
    Sample, Task,
};
use graphaudit::retrieval::{
    read_queries, retrieve as retrieve_one, Query, RetrievedSubgraph, SubgraphRecord,
};
use graphaudit::{embedding, synthetic};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::{io_error, CliError, Result};
use crate::fsio::{
    check_qid, json_files, load_bundle, read_embeddings, read_json, sha256_hex, write_atomic,
    write_json, BUNDLE_MANIFEST, EDGES_FILE, EMBEDDINGS_FILE, NODES_FILE, QUERIES_FILE,
};

const SYNTHETIC_DIM: usize = 64;

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    Ok(cfg.require(&cfg.paths.out, "out")?.to_path_buf())
}

/// Fills an unset input path with its default under the output directory.
fn default_under(slot: &mut Option<PathBuf>, out: &Path, name: &str) -> PathBuf {
    slot.get_or_insert_with(|| out.join(name)).clone()
}

/// Writes `<out>/<command>.manifest.json` and turns per-query failures into
/// a partial-failure error.
fn finish(
    out: &Path,
    command: &str,
    cfg: &RunConfig,
    results: Vec<(String, Result<Value>)>,
    extra: Value,
) -> Result<()> {
    let total = results.len();
    let mut done = Vec::new();
    let mut failures = Vec::new();
    for (qid, r) in results {
        match r {
            Ok(v) => done.push(v),
            Err(e) => failures.push((qid, e)),
        }
    }
    let mut manifest = json!({
        "command": command,
        "queries": done,
        "failures": failures
            .iter()
            .map(|(qid, e)| json!({ "qid": qid, "error": e.to_string() }))
            .collect::<Vec<_>>(),
        "config": cfg,
    });
    if let (Value::Object(m), Value::Object(e)) = (&mut manifest, extra) {
        m.extend(e);
    }
    write_json(&out.join(format!("{command}.manifest.json")), &manifest)?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Partial { total, failures })
    }
}

fn jsonl_bytes(write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Vec<u8> {
    let mut buf = Vec::new();
    write(&mut buf).expect("writing to memory");
    buf
}

pub fn build(cfg: &mut RunConfig) -> Result<()> {
    let out = out_dir(cfg)?;
    let (graph, ingest, store, queries): (
        KnowledgeGraph,
        IngestReport,
        EmbeddingStore,
        Option<Vec<Query>>,
    ) = match cfg.build.synthetic_nodes {
        Some(n) => {
            let graph = synthetic::knowledge_graph(n, cfg.seed);
            let store =
                EmbeddingStore::hashed(&graph, cfg.build.hash_dim.unwrap_or(SYNTHETIC_DIM))?;
            let queries = synthetic::queries(cfg.build.synthetic_queries, cfg.seed);
            (graph, IngestReport::default(), store, Some(queries))
        }
        None => {
            let nodes = cfg.require(&cfg.paths.nodes, "nodes")?;
            let edges = cfg.require(&cfg.paths.edges, "edges")?;
            let (graph, ingest) = load_graph(nodes, edges)?;
            let store = match cfg.build.hash_dim {
                Some(dim) => EmbeddingStore::hashed(&graph, dim)?,
                None => read_embeddings(
                    cfg.require(&cfg.paths.embeddings, "embeddings")?,
                    cfg.paths.embeddings_index.as_deref(),
                )?,
            };
            store.check_covers(&graph)?;
            (graph, ingest, store, None)
        }
    };
    let ids: Vec<NodeId> = graph.node_ids().collect();
    let store = store.subset(&ids);

    let mut files = vec![
        (NODES_FILE, jsonl_bytes(|b| write_nodes(b, &graph))),
        (EDGES_FILE, jsonl_bytes(|b| write_edges(b, &graph))),
        (
            EMBEDDINGS_FILE,
            jsonl_bytes(|b| embedding::write_text(b, &store)),
        ),
    ];
    if let Some(queries) = &queries {
        let mut bytes = Vec::new();
        for q in queries {
            bytes.extend(serde_json::to_vec(q).expect("serializable query"));
            bytes.push(b'\n');
        }
        files.push((QUERIES_FILE, bytes));
    }
    let mut checksums = BTreeMap::new();
    for (name, bytes) in &files {
        checksums.insert(name.to_string(), write_atomic(&out.join(name), bytes)?);
    }
    write_json(
        &out.join(BUNDLE_MANIFEST),
        &json!({
            "command": "build",
            "nodes": graph.node_count(),
            "edges": graph.edge_count(),
            "dim": store.dim(),
            "self_loops_dropped": ingest.self_loops_dropped,
            "duplicate_edges_dropped": ingest.duplicate_edges_dropped,
            "checksums": checksums,
            "config": cfg,
        }),
    )?;
    Ok(())
}

fn read_query_file(path: &Path) -> Result<Vec<Query>> {
    let file = File::open(path).map_err(io_error(path))?;
    let queries = read_queries(BufReader::new(file), &path.display().to_string())?;
    let mut seen = BTreeSet::new();
    if let Some(q) = queries.iter().find(|q| !seen.insert(q.qid.as_str())) {
        return Err(CliError::Data(format!(
            "{}: duplicate query id {:?}",
            path.display(),
            q.qid
        )));
    }
    Ok(queries)
}

pub fn retrieve(cfg: &mut RunConfig) -> Result<()> {
    let out = out_dir(cfg)?;
    let bundle = load_bundle(cfg.require(&cfg.paths.graph, "graph")?)?;
    let queries = read_query_file(cfg.require(&cfg.paths.queries, "queries")?)?;
    let dir = out.join("subgraphs");
    let results = queries
        .par_iter()
        .map(|q| {
            let r = (|| {
                check_qid(&q.qid)?;
                let query = QueryEmbedding::hashed(&q.text, bundle.store.dim())?;
                let sub = retrieve_one(
                    &bundle.graph,
                    &bundle.store,
                    &query,
                    &cfg.retrieval,
                    cfg.mode,
                )?;
                let rec = sub.to_record(&q.qid);
                let checksum = write_json(&dir.join(format!("{}.json", q.qid)), &rec)?;
                Ok(json!({
                    "qid": q.qid,
                    "nodes": rec.nodes.len(),
                    "edges": rec.edges.len(),
                    "checksum": checksum,
                }))
            })();
            (q.qid.clone(), r)
        })
        .collect();
    finish(&out, "retrieve", cfg, results, json!({}))
}

fn load_subgraph(dir: &Path, qid: &str, kg: &KnowledgeGraph) -> Result<RetrievedSubgraph> {
    let rec: SubgraphRecord = read_json(&dir.join(format!("{qid}.json")))?;
    if rec.qid != qid {
        return Err(CliError::Data(format!(
            "subgraph file for {qid} holds query {:?}",
            rec.qid
        )));
    }
    Ok(RetrievedSubgraph::from_record(&rec, kg)?)
}

#[derive(Deserialize)]
struct Label {
    qid: String,
    target: Vec<f64>,
}

fn read_labels(path: &Path) -> Result<Vec<Label>> {
    let text = std::fs::read_to_string(path).map_err(io_error(path))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| CliError::Data(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

pub fn train(cfg: &mut RunConfig) -> Result<()> {
    let out = out_dir(cfg)?;
    let subgraphs = default_under(&mut cfg.paths.subgraphs, &out, "subgraphs");
    let bundle = load_bundle(cfg.require(&cfg.paths.graph, "graph")?)?;
    let labels = read_labels(cfg.require(&cfg.paths.labels, "labels")?)?;
    if labels.is_empty() {
        return Err(CliError::Data("label file has no entries".into()));
    }
    let samples = labels
        .iter()
        .map(|l| {
            check_qid(&l.qid)?;
            let sub = load_subgraph(&subgraphs, &l.qid, &bundle.graph)?;
            Ok(Sample {
                input: GraphInput::from_subgraph(&sub, &bundle.store)?,
                target: l.target.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let model = MGnanModel::new(
        cfg.model.grouping(bundle.store.dim())?,
        &cfg.model.model_config(),
        cfg.seed,
    )
    .map_err(|e| CliError::Usage(e.to_string()))?;
    let task = match cfg.model.link {
        Link::Identity => Task::Regression,
        Link::Sigmoid | Link::Softmax => Task::Classification,
    };
    let fitted = graphaudit::mgnan::train(&model, &samples, task, &cfg.train)?;
    let checksum = write_atomic(&out.join("model.json"), to_json(&fitted.model)?.as_bytes())?;
    finish(
        &out,
        "train",
        cfg,
        Vec::new(),
        json!({
            "samples": samples.len(),
            "parameters": fitted.model.param_count(),
            "losses": fitted.losses,
            "final_loss": fitted.losses.last(),
            "checksums": { "model.json": checksum },
        }),
    )
}

/// Per-file work over a directory of `<qid>.json` records, in parallel.
fn per_record<T, F>(dir: &Path, work: F) -> Result<Vec<(String, Result<Value>)>>
where
    T: serde::de::DeserializeOwned + Send,
    F: Fn(&str, T) -> Result<Value> + Sync,
{
    let files = json_files(dir)?;
    if files.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no records found",
            dir.display()
        )));
    }
    Ok(files
        .par_iter()
        .map(|path| {
            let qid = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let r = read_json::<T>(path).and_then(|rec| work(&qid, rec));
            (qid, r)
        })
        .collect())
}

pub fn attribute(cfg: &mut RunConfig) -> Result<()> {
    let out = out_dir(cfg)?;
    let subgraphs = default_under(&mut cfg.paths.subgraphs, &out, "subgraphs");
    let model_path = default_under(&mut cfg.paths.model, &out, "model.json");
    let bundle = load_bundle(cfg.require(&cfg.paths.graph, "graph")?)?;
    let text = std::fs::read_to_string(&model_path).map_err(io_error(&model_path))?;
    let model =
        from_json(&text).map_err(|e| CliError::Data(format!("{}: {e}", model_path.display())))?;
    let dir = out.join("attributions");
    let results = per_record(&subgraphs, |qid, rec: SubgraphRecord| {
        check_qid(qid)?;
        if rec.qid != qid {
            return Err(CliError::Data(format!(
                "file {qid}.json holds query {:?}",
                rec.qid
            )));
        }
        let sub = RetrievedSubgraph::from_record(&rec, &bundle.graph)?;
        let att = encode(&model, &GraphInput::from_subgraph(&sub, &bundle.store)?)?.attribution;
        if att.pre_link_total.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Numeric(format!(
                "non-finite encoder output for {qid}"
            )));
        }
        let checksum = write_json(&dir.join(format!("{qid}.json")), &att.to_record(qid))?;
        Ok(json!({
            "qid": qid,
            "nodes": att.ids.len(),
            "pre_link_total": att.pre_link_total,
            "output": att.output,
            "checksum": checksum,
        }))
    })?;
    finish(
        &out,
        "attribute",
        cfg,
        results,
        json!({ "model_checksum": sha256_hex(text.as_bytes()) }),
    )
}

pub fn audit(cfg: &mut RunConfig) -> Result<()> {
    let out = out_dir(cfg)?;
    let subgraphs = default_under(&mut cfg.paths.subgraphs, &out, "subgraphs");
    let attributions = default_under(&mut cfg.paths.attributions, &out, "attributions");
    let bundle = load_bundle(cfg.require(&cfg.paths.graph, "graph")?)?;
    let (audits, contexts) = (out.join("audits"), out.join("contexts"));
    let results = per_record(&attributions, |qid, rec: AttributionRecord| {
        check_qid(qid)?;
        if rec.qid != qid {
            return Err(CliError::Data(format!(
                "file {qid}.json holds query {:?}",
                rec.qid
            )));
        }
        let att = Attribution::from_record(&rec)?;
        let sub = load_subgraph(&subgraphs, qid, &bundle.graph)?;
        let report = audit_query(qid, &sub.graph, &att, &cfg.audit)?;
        let scores = importance_scores(&att, cfg.audit.reduction)?;
        let context = build_context(&sub.graph, &scores, &cfg.context)?;
        let checksums = json!({
            "report": write_json(&audits.join(format!("{qid}.json")), &report)?,
            "importance_csv": write_atomic(&audits.join(format!("{qid}.importance.csv")), report.importance_csv()?.as_bytes())?,
            "structure_csv": write_atomic(&audits.join(format!("{qid}.structure.csv")), report.structure_csv()?.as_bytes())?,
            "context": write_atomic(&contexts.join(format!("{qid}.txt")), context.text.as_bytes())?,
        });
        Ok(json!({
            "qid": qid,
            "k": report.k,
            "notes": report.notes,
            "fragmentation_delta": report.fragmentation_delta,
            "bridges": report.bridges.len(),
            "checksums": checksums,
        }))
    })?;
    finish(&out, "audit", cfg, results, json!({}))
}

#[derive(Debug, Serialize)]
struct BridgeFrequency {
    id: NodeId,
    name: String,
    queries: usize,
    articulation: usize,
}

pub fn report(cfg: &mut RunConfig) -> Result<()> {
    let out = out_dir(cfg)?;
    let dir = default_under(&mut cfg.paths.audits, &out, "audits");
    let reports = json_files(&dir)?
        .iter()
        .map(|p| read_json::<AuditReport>(p))
        .collect::<Result<Vec<_>>>()?;
    if reports.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no audit reports found",
            dir.display()
        )));
    }
    let n = reports.len() as f64;
    let mean = |f: &dyn Fn(&AuditReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    let top_share: BTreeMap<usize, f64> = cfg
        .audit
        .share_ks
        .iter()
        .map(|&k| (k, mean(&|r| r.share_of_top(k))))
        .collect();

    let mut freq: BTreeMap<NodeId, BridgeFrequency> = BTreeMap::new();
    for r in &reports {
        for b in &r.bridges {
            let e = freq.entry(b.id).or_insert_with(|| BridgeFrequency {
                id: b.id,
                name: b.name.clone(),
                queries: 0,
                articulation: 0,
            });
            e.queries += 1;
            e.articulation += usize::from(b.articulation);
        }
    }
    let mut table: Vec<BridgeFrequency> = freq.into_values().collect();
    table.sort_by(|a, b| b.queries.cmp(&a.queries).then(a.id.cmp(&b.id)));

    let summary = json!({
        "queries": reports.len(),
        "qids": reports.iter().map(|r| r.qid.as_str()).collect::<Vec<_>>(),
        "mean_top_share": top_share,
        "mean_fragmentation_delta": mean(&|r| r.fragmentation_delta as f64),
        "mean_disconnect_fraction": mean(&|r| r.disconnect_fraction),
        "clamped_queries": reports.iter().filter(|r| r.k < r.k_requested).count(),
        "bridge_frequency": table,
    });
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(["id", "name", "queries", "articulation"])
        .map_err(|e| CliError::Data(e.to_string()))?;
    for row in &table {
        w.serialize(row)
            .map_err(|e| CliError::Data(e.to_string()))?;
    }
    let csv_bytes = w.into_inner().map_err(|e| CliError::Data(e.to_string()))?;
    let checksums = json!({
        "report.json": write_json(&out.join("report.json"), &summary)?,
        "bridge_frequency.csv": write_atomic(&out.join("bridge_frequency.csv"), &csv_bytes)?,
    });
    finish(
        &out,
        "report",
        cfg,
        Vec::new(),
        json!({ "checksums": checksums }),
    )
}
