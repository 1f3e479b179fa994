use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::structure::pruned_set;
use super::{
    detect_bridges, fragmentation_metrics, importance_scores, top_k, AuditError,
    ImportanceReduction, Result,
};
use crate::graph::{
    betweenness_centrality, component_labels, restricted_betweenness, KnowledgeGraph, NodeId,
};
use crate::mgnan::Attribution;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AuditConfig {
    /// Size of the high-importance set used for pruning and bridges.
    pub k: usize,
    /// Number of bridge candidates reported.
    pub bridges: usize,
    pub reduction: ImportanceReduction,
    /// Keep the neighbours of top-k nodes in the pruned subgraph.
    pub with_neighbours: bool,
    /// Cut-offs at which cumulative top-k shares are reported.
    pub share_ks: Vec<usize>,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            k: 25,
            bridges: 5,
            reduction: ImportanceReduction::default(),
            with_neighbours: false,
            share_ks: vec![1, 3, 5, 10, 25],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEntry {
    pub id: NodeId,
    pub name: String,
    pub score: f64,
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeEntry {
    pub id: NodeId,
    pub name: String,
    pub importance: f64,
    pub betweenness: f64,
    pub rank: usize,
    pub articulation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeAudit {
    pub id: NodeId,
    pub importance: f64,
    /// Betweenness restricted to paths between top-k nodes.
    pub betweenness: f64,
    pub global_betweenness: f64,
    pub component_full: usize,
    /// Component in the pruned subgraph; absent for pruned-away nodes.
    pub component_topk: Option<usize>,
    pub is_bridge: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub qid: String,
    pub k_requested: usize,
    pub k: usize,
    pub notes: Vec<String>,
    pub importance: Vec<ImportanceEntry>,
    pub top_share: BTreeMap<usize, f64>,
    pub components_full: usize,
    pub components_topk: usize,
    pub fragmentation_delta: i64,
    pub disconnect_fraction: f64,
    pub bridges: Vec<BridgeEntry>,
    pub nodes: Vec<NodeAudit>,
}

impl AuditReport {
    /// Cumulative share of the `k` highest-scoring nodes.
    pub fn share_of_top(&self, k: usize) -> f64 {
        self.importance.iter().take(k).map(|e| e.share).sum()
    }

    /// `rank,node_id,name,score,share`, ranks from 1.
    pub fn importance_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["rank", "node_id", "name", "score", "share"])?;
        for (i, e) in self.importance.iter().enumerate() {
            w.write_record([
                (i + 1).to_string(),
                e.id.to_string(),
                e.name.clone(),
                e.score.to_string(),
                e.share.to_string(),
            ])?;
        }
        finish(w)
    }

    /// `node_id,importance,betweenness,component_full,component_topk,is_bridge`
    /// by ascending id; `component_topk` is empty for pruned-away nodes.
    pub fn structure_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "node_id",
            "importance",
            "betweenness",
            "component_full",
            "component_topk",
            "is_bridge",
        ])?;
        for n in &self.nodes {
            w.write_record([
                n.id.to_string(),
                n.importance.to_string(),
                n.betweenness.to_string(),
                n.component_full.to_string(),
                n.component_topk.map(|c| c.to_string()).unwrap_or_default(),
                n.is_bridge.to_string(),
            ])?;
        }
        finish(w)
    }
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| AuditError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv of utf-8 fields"))
}

/// Normalised magnitudes; all zero when every score is zero.
pub(crate) fn shares(scores: &[(NodeId, f64)]) -> Vec<f64> {
    let total: f64 = scores.iter().map(|s| s.1.abs()).sum();
    scores
        .iter()
        .map(|s| if total > 0.0 { s.1.abs() / total } else { 0.0 })
        .collect()
}

pub fn audit_query(
    qid: &str,
    graph: &KnowledgeGraph,
    att: &Attribution,
    cfg: &AuditConfig,
) -> Result<AuditReport> {
    if cfg.k == 0 || cfg.bridges == 0 {
        return Err(AuditError::InvalidParameter(
            "audit k and bridge count must be at least 1".into(),
        ));
    }
    let scores = importance_scores(att, cfg.reduction)?;
    let n = graph.node_count();
    let mut notes = Vec::new();
    let k = if cfg.k > n {
        notes.push(format!("k = {} clamped to {n}, the subgraph size", cfg.k));
        n
    } else {
        cfg.k
    };

    let frag = fragmentation_metrics(graph, &scores, k, cfg.with_neighbours)?;
    let bridges = detect_bridges(graph, &scores, k, cfg.bridges)?;
    let share = shares(&scores);
    let importance: Vec<ImportanceEntry> = scores
        .iter()
        .zip(&share)
        .map(|(&(id, score), &share)| ImportanceEntry {
            id,
            name: graph.node(id).expect("scores checked").name.clone(),
            score,
            share,
        })
        .collect();
    let mut top_share = BTreeMap::new();
    for &c in &cfg.share_ks {
        let c = c.min(n);
        top_share.insert(c, share.iter().take(c).sum());
    }

    let top = top_k(&scores, k);
    let restricted = restricted_betweenness(graph, &top)?;
    let global = betweenness_centrality(graph);
    let full_labels = component_labels(graph);
    let pruned = graph.induced_subgraph(&pruned_set(graph, &top, cfg.with_neighbours))?;
    let pruned_labels = component_labels(&pruned);
    let score_of: BTreeMap<NodeId, f64> = scores.iter().copied().collect();
    let bridge_ids: BTreeSet<NodeId> = bridges.iter().map(|b| b.id).collect();
    let nodes = graph
        .node_ids()
        .enumerate()
        .map(|(i, id)| NodeAudit {
            id,
            importance: score_of[&id],
            betweenness: restricted[&id],
            global_betweenness: global[&id],
            component_full: full_labels[i],
            component_topk: pruned.index_of(id).map(|p| pruned_labels[p]),
            is_bridge: bridge_ids.contains(&id),
        })
        .collect();

    Ok(AuditReport {
        qid: qid.to_string(),
        k_requested: cfg.k,
        k,
        notes,
        importance,
        top_share,
        components_full: frag.components_full,
        components_topk: frag.components_topk,
        fragmentation_delta: frag.fragmentation_delta,
        disconnect_fraction: frag.disconnect_fraction,
        bridges: bridges
            .into_iter()
            .map(|b| BridgeEntry {
                name: graph.node(b.id).expect("bridge in graph").name.clone(),
                id: b.id,
                importance: b.importance,
                betweenness: b.betweenness,
                rank: b.rank,
                articulation: b.articulation,
            })
            .collect(),
        nodes,
    })
}
