//! Evidence-routing audit: importance ranking, context linearization,
//! fragmentation under pruning and bridge-node detection.

mod context;
mod hub_bridge;
mod report;
mod structure;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphError, NodeId};
use crate::mgnan::Attribution;

pub use context::{build_context, Context, ContextConfig, ContextMode, IMPORTANT_MARKER};
pub use hub_bridge::{hub_bridge_instance, HubBridgeInstance};
pub use report::{audit_query, AuditConfig, AuditReport, BridgeEntry, ImportanceEntry, NodeAudit};
pub use structure::{
    detect_bridges, fragmentation_metrics, pair_disconnect_fraction, BridgeCandidate,
    FragmentationMetrics,
};

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("no importance score for node {0}")]
    MissingScore(NodeId),
    #[error("score given for node {0} outside the subgraph")]
    ExtraScore(NodeId),
    #[error("attribution is empty")]
    EmptyAttribution,
    #[error("invalid audit parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = AuditError> = std::result::Result<T, E>;

/// How a node's `(group, channel)` terms collapse to one importance score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportanceReduction {
    /// Sum over groups of `|channel 0|`.
    #[default]
    Channel0Abs,
    /// Sum over groups of the Euclidean norm over channels.
    ChannelNorm,
    /// Sum over groups of signed channel 0.
    Channel0Signed,
}

/// Per-node scores, descending, ties by ascending id.
pub fn importance_scores(
    att: &Attribution,
    reduction: ImportanceReduction,
) -> Result<Vec<(NodeId, f64)>> {
    if att.ids.is_empty() {
        return Err(AuditError::EmptyAttribution);
    }
    let mut scores: Vec<(NodeId, f64)> = att
        .ids
        .iter()
        .zip(&att.terms)
        .map(|(&id, groups)| {
            let s = groups
                .iter()
                .map(|v| match reduction {
                    ImportanceReduction::Channel0Abs => v[0].abs(),
                    ImportanceReduction::ChannelNorm => v.iter().map(|c| c * c).sum::<f64>().sqrt(),
                    ImportanceReduction::Channel0Signed => v[0],
                })
                .sum();
            (id, s)
        })
        .collect();
    sort_scores(&mut scores);
    Ok(scores)
}

pub(crate) fn sort_scores(scores: &mut [(NodeId, f64)]) {
    scores.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
}

/// The first `k` ids of a ranking (all of them when `k` exceeds its length).
pub fn top_k(ranked: &[(NodeId, f64)], k: usize) -> BTreeSet<NodeId> {
    ranked.iter().take(k).map(|&(id, _)| id).collect()
}
