//! Synthetic subgraphs where high-importance hubs touch only through
//! low-importance intermediaries.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::sort_scores;
use crate::graph::{EdgeRecord, KnowledgeGraph, NodeId, NodeRecord};

#[derive(Debug, Clone)]
pub struct HubBridgeInstance {
    pub graph: KnowledgeGraph,
    /// Ranked descending; hubs score in `[0.5, 1)`, everything else below 0.1.
    pub scores: Vec<(NodeId, f64)>,
    pub hubs: BTreeSet<NodeId>,
    pub intermediaries: BTreeSet<NodeId>,
}

impl HubBridgeInstance {
    pub fn k(&self) -> usize {
        self.hubs.len()
    }
}

/// 3 to 6 pairwise non-adjacent hubs joined along a random tree by chains of
/// one or two intermediaries, sometimes with a redundant extra chain, plus
/// low-score pendant nodes. Always connected.
pub fn hub_bridge_instance(seed: u64) -> HubBridgeInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p: NodeId = rng.gen_range(3..=6);
    let mut nodes: Vec<NodeRecord> = (0..p)
        .map(|id| NodeRecord {
            id,
            name: format!("hub-{id}"),
            entity_type: "hub".into(),
            description: format!("signal hub {id}"),
        })
        .collect();
    let mut edges = Vec::new();
    let mut intermediaries = BTreeSet::new();
    let link = |a: NodeId, b: NodeId, edges: &mut Vec<EdgeRecord>| {
        edges.push(EdgeRecord {
            src: a,
            dst: b,
            relation: "related_to".into(),
        })
    };
    let mut chain = |a: NodeId,
                     b: NodeId,
                     rng: &mut ChaCha8Rng,
                     nodes: &mut Vec<NodeRecord>,
                     edges: &mut Vec<EdgeRecord>| {
        let mut prev = a;
        for _ in 0..rng.gen_range(1..=2) {
            let id = nodes.len() as NodeId;
            nodes.push(NodeRecord {
                id,
                name: format!("bridge-{id}"),
                entity_type: "intermediary".into(),
                description: format!("noise link {id}"),
            });
            intermediaries.insert(id);
            link(prev, id, edges);
            prev = id;
        }
        link(prev, b, edges);
    };
    for h in 1..p {
        chain(rng.gen_range(0..h), h, &mut rng, &mut nodes, &mut edges);
    }
    if rng.gen_bool(0.5) {
        let a = rng.gen_range(0..p);
        let b = (a + rng.gen_range(1..p)) % p;
        chain(a, b, &mut rng, &mut nodes, &mut edges);
    }
    for _ in 0..rng.gen_range(5..=15) {
        let id = nodes.len() as NodeId;
        let anchor = rng.gen_range(0..id);
        nodes.push(NodeRecord {
            id,
            name: format!("leaf-{id}"),
            entity_type: "leaf".into(),
            description: format!("noise leaf {id}"),
        });
        link(anchor, id, &mut edges);
    }
    let hubs: BTreeSet<NodeId> = (0..p).collect();
    let mut scores: Vec<(NodeId, f64)> = nodes
        .iter()
        .map(|n| {
            let s = if hubs.contains(&n.id) {
                rng.gen_range(0.5..1.0)
            } else {
                rng.gen_range(0.0..0.1)
            };
            (n.id, s)
        })
        .collect();
    sort_scores(&mut scores);
    let graph = KnowledgeGraph::new(nodes, edges)
        .expect("generated graph is valid")
        .0;
    HubBridgeInstance {
        graph,
        scores,
        hubs,
        intermediaries,
    }
}
