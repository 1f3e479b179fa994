//! Synthetic supervision whose target depends only on a few planted nodes.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::decay::MonotoneDecay;
use super::encode::{node_weight, GraphInput};
use super::train::Sample;
use super::{ModelError, Result};
use crate::embedding::{hash_embedder, EmbeddingStore};
use crate::graph::{all_distances, EdgeRecord, KnowledgeGraph, NodeId, NodeRecord};

pub const PLANTED_DIM: usize = 64;
const FILLER_WORDS: usize = 48;
const REFERENCE_KNOTS: usize = 16;

#[derive(Debug, Clone)]
pub struct PlantedGraph {
    pub graph: KnowledgeGraph,
    pub store: EmbeddingStore,
    pub planted: BTreeSet<NodeId>,
    pub target: f64,
}

#[derive(Debug, Clone)]
pub struct PlantedTask {
    pub dim: usize,
    /// Fixed linear functional applied to each planted node's embedding.
    pub functional: Vec<f64>,
    pub graphs: Vec<PlantedGraph>,
}

impl PlantedTask {
    /// Recomputes a graph's target from its planted nodes alone.
    pub fn target_of(&self, graph: &PlantedGraph) -> Result<f64> {
        let tables = all_distances(&graph.graph);
        let rho = MonotoneDecay::linear(REFERENCE_KNOTS);
        let mut total = 0.0;
        for &id in &graph.planted {
            let ux: f64 = graph
                .store
                .vector(id)?
                .iter()
                .zip(&self.functional)
                .map(|(&x, u)| x as f64 * u)
                .sum();
            total += ux * node_weight(&graph.graph, &tables, id, &rho)?;
        }
        Ok(total)
    }

    pub fn samples(&self) -> Result<Vec<Sample>> {
        self.graphs
            .iter()
            .map(|g| {
                Ok(Sample {
                    input: GraphInput::new(&g.graph, &g.store)?,
                    target: vec![g.target],
                })
            })
            .collect()
    }
}

fn text_node(id: NodeId, planted: bool, rng: &mut ChaCha8Rng) -> NodeRecord {
    let a = rng.gen_range(0..FILLER_WORDS);
    let (lead, description) = if planted {
        let polarity = if rng.gen_bool(0.5) { "up" } else { "down" };
        ("signal", format!("signal {polarity} w{a}"))
    } else {
        (
            "noise",
            format!("noise w{a} w{}", rng.gen_range(0..FILLER_WORDS)),
        )
    };
    NodeRecord {
        id,
        name: format!("{lead}-{id}"),
        entity_type: lead.to_string(),
        description,
    }
}

/// `n_graphs` connected random graphs of `nodes` nodes with `p` planted nodes
/// each. Planted descriptions read `signal up|down <word>`, the rest
/// `noise <word> <word>`. The functional is `hash(up) - hash(down)` plus a
/// small random perturbation; the target sums it over planted embeddings,
/// each scaled by the node's weight under the linear initial decay.
pub fn make_planted_task(
    n_graphs: usize,
    nodes: usize,
    p: usize,
    seed: u64,
) -> Result<PlantedTask> {
    if p >= nodes {
        return Err(ModelError::Config(format!(
            "planted count {p} must be below node count {nodes}"
        )));
    }
    let dim = PLANTED_DIM;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let up = hash_embedder("up", dim)?;
    let down = hash_embedder("down", dim)?;
    let functional: Vec<f64> = up
        .iter()
        .zip(&down)
        .map(|(a, b)| a - b + rng.gen_range(-0.1..0.1))
        .collect();
    let mut task = PlantedTask {
        dim,
        functional,
        graphs: Vec::with_capacity(n_graphs),
    };
    for _ in 0..n_graphs {
        let planted: BTreeSet<NodeId> = sample(&mut rng, nodes, p)
            .into_iter()
            .map(|i| i as NodeId)
            .collect();
        let records: Vec<NodeRecord> = (0..nodes as NodeId)
            .map(|id| text_node(id, planted.contains(&id), &mut rng))
            .collect();
        let mut edges = Vec::new();
        for v in 1..nodes as NodeId {
            edges.push(EdgeRecord {
                src: rng.gen_range(0..v),
                dst: v,
                relation: "linked".into(),
            });
        }
        for _ in 0..nodes / 3 {
            edges.push(EdgeRecord {
                src: rng.gen_range(0..nodes as NodeId),
                dst: rng.gen_range(0..nodes as NodeId),
                relation: "linked".into(),
            });
        }
        let graph = KnowledgeGraph::new(records, edges)?.0;
        let store = EmbeddingStore::hashed(&graph, dim)?;
        let mut pg = PlantedGraph {
            graph,
            store,
            planted,
            target: 0.0,
        };
        pg.target = task.target_of(&pg)?;
        task.graphs.push(pg);
    }
    Ok(task)
}
