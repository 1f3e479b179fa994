//! Question-specific subgraph construction: seed selection, single-hop or
//! frontier-pruned multi-hop expansion, then PCST plus a similarity merge.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{
    rank_order, similarities, top_k_similar, EmbeddingError, EmbeddingStore, QueryEmbedding,
};
use crate::graph::{EdgeRecord, GraphError, KnowledgeGraph, NodeId};
use crate::pcst::{solve_pcst, PcstError, PcstInstance};

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("invalid retrieval config: {0}")]
    InvalidConfig(String),
    #[error("candidate pool is empty")]
    EmptyPool,
    #[error("seed {0} is not in the candidate pool")]
    SeedOutsidePool(NodeId),
    #[error("no seeds given")]
    NoSeeds,
    #[error("subgraph record for {qid}: {message}")]
    BadRecord { qid: String, message: String },
    #[error("{origin}:{line}: {message}")]
    Parse {
        origin: String,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Pcst(#[from] PcstError),
}

pub type Result<T, E = RetrievalError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PrizeScheme {
    /// Rank `r` (1-based) among the top `m` gets `m - r + 1`.
    #[default]
    RankLinear,
    /// Raw query similarity, floored at 0.
    Similarity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalConfig {
    pub k_seeds: usize,
    /// Expansion rounds for multi-hop retrieval; single-hop always uses one.
    pub hops: usize,
    /// Per-node neighbor budget during multi-hop expansion. `usize::MAX`
    /// disables pruning.
    pub k_frontier: usize,
    pub prize_pool: usize,
    pub merge_pool: usize,
    pub edge_cost: f64,
    pub prize_scheme: PrizeScheme,
    pub prize_scale: f64,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            k_seeds: 4,
            hops: 3,
            k_frontier: 5,
            prize_pool: 100,
            merge_pool: 200,
            edge_cost: 1.0,
            prize_scheme: PrizeScheme::RankLinear,
            prize_scale: 1.0,
        }
    }
}

impl RetrievalConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("k_seeds", self.k_seeds),
            ("hops", self.hops),
            ("k_frontier", self.k_frontier),
            ("prize_pool", self.prize_pool),
            ("merge_pool", self.merge_pool),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(RetrievalError::InvalidConfig(format!(
                "{name} must be at least 1"
            )));
        }
        if !(self.edge_cost > 0.0 && self.edge_cost.is_finite()) {
            return Err(RetrievalError::InvalidConfig(
                "edge_cost must be positive".into(),
            ));
        }
        if !(self.prize_scale > 0.0 && self.prize_scale.is_finite()) {
            return Err(RetrievalError::InvalidConfig(
                "prize_scale must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrievalMode {
    SingleHop,
    MultiHop,
}

/// How a node entered the retrieved subgraph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Provenance {
    Seed,
    /// PCST solution only.
    Pcst,
    /// Similarity merge only.
    Merge,
    /// Both PCST and merge.
    Both,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievedSubgraph {
    pub graph: KnowledgeGraph,
    pub seeds: Vec<NodeId>,
    pub similarity: BTreeMap<NodeId, f64>,
    pub provenance: BTreeMap<NodeId, Provenance>,
}

/// Top `k_seeds` nodes of the whole graph by query similarity.
pub fn select_seeds(
    kg: &KnowledgeGraph,
    store: &EmbeddingStore,
    query: &QueryEmbedding,
    cfg: &RetrievalConfig,
) -> Result<Vec<NodeId>> {
    cfg.validate()?;
    let all: BTreeSet<NodeId> = kg.node_ids().collect();
    Ok(top_k_similar(store, query, cfg.k_seeds, Some(&all))?
        .into_iter()
        .map(|(id, _)| id)
        .collect())
}

pub fn expand_single_hop(kg: &KnowledgeGraph, seeds: &[NodeId]) -> Result<BTreeSet<NodeId>> {
    if seeds.is_empty() {
        return Err(RetrievalError::NoSeeds);
    }
    let mut pool = BTreeSet::new();
    for &s in seeds {
        pool.insert(s);
        pool.extend(kg.neighbors(s)?);
    }
    Ok(pool)
}

/// Frontier-pruned expansion for `cfg.hops` rounds.
///
/// Every node reached in a round nominates its `k_frontier` most
/// query-similar neighbors (ties by id), ranked over all of its neighbors;
/// nominees not yet included join the next frontier. The result is the set of
/// nodes within `hops` steps of a seed along "top-k neighbor" links, which is
/// independent of processing order and grows monotonically with `k_frontier`.
pub fn expand_multi_hop(
    kg: &KnowledgeGraph,
    store: &EmbeddingStore,
    query: &QueryEmbedding,
    seeds: &[NodeId],
    cfg: &RetrievalConfig,
) -> Result<BTreeSet<NodeId>> {
    cfg.validate()?;
    if seeds.is_empty() {
        return Err(RetrievalError::NoSeeds);
    }
    let mut sim_cache: HashMap<NodeId, f64> = HashMap::new();
    let mut included: BTreeSet<NodeId> = seeds.iter().copied().collect();
    for &s in seeds {
        if !kg.contains(s) {
            return Err(GraphError::UnknownNode(s).into());
        }
    }
    let mut frontier = included.clone();
    for _ in 0..cfg.hops {
        let mut next = BTreeSet::new();
        for &parent in &frontier {
            let mut ranked = Vec::new();
            for nb in kg.neighbors(parent)? {
                let sim = match sim_cache.get(&nb) {
                    Some(&s) => s,
                    None => {
                        let s = similarities(store, query, [nb].iter())?[0].1;
                        sim_cache.insert(nb, s);
                        s
                    }
                };
                ranked.push((nb, sim));
            }
            ranked.sort_by(rank_order);
            for (nb, _) in ranked.into_iter().take(cfg.k_frontier) {
                if included.insert(nb) {
                    next.insert(nb);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    Ok(included)
}

fn prizes_for(ranked: &[(NodeId, f64)], cfg: &RetrievalConfig) -> BTreeMap<NodeId, f64> {
    let m = cfg.prize_pool.min(ranked.len());
    ranked[..m]
        .iter()
        .enumerate()
        .map(|(r, &(id, sim))| {
            let raw = match cfg.prize_scheme {
                PrizeScheme::RankLinear => (m - r) as f64,
                PrizeScheme::Similarity => sim.max(0.0),
            };
            (id, raw * cfg.prize_scale)
        })
        .collect()
}

/// PCST over the pool's induced subgraph, merged with the `merge_pool` most
/// similar pool nodes; returns the KG-induced subgraph on the union.
pub fn pcst_merge(
    kg: &KnowledgeGraph,
    pool: &BTreeSet<NodeId>,
    store: &EmbeddingStore,
    query: &QueryEmbedding,
    seeds: &[NodeId],
    cfg: &RetrievalConfig,
) -> Result<RetrievedSubgraph> {
    cfg.validate()?;
    if pool.is_empty() {
        return Err(RetrievalError::EmptyPool);
    }
    if let Some(&s) = seeds.iter().find(|s| !pool.contains(s)) {
        return Err(RetrievalError::SeedOutsidePool(s));
    }
    let mut ranked = similarities(store, query, pool)?;
    let sim: BTreeMap<NodeId, f64> = ranked.iter().copied().collect();
    ranked.sort_by(rank_order);

    let pool_graph = kg.induced_subgraph(pool)?;
    let inst = PcstInstance::new(pool_graph, &prizes_for(&ranked, cfg), cfg.edge_cost)?;
    let tree = solve_pcst(&inst);
    let merged: BTreeSet<NodeId> = ranked
        .iter()
        .take(cfg.merge_pool)
        .map(|&(id, _)| id)
        .collect();

    let seed_set: BTreeSet<NodeId> = seeds.iter().copied().collect();
    let union: BTreeSet<NodeId> = seed_set
        .iter()
        .chain(&tree.nodes)
        .chain(&merged)
        .copied()
        .collect();
    let provenance = union
        .iter()
        .map(|&id| {
            let tag = if seed_set.contains(&id) {
                Provenance::Seed
            } else {
                match (tree.nodes.contains(&id), merged.contains(&id)) {
                    (true, true) => Provenance::Both,
                    (true, false) => Provenance::Pcst,
                    _ => Provenance::Merge,
                }
            };
            (id, tag)
        })
        .collect();
    Ok(RetrievedSubgraph {
        graph: kg.induced_subgraph(&union)?,
        seeds: seeds.to_vec(),
        similarity: union.iter().map(|id| (*id, sim[id])).collect(),
        provenance,
    })
}

pub fn retrieve(
    kg: &KnowledgeGraph,
    store: &EmbeddingStore,
    query: &QueryEmbedding,
    cfg: &RetrievalConfig,
    mode: RetrievalMode,
) -> Result<RetrievedSubgraph> {
    let seeds = select_seeds(kg, store, query, cfg)?;
    let pool = match mode {
        RetrievalMode::SingleHop => expand_single_hop(kg, &seeds)?,
        RetrievalMode::MultiHop => expand_multi_hop(kg, store, query, &seeds, cfg)?,
    };
    pcst_merge(kg, &pool, store, query, &seeds, cfg)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub qid: String,
    pub text: String,
}

/// Line-delimited `{"qid", "text"}` objects; blank lines skipped.
pub fn read_queries<R: BufRead>(reader: R, origin: &str) -> Result<Vec<Query>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| RetrievalError::Parse {
                origin: origin.to_string(),
                line: i + 1,
                message: e.to_string(),
            })?,
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgraphNodeRecord {
    pub id: NodeId,
    pub name: String,
    #[serde(rename = "type")]
    pub entity_type: String,
    pub similarity: f64,
    pub provenance: Provenance,
}

/// On-disk form of a [`RetrievedSubgraph`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgraphRecord {
    pub qid: String,
    pub nodes: Vec<SubgraphNodeRecord>,
    pub edges: Vec<EdgeRecord>,
    pub seeds: Vec<NodeId>,
}

impl RetrievedSubgraph {
    pub fn to_record(&self, qid: &str) -> SubgraphRecord {
        SubgraphRecord {
            qid: qid.to_string(),
            nodes: self
                .graph
                .nodes()
                .iter()
                .map(|n| SubgraphNodeRecord {
                    id: n.id,
                    name: n.name.clone(),
                    entity_type: n.entity_type.clone(),
                    similarity: self.similarity[&n.id],
                    provenance: self.provenance[&n.id],
                })
                .collect(),
            edges: self.graph.edges().to_vec(),
            seeds: self.seeds.clone(),
        }
    }

    /// Rebuilds a subgraph from its record, taking node descriptions from `kg`
    /// and rejecting edges the KG does not contain.
    pub fn from_record(record: &SubgraphRecord, kg: &KnowledgeGraph) -> Result<Self> {
        let bad = |message: String| RetrievalError::BadRecord {
            qid: record.qid.clone(),
            message,
        };
        let mut nodes = Vec::with_capacity(record.nodes.len());
        for n in &record.nodes {
            let full = kg
                .node(n.id)
                .ok_or_else(|| bad(format!("unknown node {}", n.id)))?;
            nodes.push(full.clone());
        }
        let known: BTreeSet<&EdgeRecord> = kg.edges().iter().collect();
        if let Some(e) = record.edges.iter().find(|e| !known.contains(e)) {
            return Err(bad(format!("edge {}-{} not in graph", e.src, e.dst)));
        }
        let (graph, _) = KnowledgeGraph::new(nodes, record.edges.clone())?;
        if let Some(s) = record.seeds.iter().find(|s| !graph.contains(**s)) {
            return Err(bad(format!("seed {s} not among nodes")));
        }
        Ok(Self {
            graph,
            seeds: record.seeds.clone(),
            similarity: record.nodes.iter().map(|n| (n.id, n.similarity)).collect(),
            provenance: record.nodes.iter().map(|n| (n.id, n.provenance)).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{bfs_distances, NodeRecord};
    use crate::synthetic;
    use proptest::prelude::*;

    fn graph(n: u64, edges: &[(u64, u64)]) -> KnowledgeGraph {
        let nodes = (0..n)
            .map(|id| NodeRecord {
                id,
                name: format!("node {id}"),
                entity_type: "entity".into(),
                description: format!("entity number {id} alpha{}", id % 3),
            })
            .collect();
        let edges = edges
            .iter()
            .map(|&(src, dst)| EdgeRecord {
                src,
                dst,
                relation: "linked".into(),
            })
            .collect();
        KnowledgeGraph::new(nodes, edges).unwrap().0
    }

    /// Store whose similarity to `q = e0` is exactly the given value per node.
    fn store_with_sims(sims: &[f64]) -> (EmbeddingStore, QueryEmbedding) {
        let mut store = EmbeddingStore::new(2).unwrap();
        for (id, &s) in sims.iter().enumerate() {
            store
                .insert(
                    id as u64,
                    vec![s as f32, (1.0 - s * s).max(0.0).sqrt() as f32],
                )
                .unwrap();
        }
        (
            store,
            QueryEmbedding {
                vector: vec![1.0, 0.0],
                source_text: "q".into(),
            },
        )
    }

    #[test]
    fn seeds_examples() {
        let kg = graph(3, &[(0, 1)]);
        let store = EmbeddingStore::hashed(&kg, 16).unwrap();
        let q = QueryEmbedding::hashed("entity", 16).unwrap();
        let mut seeds = select_seeds(&kg, &store, &q, &RetrievalConfig::default()).unwrap();
        seeds.sort();
        assert_eq!(seeds, vec![0, 1, 2]);

        let kg = graph(20, &[]);
        let store = EmbeddingStore::hashed(&kg, 64).unwrap();
        let q = QueryEmbedding::hashed(&kg.node(7).unwrap().description, 64).unwrap();
        assert_eq!(
            select_seeds(&kg, &store, &q, &RetrievalConfig::default()).unwrap()[0],
            7
        );
    }

    #[test]
    fn seeds_match_exhaustive_sort() {
        let kg = synthetic::knowledge_graph(50, 11);
        let store = EmbeddingStore::hashed(&kg, 32).unwrap();
        let q = QueryEmbedding::hashed("kinase inhibitor tablet", 32).unwrap();
        let mut all: Vec<(NodeId, f64)> = kg
            .nodes()
            .iter()
            .map(|n| {
                let v: Vec<f64> = store.get(n.id).unwrap().iter().map(|&x| x as f64).collect();
                let dot: f64 = v.iter().zip(&q.vector).map(|(a, b)| a * b).sum();
                let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                (n.id, dot / nv)
            })
            .collect();
        all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        let want: Vec<NodeId> = all[..4].iter().map(|p| p.0).collect();
        assert_eq!(
            select_seeds(&kg, &store, &q, &RetrievalConfig::default()).unwrap(),
            want
        );
    }

    #[test]
    fn single_hop_examples() {
        let p = graph(4, &[(0, 1), (1, 2), (2, 3)]);
        assert_eq!(expand_single_hop(&p, &[0]).unwrap(), BTreeSet::from([0, 1]));
        assert_eq!(
            expand_single_hop(&p, &[0, 3]).unwrap(),
            BTreeSet::from([0, 1, 2, 3])
        );
        let star = graph(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]);
        assert_eq!(expand_single_hop(&star, &[0]).unwrap().len(), 5);
        assert!(matches!(
            expand_single_hop(&p, &[]),
            Err(RetrievalError::NoSeeds)
        ));
    }

    #[test]
    fn one_hop_is_per_node_top_k() {
        // seed 0 with neighbors 1..=6, similarities descending with id
        let kg = graph(7, &[(0, 1), (0, 2), (0, 3), (0, 4), (0, 5), (0, 6)]);
        let (store, q) = store_with_sims(&[0.1, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4]);
        let cfg = RetrievalConfig {
            hops: 1,
            k_frontier: 2,
            ..Default::default()
        };
        assert_eq!(
            expand_multi_hop(&kg, &store, &q, &[0], &cfg).unwrap(),
            BTreeSet::from([0, 1, 2])
        );
    }

    #[test]
    fn unpruned_equals_hop_ball() {
        let kg = synthetic::knowledge_graph(60, 4);
        let store = EmbeddingStore::hashed(&kg, 16).unwrap();
        let q = QueryEmbedding::hashed("protein", 16).unwrap();
        let cfg = RetrievalConfig {
            hops: 2,
            k_frontier: kg.max_degree(),
            ..Default::default()
        };
        let got = expand_multi_hop(&kg, &store, &q, &[3, 10], &cfg).unwrap();
        let (a, b) = (
            bfs_distances(&kg, 3).unwrap(),
            bfs_distances(&kg, 10).unwrap(),
        );
        let ball: BTreeSet<NodeId> = kg
            .node_ids()
            .filter(|&id| {
                [&a, &b]
                    .iter()
                    .any(|t| t.distance(&kg, id).is_some_and(|d| d <= 2))
            })
            .collect();
        assert_eq!(got, ball);
    }

    /// Independent breadth-limited reference: depth-first walk over the
    /// "top-k neighbor" relation with a depth budget, keeping the best depth.
    fn reference_expansion(
        kg: &KnowledgeGraph,
        sims: &BTreeMap<NodeId, f64>,
        seeds: &[NodeId],
        k: usize,
        hops: usize,
    ) -> BTreeSet<NodeId> {
        fn walk(
            kg: &KnowledgeGraph,
            sims: &BTreeMap<NodeId, f64>,
            v: NodeId,
            left: usize,
            k: usize,
            best: &mut BTreeMap<NodeId, usize>,
        ) {
            if best.get(&v).is_some_and(|&b| b >= left) {
                return;
            }
            best.insert(v, left);
            if left == 0 {
                return;
            }
            let mut nbs: Vec<NodeId> = kg.neighbors(v).unwrap().collect();
            nbs.sort_by(|a, b| sims[b].partial_cmp(&sims[a]).unwrap().then(a.cmp(b)));
            for w in nbs.into_iter().take(k) {
                walk(kg, sims, w, left - 1, k, best);
            }
        }
        let mut best = BTreeMap::new();
        for &s in seeds {
            walk(kg, sims, s, hops, k, &mut best);
        }
        best.into_keys().collect()
    }

    #[test]
    fn planted_chain_kept_and_noise_truncated() {
        // seed 0 -> chain 1 -> 2 -> 3 of high similarity; 0 and 1 each carry
        // four low-similarity leaves, more than k_frontier = 2 allows.
        let edges = [
            (0, 1),
            (1, 2),
            (2, 3),
            (0, 4),
            (0, 5),
            (0, 6),
            (0, 7),
            (1, 8),
            (1, 9),
            (1, 10),
            (1, 11),
            (2, 12),
            (3, 13),
            (13, 14),
        ];
        let kg = graph(15, &edges);
        let mut sims = vec![0.5, 0.95, 0.93, 0.91];
        sims.extend([
            0.30, 0.20, 0.10, 0.05, 0.31, 0.21, 0.11, 0.06, 0.4, 0.35, 0.3,
        ]);
        let (store, q) = store_with_sims(&sims);
        let cfg = RetrievalConfig {
            hops: 3,
            k_frontier: 2,
            ..Default::default()
        };
        let got = expand_multi_hop(&kg, &store, &q, &[0], &cfg).unwrap();
        for chain in [0, 1, 2, 3] {
            assert!(got.contains(&chain));
        }
        assert!(!got.contains(&6) && !got.contains(&7) && !got.contains(&10));
        let sim_map: BTreeMap<NodeId, f64> =
            similarities(&store, &q, &kg.node_ids().collect::<Vec<_>>())
                .unwrap()
                .into_iter()
                .collect();
        assert_eq!(got, reference_expansion(&kg, &sim_map, &[0], 2, 3));
    }

    #[test]
    fn budget_counterexample_stays_monotone() {
        // Under a "rank only not-yet-included neighbors" rule this graph puts
        // node 11 in the k=3 result but not the k=5 one.
        // S=0; A=1 B=2 C=3 D=4 P=5; Z1..Z5=6..10; Y=11
        let edges = [
            (0, 1),
            (0, 2),
            (0, 3),
            (0, 4),
            (0, 5),
            (1, 5),
            (5, 6),
            (5, 7),
            (5, 8),
            (5, 9),
            (5, 10),
            (5, 11),
            (2, 6),
            (2, 7),
            (2, 8),
            (3, 9),
            (3, 10),
        ];
        let kg = graph(12, &edges);
        let sims = [
            0.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.95, 0.95, 0.95, 0.95, 0.95, 0.4,
        ];
        let (store, q) = store_with_sims(&sims);
        let run = |k| {
            let cfg = RetrievalConfig {
                hops: 3,
                k_frontier: k,
                ..Default::default()
            };
            expand_multi_hop(&kg, &store, &q, &[0], &cfg).unwrap()
        };
        assert!(run(3).is_subset(&run(5)));
    }

    #[test]
    fn merge_keeps_bridging_pcst_node() {
        // a=0, b=1, c=2 on a path; a and c similar, b not.
        let kg = graph(3, &[(0, 1), (1, 2)]);
        let (store, q) = store_with_sims(&[0.9, 0.0, 0.8]);
        let cfg = RetrievalConfig {
            prize_pool: 2,
            merge_pool: 2,
            prize_scale: 3.0,
            ..Default::default()
        };
        let pool = BTreeSet::from([0, 1, 2]);
        let sub = pcst_merge(&kg, &pool, &store, &q, &[0], &cfg).unwrap();
        assert_eq!(sub.graph.node_count(), 3);
        assert_eq!(sub.graph.edge_count(), 2);
        assert_eq!(sub.provenance[&0], Provenance::Seed);
        assert_eq!(sub.provenance[&1], Provenance::Pcst);
        assert_eq!(sub.provenance[&2], Provenance::Both);

        // expensive edges: PCST keeps only node 0, merge adds 2, b is dropped
        let cfg = RetrievalConfig {
            edge_cost: 100.0,
            ..cfg
        };
        let sub = pcst_merge(&kg, &pool, &store, &q, &[0], &cfg).unwrap();
        assert_eq!(sub.graph.node_ids().collect::<Vec<_>>(), vec![0, 2]);
        assert_eq!(sub.provenance[&2], Provenance::Merge);
    }

    #[test]
    fn merge_dominates_when_pool_small() {
        let kg = synthetic::knowledge_graph(40, 2);
        let store = EmbeddingStore::hashed(&kg, 16).unwrap();
        let q = QueryEmbedding::hashed("disease", 16).unwrap();
        let pool: BTreeSet<NodeId> = (0..15).collect();
        let sub = pcst_merge(&kg, &pool, &store, &q, &[0], &RetrievalConfig::default()).unwrap();
        assert_eq!(sub.graph, kg.induced_subgraph(&pool).unwrap());
    }

    #[test]
    fn config_and_pool_errors() {
        let kg = graph(3, &[(0, 1)]);
        let (store, q) = store_with_sims(&[0.5, 0.5, 0.5]);
        let cfg = RetrievalConfig {
            prize_pool: 0,
            ..Default::default()
        };
        assert!(matches!(
            pcst_merge(&kg, &BTreeSet::from([0]), &store, &q, &[0], &cfg),
            Err(RetrievalError::InvalidConfig(_))
        ));
        let cfg = RetrievalConfig::default();
        assert!(matches!(
            pcst_merge(&kg, &BTreeSet::new(), &store, &q, &[], &cfg),
            Err(RetrievalError::EmptyPool)
        ));
        assert!(matches!(
            pcst_merge(&kg, &BTreeSet::from([1]), &store, &q, &[0], &cfg),
            Err(RetrievalError::SeedOutsidePool(0))
        ));
    }

    #[test]
    fn multi_with_one_unpruned_hop_equals_single() {
        let kg = synthetic::knowledge_graph(120, 9);
        let store = EmbeddingStore::hashed(&kg, 32).unwrap();
        for text in ["kinase", "tablet medication", "pathway signalling"] {
            let q = QueryEmbedding::hashed(text, 32).unwrap();
            let cfg = RetrievalConfig {
                hops: 1,
                k_frontier: usize::MAX,
                ..Default::default()
            };
            let single = retrieve(&kg, &store, &q, &cfg, RetrievalMode::SingleHop).unwrap();
            let multi = retrieve(&kg, &store, &q, &cfg, RetrievalMode::MultiHop).unwrap();
            assert_eq!(single, multi);
        }
    }

    #[test]
    fn record_roundtrip() {
        let kg = synthetic::knowledge_graph(80, 5);
        let store = EmbeddingStore::hashed(&kg, 16).unwrap();
        let q = QueryEmbedding::hashed("gene", 16).unwrap();
        let sub = retrieve(
            &kg,
            &store,
            &q,
            &RetrievalConfig::default(),
            RetrievalMode::MultiHop,
        )
        .unwrap();
        let json = serde_json::to_string(&sub.to_record("q1")).unwrap();
        let back: SubgraphRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(RetrievedSubgraph::from_record(&back, &kg).unwrap(), sub);

        let mut forged = back.clone();
        forged.edges.push(EdgeRecord {
            src: 0,
            dst: 1,
            relation: "invented".into(),
        });
        assert!(RetrievedSubgraph::from_record(&forged, &kg).is_err());
    }

    #[test]
    fn queries_parse() {
        let text = "{\"qid\":\"q1\",\"text\":\"MAPK1 drugs\"}\n\n{\"qid\":\"q2\",\"text\":\"x\"}\n";
        let qs = read_queries(text.as_bytes(), "queries").unwrap();
        assert_eq!(qs.len(), 2);
        assert!(matches!(
            read_queries("{\"qid\":1}".as_bytes(), "queries"),
            Err(RetrievalError::Parse { line: 1, .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn frontier_monotone_and_subgraph_consistent(seed in 0u64..500, a in 1usize..5, extra in 0usize..4) {
            let kg = synthetic::knowledge_graph(60, seed);
            let store = EmbeddingStore::hashed(&kg, 16).unwrap();
            let q = QueryEmbedding::hashed(&format!("query {seed} kinase"), 16).unwrap();
            let seeds = select_seeds(&kg, &store, &q, &RetrievalConfig::default()).unwrap();
            let run = |k| {
                let cfg = RetrievalConfig { hops: 3, k_frontier: k, ..Default::default() };
                expand_multi_hop(&kg, &store, &q, &seeds, &cfg).unwrap()
            };
            prop_assert!(run(a).is_subset(&run(a + extra)));

            let cfg = RetrievalConfig { prize_pool: 10, merge_pool: 8, ..Default::default() };
            let sub = retrieve(&kg, &store, &q, &cfg, RetrievalMode::MultiHop).unwrap();
            for e in sub.graph.edges() {
                prop_assert!(kg.edges().contains(e));
            }
            for s in &sub.seeds {
                prop_assert_eq!(sub.provenance[s], Provenance::Seed);
            }
            prop_assert_eq!(sub.provenance.len(), sub.graph.node_count());
            prop_assert_eq!(sub.similarity.len(), sub.graph.node_count());
        }
    }
}
