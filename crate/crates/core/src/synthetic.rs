//! Seeded synthetic knowledge graphs and queries for fixtures and demos.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{EdgeRecord, KnowledgeGraph, NodeId, NodeRecord};
use crate::retrieval::Query;

const TYPES: [&str; 4] = ["drug", "gene/protein", "disease", "pathway"];

const VOCAB: [&str; 40] = [
    "kinase",
    "inhibitor",
    "tablet",
    "capsule",
    "receptor",
    "signalling",
    "mapk",
    "cascade",
    "protein",
    "enzyme",
    "binding",
    "tumour",
    "inflammation",
    "oral",
    "injection",
    "membrane",
    "transport",
    "metabolism",
    "cell",
    "growth",
    "factor",
    "immune",
    "response",
    "chronic",
    "acute",
    "liver",
    "cardiac",
    "neural",
    "agonist",
    "antagonist",
    "phosphorylation",
    "transcription",
    "apoptosis",
    "hormone",
    "lipid",
    "glucose",
    "vascular",
    "renal",
    "pulmonary",
    "dermal",
];

fn relation(a: &str, b: &str) -> &'static str {
    match (a, b) {
        ("drug", "gene/protein") => "targets",
        ("drug", "disease") => "indication",
        ("gene/protein", "pathway") => "participates_in",
        ("gene/protein", "gene/protein") => "interacts_with",
        ("disease", _) => "associated_with",
        _ => "related_to",
    }
}

/// Connected graph with ids `0..n`: a random recursive tree plus about `n/2`
/// extra edges. Descriptions are four vocabulary words plus the entity type.
pub fn knowledge_graph(n: usize, seed: u64) -> KnowledgeGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes: Vec<NodeRecord> = (0..n as NodeId)
        .map(|id| {
            let ty = TYPES[rng.gen_range(0..TYPES.len())];
            let words: Vec<&str> = VOCAB.choose_multiple(&mut rng, 4).copied().collect();
            NodeRecord {
                id,
                name: format!("{}-{id}", ty.split('/').next().unwrap().to_uppercase()),
                entity_type: ty.to_string(),
                description: format!("{} {}", words.join(" "), ty),
            }
        })
        .collect();
    let mut edges = Vec::new();
    let mut link = |a: usize, b: usize, rng: &mut ChaCha8Rng| {
        let (src, dst) = if rng.gen_bool(0.5) { (a, b) } else { (b, a) };
        edges.push(EdgeRecord {
            src: src as NodeId,
            dst: dst as NodeId,
            relation: relation(&nodes[src].entity_type, &nodes[dst].entity_type).to_string(),
        });
    };
    for v in 1..n {
        let u = rng.gen_range(0..v);
        link(u, v, &mut rng);
    }
    if n > 1 {
        for _ in 0..n / 2 {
            let a = rng.gen_range(0..n);
            let b = rng.gen_range(0..n);
            link(a, b, &mut rng);
        }
    }
    KnowledgeGraph::new(nodes, edges)
        .expect("generated graph is valid")
        .0
}

/// Queries of three vocabulary words each, ids `q0`, `q1`, ...
pub fn queries(count: usize, seed: u64) -> Vec<Query> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| Query {
            qid: format!("q{i}"),
            text: VOCAB
                .choose_multiple(&mut rng, 3)
                .copied()
                .collect::<Vec<_>>()
                .join(" "),
        })
        .collect()
}
