//! Auditable graph retrieval: PCST-merge subgraph retrieval over a knowledge
//! graph, an additive graph encoder whose output decomposes exactly over
//! nodes and feature groups, and audits built on that decomposition.

pub mod audit;
pub mod embedding;
pub mod graph;
pub mod mgnan;
pub mod pcst;
pub mod retrieval;
pub mod synthetic;
