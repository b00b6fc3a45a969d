//! Interaction, co-occurrence and bipartite networks built from a store.
//!
//! All builders threshold edges at `min_weight` and then drop nodes left
//! without edges, so a network's node set is exactly its edge endpoints.

mod build;
mod export;
mod metrics;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use build::{
    build_bipartite_network, build_cooccurrence_network, build_user_interaction_network, normalize_domain,
    normalize_entity, user_interaction_over_time, BipartiteRight, InteractionParams,
};
pub use export::{to_edge_list, to_json};
pub use metrics::{node_metrics, NodeMetrics};

use crate::store::StoreError;
use crate::timestamp::Timestamp;

#[derive(Debug, thiserror::Error)]
pub enum NetworkError {
    #[error("step must be positive")]
    NonPositiveStep,
    #[error("start {start} must precede end {end}")]
    EmptySpan { start: Timestamp, end: Timestamp },
    #[error("min_weight must be at least 1")]
    ZeroMinWeight,
    #[error("local clustering is undefined for bipartite networks")]
    Bipartite,
    #[error("node `{0}` appears on both sides of the bipartite network")]
    SideClash(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Number of underlying events.
    Count,
    /// 1 for every edge that survives thresholding on counts.
    Binary,
}

impl std::str::FromStr for Weighting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "count" => Ok(Weighting::Count),
            "binary" => Ok(Weighting::Binary),
            other => Err(format!("unknown weighting `{other}` (expected count or binary)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkMeta {
    pub node_count: u64,
    pub edge_count: u64,
    /// `interaction`, `cooccurrence` or `bipartite`.
    pub kind: String,
    pub params: BTreeMap<String, Value>,
    /// Events left out of the network, by reason.
    pub skipped: BTreeMap<String, u64>,
    /// First-seen original spelling of case-folded nodes.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub exemplars: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub directed: bool,
    /// `None` on unipartite networks.
    pub nodes: BTreeMap<String, Option<Side>>,
    /// Undirected edges are keyed with `u <= v`, bipartite ones as
    /// `(left, right)`.
    pub edges: BTreeMap<(String, String), u64>,
    pub meta: NetworkMeta,
}

impl Network {
    pub fn is_bipartite(&self) -> bool {
        self.nodes.values().any(Option::is_some)
    }

    pub fn total_weight(&self) -> u64 {
        self.edges.values().sum()
    }

    pub fn weight(&self, u: &str, v: &str) -> Option<u64> {
        let get = |a: &str, b: &str| self.edges.get(&(a.to_string(), b.to_string())).copied();
        if self.directed {
            get(u, v)
        } else {
            get(u, v).or_else(|| get(v, u))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkWindow {
    pub window_start: Timestamp,
    pub window_end: Timestamp,
    pub network: Network,
}
