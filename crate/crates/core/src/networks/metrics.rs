use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{Network, NetworkError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NodeMetrics {
    /// Distinct neighbors, ignoring direction.
    pub degree: u64,
    /// Sum of incident edge weights (in and out for directed networks).
    pub strength: u64,
    /// Closed triangles over possible ones on the undirected, unweighted
    /// projection; 0 below degree 2.
    pub local_clustering: f64,
}

pub fn node_metrics(network: &Network) -> Result<BTreeMap<String, NodeMetrics>, NetworkError> {
    if network.is_bipartite() {
        return Err(NetworkError::Bipartite);
    }
    let mut adj: BTreeMap<&str, BTreeSet<&str>> = network.nodes.keys().map(|n| (n.as_str(), BTreeSet::new())).collect();
    let mut strength: BTreeMap<&str, u64> = BTreeMap::new();
    for ((u, v), w) in &network.edges {
        *strength.entry(u).or_insert(0) += w;
        *strength.entry(v).or_insert(0) += w;
        if u != v {
            adj.entry(u).or_default().insert(v);
            adj.entry(v).or_default().insert(u);
        }
    }
    let mut out = BTreeMap::new();
    for (node, neighbors) in &adj {
        let k = neighbors.len() as u64;
        let local_clustering = if k < 2 {
            0.0
        } else {
            let nb: Vec<&str> = neighbors.iter().copied().collect();
            let mut links = 0u64;
            for (i, a) in nb.iter().enumerate() {
                let a_adj = &adj[a];
                links += nb[i + 1..].iter().filter(|b| a_adj.contains(*b)).count() as u64;
            }
            links as f64 / (k * (k - 1) / 2) as f64
        };
        out.insert(
            node.to_string(),
            NodeMetrics { degree: k, strength: strength.get(node).copied().unwrap_or(0), local_clustering },
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::networks::NetworkMeta;

    fn net(edges: &[(&str, &str, u64)]) -> Network {
        let mut nodes = BTreeMap::new();
        let mut map = BTreeMap::new();
        for (u, v, w) in edges {
            nodes.insert(u.to_string(), None);
            nodes.insert(v.to_string(), None);
            map.insert((u.to_string(), v.to_string()), *w);
        }
        Network {
            directed: false,
            meta: NetworkMeta {
                node_count: nodes.len() as u64,
                edge_count: map.len() as u64,
                kind: "test".into(),
                params: BTreeMap::new(),
                skipped: BTreeMap::new(),
                exemplars: BTreeMap::new(),
            },
            nodes,
            edges: map,
        }
    }

    #[test]
    fn triangle() {
        let m = node_metrics(&net(&[("a", "b", 1), ("a", "c", 2), ("b", "c", 3)])).unwrap();
        for (_, nm) in &m {
            assert_eq!(nm.degree, 2);
            assert_eq!(nm.local_clustering, 1.0);
        }
        assert_eq!(m["a"].strength, 3);
    }

    #[test]
    fn path() {
        let m = node_metrics(&net(&[("a", "b", 1), ("b", "c", 1)])).unwrap();
        assert_eq!(m["b"].degree, 2);
        assert_eq!(m["b"].local_clustering, 0.0);
        assert_eq!(m["a"].local_clustering, 0.0);
    }

    #[test]
    fn bipartite_rejected() {
        let mut n = net(&[("a", "#x", 1)]);
        n.nodes.insert("a".into(), Some(crate::networks::Side::Left));
        assert!(matches!(node_metrics(&n), Err(NetworkError::Bipartite)));
    }
}
