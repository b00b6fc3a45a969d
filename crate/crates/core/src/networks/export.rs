use serde::Serialize;

use super::{Network, NetworkMeta, Side};

fn escape(field: &str) -> String {
    field.replace('\\', "\\\\").replace('\t', "\\t").replace('\n', "\\n").replace('\r', "\\r")
}

/// `source<TAB>target<TAB>weight` lines after a header, in edge key order.
pub fn to_edge_list(network: &Network) -> String {
    let mut out = String::from("source\ttarget\tweight\n");
    for ((u, v), w) in &network.edges {
        out.push_str(&format!("{}\t{}\t{}\n", escape(u), escape(v), w));
    }
    out
}

#[derive(Serialize)]
struct JsonNode<'a> {
    id: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    side: Option<Side>,
}

#[derive(Serialize)]
struct JsonEdge<'a> {
    source: &'a str,
    target: &'a str,
    weight: u64,
}

#[derive(Serialize)]
struct JsonNetwork<'a> {
    directed: bool,
    nodes: Vec<JsonNode<'a>>,
    edges: Vec<JsonEdge<'a>>,
    meta: &'a NetworkMeta,
}

/// Pretty-printed `{directed, nodes, edges, meta}` with a trailing newline.
pub fn to_json(network: &Network) -> String {
    let doc = JsonNetwork {
        directed: network.directed,
        nodes: network.nodes.iter().map(|(id, side)| JsonNode { id, side: *side }).collect(),
        edges: network
            .edges
            .iter()
            .map(|((u, v), w)| JsonEdge { source: u, target: v, weight: *w })
            .collect(),
        meta: &network.meta,
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("network serializes");
    s.push('\n');
    s
}
