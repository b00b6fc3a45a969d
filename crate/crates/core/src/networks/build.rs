use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde_json::{json, Value};

use super::{Network, NetworkError, NetworkMeta, NetworkWindow, Side, Weighting};
use crate::store::{ActionRecord, ActionType, EntityType, Filter, Record, StoreHandle, Table};
use crate::timestamp::Timestamp;

type EdgeCounts = BTreeMap<(String, String), u64>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionParams {
    pub interaction: ActionType,
    /// Half-open `[start, end)` on action `created_at`.
    pub time_range: Option<(Timestamp, Timestamp)>,
    pub weighting: Weighting,
    pub min_weight: u64,
    pub directed: bool,
}

impl InteractionParams {
    pub fn new(interaction: ActionType) -> Self {
        InteractionParams { interaction, time_range: None, weighting: Weighting::Count, min_weight: 1, directed: true }
    }

    fn echo(&self) -> BTreeMap<String, Value> {
        let mut p = BTreeMap::new();
        p.insert("interaction".into(), json!(self.interaction.as_str()));
        p.insert("weighting".into(), json!(self.weighting));
        p.insert("min_weight".into(), json!(self.min_weight));
        p.insert("directed".into(), json!(self.directed));
        insert_range(&mut p, self.time_range);
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BipartiteRight {
    Entity(EntityType),
    /// Hosts of URL entities.
    Domain,
}

impl std::str::FromStr for BipartiteRight {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("domain") {
            Ok(BipartiteRight::Domain)
        } else {
            s.parse::<EntityType>().map(BipartiteRight::Entity)
        }
    }
}

impl std::fmt::Display for BipartiteRight {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BipartiteRight::Entity(t) => f.write_str(t.as_str()),
            BipartiteRight::Domain => f.write_str("DOMAIN"),
        }
    }
}

fn insert_range(p: &mut BTreeMap<String, Value>, range: Option<(Timestamp, Timestamp)>) {
    if let Some((start, end)) = range {
        p.insert("start".into(), json!(start.to_iso()));
        p.insert("end".into(), json!(end.to_iso()));
    }
}

fn check_range(range: Option<(Timestamp, Timestamp)>) -> Result<(), NetworkError> {
    match range {
        Some((start, end)) if start >= end => Err(NetworkError::EmptySpan { start, end }),
        _ => Ok(()),
    }
}

fn range_filter(range: Option<(Timestamp, Timestamp)>) -> Filter {
    match range {
        Some((start, end)) => Filter::all().range("created_at", start, end),
        None => Filter::all(),
    }
}

/// Node identity for entity bodies: hashtags, mentions and emails are
/// case-folded, URLs and media keys kept as-is.
pub fn normalize_entity(entity_type: EntityType, body: &str) -> String {
    match entity_type {
        EntityType::Hashtag | EntityType::Mention | EntityType::Email => body.to_lowercase(),
        EntityType::Url | EntityType::MediaKey => body.to_string(),
    }
}

/// Lowercased host of a URL without a leading `www.` and without port.
pub fn normalize_domain(url: &str) -> Option<String> {
    let parsed = url::Url::parse(url).ok()?;
    let host = parsed.host_str()?.trim_end_matches('.').to_lowercase();
    let host = host.strip_prefix("www.").map(str::to_string).unwrap_or(host);
    (!host.is_empty()).then_some(host)
}

fn post_authors(store: &StoreHandle) -> Result<HashMap<String, String>, NetworkError> {
    let mut out = HashMap::new();
    for row in store.query_rows(Table::Posts, &Filter::all())? {
        if let (Some(Value::String(post)), Some(Value::String(account))) = (row.get("post_id"), row.get("account_id")) {
            out.entry(post.clone()).or_insert_with(|| account.clone());
        }
    }
    Ok(out)
}

fn skip(skipped: &mut BTreeMap<String, u64>, reason: &str) {
    *skipped.entry(reason.to_string()).or_insert(0) += 1;
}

fn finalize(
    kind: &str,
    directed: bool,
    counts: EdgeCounts,
    sides: Option<&HashMap<String, Side>>,
    weighting: Weighting,
    min_weight: u64,
    params: BTreeMap<String, Value>,
    skipped: BTreeMap<String, u64>,
    exemplars: &HashMap<String, String>,
) -> Network {
    let edges: EdgeCounts = counts
        .into_iter()
        .filter(|(_, w)| *w >= min_weight)
        .map(|(k, w)| (k, if weighting == Weighting::Binary { 1 } else { w }))
        .collect();
    let mut nodes = BTreeMap::new();
    for (u, v) in edges.keys() {
        for n in [u, v] {
            nodes.entry(n.clone()).or_insert_with(|| sides.and_then(|s| s.get(n).copied()));
        }
    }
    let exemplars = nodes
        .keys()
        .filter_map(|n| exemplars.get(n).map(|e| (n.clone(), e.clone())))
        .collect();
    let meta = NetworkMeta {
        node_count: nodes.len() as u64,
        edge_count: edges.len() as u64,
        kind: kind.to_string(),
        params,
        skipped,
        exemplars,
    };
    Network { directed, nodes, edges, meta }
}

fn tally_interactions<'a>(
    actions: impl IntoIterator<Item = &'a ActionRecord>,
    authors: &HashMap<String, String>,
    directed: bool,
) -> (EdgeCounts, BTreeMap<String, u64>) {
    let mut counts = EdgeCounts::new();
    let mut skipped = BTreeMap::new();
    let resolve = |account: &Option<String>, post: &Option<String>| -> Option<String> {
        account.clone().or_else(|| post.as_ref().and_then(|p| authors.get(p).cloned()))
    };
    for a in actions {
        let Some(src) = resolve(&a.originator_account_id, &a.originator_post_id) else {
            skip(&mut skipped, "unresolved_originator");
            continue;
        };
        let Some(dst) = resolve(&a.target_account_id, &a.target_post_id) else {
            skip(&mut skipped, "unresolved_target");
            continue;
        };
        if src == dst {
            skip(&mut skipped, "self_loop");
            continue;
        }
        let key = if directed || src <= dst { (src, dst) } else { (dst, src) };
        *counts.entry(key).or_insert(0) += 1;
    }
    (counts, skipped)
}

fn load_actions(
    store: &StoreHandle,
    interaction: ActionType,
    range: Option<(Timestamp, Timestamp)>,
) -> Result<Vec<ActionRecord>, NetworkError> {
    let filter = range_filter(range).eq("action_type", interaction.as_str());
    Ok(store
        .query(Table::Actions, &filter)?
        .into_iter()
        .filter_map(|r| match r {
            Record::Action(a) => Some(a),
            _ => None,
        })
        .collect())
}

/// Accounts linked by actions of one type: `a -> b` counts actions
/// originated by `a` whose target resolves to `b`. A target is the
/// `target_account_id` when set, otherwise the author of `target_post_id`.
/// Unresolvable actions and self-loops are skipped and counted in meta.
pub fn build_user_interaction_network(store: &StoreHandle, params: &InteractionParams) -> Result<Network, NetworkError> {
    if params.min_weight == 0 {
        return Err(NetworkError::ZeroMinWeight);
    }
    check_range(params.time_range)?;
    let actions = load_actions(store, params.interaction, params.time_range)?;
    let authors = post_authors(store)?;
    let (counts, skipped) = tally_interactions(&actions, &authors, params.directed);
    Ok(finalize(
        "interaction",
        params.directed,
        counts,
        None,
        params.weighting,
        params.min_weight,
        params.echo(),
        skipped,
        &HashMap::new(),
    ))
}

/// One interaction network per half-open window `[start + k*step, ...)`. The
/// last window is cut at `end` when the span is not a multiple of `step`.
pub fn user_interaction_over_time(
    store: &StoreHandle,
    params: &InteractionParams,
    start: Timestamp,
    end: Timestamp,
    step: chrono::Duration,
) -> Result<Vec<NetworkWindow>, NetworkError> {
    if step <= chrono::Duration::zero() {
        return Err(NetworkError::NonPositiveStep);
    }
    if params.min_weight == 0 {
        return Err(NetworkError::ZeroMinWeight);
    }
    check_range(Some((start, end)))?;
    let actions = load_actions(store, params.interaction, Some((start, end)))?;
    let authors = post_authors(store)?;

    let mut windows = Vec::new();
    let mut window_start = start;
    while window_start < end {
        let window_end = match window_start.checked_add(step) {
            Some(t) if t < end => t,
            _ => end,
        };
        let in_window = actions.iter().filter(|a| a.created_at >= window_start && a.created_at < window_end);
        let (counts, skipped) = tally_interactions(in_window, &authors, params.directed);
        let mut window_params = params.clone();
        window_params.time_range = Some((window_start, window_end));
        let mut echo = window_params.echo();
        echo.insert("step_seconds".into(), json!(step.num_seconds()));
        let network = finalize(
            "interaction",
            params.directed,
            counts,
            None,
            params.weighting,
            params.min_weight,
            echo,
            skipped,
            &HashMap::new(),
        );
        windows.push(NetworkWindow { window_start, window_end, network });
        window_start = window_end;
    }
    Ok(windows)
}

fn load_entities(
    store: &StoreHandle,
    entity_type: EntityType,
    range: Option<(Timestamp, Timestamp)>,
) -> Result<Vec<(String, String)>, NetworkError> {
    let filter = range_filter(range).eq("entity_type", entity_type.as_str());
    Ok(store
        .query(Table::Entities, &filter)?
        .into_iter()
        .filter_map(|r| match r {
            Record::Entity(e) => Some((e.post_id, e.body)),
            _ => None,
        })
        .collect())
}

/// Undirected network of entities appearing in the same post. Each post adds
/// 1 to every pair of distinct normalized entities it contains.
pub fn build_cooccurrence_network(
    store: &StoreHandle,
    entity_type: EntityType,
    time_range: Option<(Timestamp, Timestamp)>,
    min_weight: u64,
) -> Result<Network, NetworkError> {
    if min_weight == 0 {
        return Err(NetworkError::ZeroMinWeight);
    }
    check_range(time_range)?;
    let mut per_post: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut exemplars = HashMap::new();
    for (post_id, body) in load_entities(store, entity_type, time_range)? {
        let node = normalize_entity(entity_type, &body);
        if node != body {
            exemplars.entry(node.clone()).or_insert(body);
        }
        per_post.entry(post_id).or_default().insert(node);
    }
    let mut counts = EdgeCounts::new();
    for nodes in per_post.values() {
        let nodes: Vec<&String> = nodes.iter().collect();
        for (i, u) in nodes.iter().enumerate() {
            for v in &nodes[i + 1..] {
                *counts.entry(((*u).clone(), (*v).clone())).or_insert(0) += 1;
            }
        }
    }
    let mut params = BTreeMap::new();
    params.insert("entity_type".into(), json!(entity_type.as_str()));
    params.insert("min_weight".into(), json!(min_weight));
    insert_range(&mut params, time_range);
    Ok(finalize(
        "cooccurrence",
        false,
        counts,
        None,
        Weighting::Count,
        min_weight,
        params,
        BTreeMap::new(),
        &exemplars,
    ))
}

/// Accounts (LEFT) linked to features of their posts (RIGHT). The weight is
/// the number of the account's posts containing the feature.
pub fn build_bipartite_network(
    store: &StoreHandle,
    right: BipartiteRight,
    time_range: Option<(Timestamp, Timestamp)>,
    min_weight: u64,
) -> Result<Network, NetworkError> {
    if min_weight == 0 {
        return Err(NetworkError::ZeroMinWeight);
    }
    check_range(time_range)?;
    let entity_type = match right {
        BipartiteRight::Entity(t) => t,
        BipartiteRight::Domain => EntityType::Url,
    };
    let authors = post_authors(store)?;
    let mut skipped = BTreeMap::new();
    let mut exemplars = HashMap::new();
    let mut pairs: BTreeSet<(String, String, String)> = BTreeSet::new();
    for (post_id, body) in load_entities(store, entity_type, time_range)? {
        let feature = match right {
            BipartiteRight::Domain => match normalize_domain(&body) {
                Some(d) => d,
                None => {
                    skip(&mut skipped, "malformed_url");
                    continue;
                }
            },
            BipartiteRight::Entity(t) => {
                let node = normalize_entity(t, &body);
                if node != body {
                    exemplars.entry(node.clone()).or_insert(body);
                }
                node
            }
        };
        let Some(account) = authors.get(&post_id) else {
            skip(&mut skipped, "orphan_entity");
            continue;
        };
        pairs.insert((post_id, account.clone(), feature));
    }

    let mut sides = HashMap::new();
    let mut counts = EdgeCounts::new();
    for (_, account, feature) in pairs {
        for (node, side) in [(&account, Side::Left), (&feature, Side::Right)] {
            if *sides.entry(node.clone()).or_insert(side) != side {
                return Err(NetworkError::SideClash(node.clone()));
            }
        }
        *counts.entry((account, feature)).or_insert(0) += 1;
    }
    let mut params = BTreeMap::new();
    params.insert("left".into(), json!("ACCOUNT"));
    params.insert("right".into(), json!(right.to_string()));
    params.insert("min_weight".into(), json!(min_weight));
    insert_range(&mut params, time_range);
    Ok(finalize(
        "bipartite",
        false,
        counts,
        Some(&sides),
        Weighting::Count,
        min_weight,
        params,
        skipped,
        &exemplars,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{EntityRecord, PostRecord};

    fn t(h: u32, m: u32) -> Timestamp {
        Timestamp::ymd_hms(2023, 5, 14, h, m, 0)
    }

    fn share(src: &str, dst: &str, at: Timestamp) -> Record {
        ActionRecord {
            originator_account_id: Some(src.into()),
            originator_post_id: None,
            target_account_id: Some(dst.into()),
            target_post_id: Some(format!("{dst}-post")),
            action_type: ActionType::Share,
            created_at: at,
            retrieved_at: t(23, 0),
        }
        .into()
    }

    fn store(dir: &tempfile::TempDir, records: &[Record]) -> StoreHandle {
        let s = crate::init_store(dir.path().join("n").to_str().unwrap(), true).unwrap();
        s.insert_batch(records).unwrap();
        s
    }

    #[test]
    fn count_threshold_and_binary() {
        let dir = tempfile::tempdir().unwrap();
        let s = store(
            &dir,
            &[share("a", "b", t(0, 1)), share("a", "b", t(0, 2)), share("a", "b", t(0, 3)), share("a", "c", t(0, 4))],
        );
        let mut p = InteractionParams::new(ActionType::Share);
        p.min_weight = 3;
        let net = build_user_interaction_network(&s, &p).unwrap();
        assert_eq!(net.edges.len(), 1);
        assert_eq!(net.weight("a", "b"), Some(3));
        assert_eq!(net.meta.node_count, 2);

        p.min_weight = 1;
        p.weighting = Weighting::Binary;
        let net = build_user_interaction_network(&s, &p).unwrap();
        assert_eq!(net.weight("a", "b"), Some(1));
        assert_eq!(net.weight("a", "c"), Some(1));
    }

    #[test]
    fn target_resolved_through_post_author_and_self_loops_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let post: Record = PostRecord::new("p1", "b", "x", t(0, 0), t(23, 0)).into();
        let via_post: Record = ActionRecord {
            originator_account_id: Some("a".into()),
            originator_post_id: None,
            target_account_id: None,
            target_post_id: Some("p1".into()),
            action_type: ActionType::Share,
            created_at: t(0, 5),
            retrieved_at: t(23, 0),
        }
        .into();
        let dangling: Record = ActionRecord {
            target_post_id: Some("missing".into()),
            created_at: t(0, 6),
            ..match &via_post {
                Record::Action(a) => a.clone(),
                _ => unreachable!(),
            }
        }
        .into();
        let s = store(&dir, &[post, via_post, dangling, share("b", "b", t(0, 7))]);
        let net = build_user_interaction_network(&s, &InteractionParams::new(ActionType::Share)).unwrap();
        assert_eq!(net.weight("a", "b"), Some(1));
        assert_eq!(net.meta.skipped["unresolved_target"], 1);
        assert_eq!(net.meta.skipped["self_loop"], 1);
    }

    #[test]
    fn windows_partition_the_span() {
        let dir = tempfile::tempdir().unwrap();
        let s = store(&dir, &[share("a", "b", t(0, 10)), share("a", "b", t(1, 10)), share("c", "b", t(1, 29))]);
        let p = InteractionParams::new(ActionType::Share);
        let w = user_interaction_over_time(&s, &p, t(0, 0), t(1, 30), chrono::Duration::hours(1)).unwrap();
        assert_eq!(w.len(), 2);
        assert_eq!(w[1].window_start, t(1, 0));
        assert_eq!(w[1].window_end, t(1, 30));
        assert_eq!(w[0].network.total_weight() + w[1].network.total_weight(), 3);
        let day = user_interaction_over_time(
            &s,
            &p,
            Timestamp::ymd_hms(2023, 5, 14, 0, 0, 0),
            Timestamp::ymd_hms(2023, 5, 15, 0, 0, 0),
            chrono::Duration::hours(1),
        )
        .unwrap();
        assert_eq!(day.len(), 24);
        assert!(user_interaction_over_time(&s, &p, t(0, 0), t(1, 0), chrono::Duration::zero()).is_err());
    }

    fn tagged(post: &str, account: &str, tags: &[&str]) -> Vec<Record> {
        let body = tags.join(" ");
        let mut out: Vec<Record> = vec![PostRecord::new(post, account, body, t(2, 0), t(23, 0)).into()];
        for tag in tags {
            out.push(
                EntityRecord {
                    post_id: post.into(),
                    body: tag.to_string(),
                    entity_type: if tag.starts_with('#') { EntityType::Hashtag } else { EntityType::Url },
                    created_at: t(2, 0),
                    retrieved_at: t(23, 0),
                }
                .into(),
            );
        }
        out
    }

    #[test]
    fn cooccurrence_clique_and_repeats() {
        let dir = tempfile::tempdir().unwrap();
        let mut records = tagged("p1", "a", &["#a", "#b", "#c"]);
        records.extend(tagged("p2", "a", &["#a", "#B"]));
        let s = store(&dir, &records);
        let net = build_cooccurrence_network(&s, EntityType::Hashtag, None, 1).unwrap();
        assert_eq!(net.edges.len(), 3);
        assert_eq!(net.weight("#a", "#b"), Some(2));
        assert_eq!(net.weight("#b", "#a"), Some(2));
        assert_eq!(net.weight("#b", "#c"), Some(1));
        assert_eq!(net.meta.exemplars["#b"], "#B");
    }

    #[test]
    fn bipartite_counts_posts_and_domains() {
        let dir = tempfile::tempdir().unwrap();
        let mut records = tagged("p1", "a", &["#x", "https://www.Example.org:443/p"]);
        records.extend(tagged("p2", "a", &["#x", "https://example.org/q"]));
        let s = store(&dir, &records);
        let net = build_bipartite_network(&s, BipartiteRight::Entity(EntityType::Hashtag), None, 1).unwrap();
        assert_eq!(net.weight("a", "#x"), Some(2));
        assert_eq!(net.nodes["a"], Some(Side::Left));
        let net = build_bipartite_network(&s, BipartiteRight::Domain, None, 1).unwrap();
        assert_eq!(net.weight("a", "example.org"), Some(2));
        assert_eq!(net.nodes["example.org"], Some(Side::Right));
    }

    #[test]
    fn domain_normalization() {
        assert_eq!(normalize_domain("https://www.Example.org:443/p").as_deref(), Some("example.org"));
        assert_eq!(normalize_domain("http://sub.example.org:8080").as_deref(), Some("sub.example.org"));
        assert_eq!(normalize_domain("https://"), None);
    }

    #[test]
    fn empty_store_gives_empty_networks() {
        let dir = tempfile::tempdir().unwrap();
        let s = store(&dir, &[]);
        let net = build_bipartite_network(&s, BipartiteRight::Domain, None, 1).unwrap();
        assert_eq!(net.meta.edge_count, 0);
        let net = build_user_interaction_network(&s, &InteractionParams::new(ActionType::Quote)).unwrap();
        assert!(net.nodes.is_empty());
    }
}
