//! Deterministic synthetic datasets for tests and demos.
//!
//! Two JSON-Lines files are generated from one seed:
//!
//! * `microblog.jsonl` for the `generic_microblog` adapter: about 200 users,
//!   shares, quotes and replies, no community data and no `retrieved_at`
//!   (like many archived microblog exports).
//! * `forum.jsonl` for the `generic_forum` adapter: submissions and comment
//!   threads across 10 communities with member counts and a fixed
//!   `retrieved_on` (like public forum dumps).
//!
//! Every event falls inside 2023-05-14T00:00Z to 2023-05-15T00:00Z. Each file
//! holds 3 malformed lines and a few verbatim duplicates. The manifest's
//! expected counts are tallied from the generator's own bookkeeping, without
//! going through the standardizer, so it can serve as an oracle for it.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::store::{EntityType, Table, TableCounts};
use crate::timestamp::Timestamp;

pub const DEFAULT_SEED: u64 = 42;
pub const MICROBLOG_FILE: &str = "microblog.jsonl";
pub const FORUM_FILE: &str = "forum.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

const MICROBLOG_LINES: usize = 1000;
const MICROBLOG_USERS: usize = 200;
const FORUM_LINES: usize = 500;
const FORUM_AUTHORS: usize = 120;
const COMMUNITIES: usize = 10;
const MALFORMED_PER_FILE: usize = 3;
const MICROBLOG_DUPLICATES: usize = 5;
/// Hours of the day in which a few accounts repeatedly share one account,
/// so hourly share windows contain edges heavier than 1.
const CAMPAIGN_HOURS: [i64; 2] = [9, 18];
const CAMPAIGN_FANS: usize = 5;
const CAMPAIGN_IDOL: usize = 100;
const FORUM_DUPLICATES: usize = 2;

/// Ingestion time to pin for the microblog file, and the forum's `retrieved_on`.
pub fn fixture_retrieved_at() -> Timestamp {
    Timestamp::ymd_hms(2023, 5, 16, 0, 0, 0)
}

/// Span covering every fixture event, half-open.
pub fn fixture_window() -> (Timestamp, Timestamp) {
    (Timestamp::ymd_hms(2023, 5, 14, 0, 0, 0), Timestamp::ymd_hms(2023, 5, 15, 0, 0, 0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileManifest {
    pub adapter: String,
    pub sha256: String,
    pub lines: u64,
    pub records_read: u64,
    pub records_failed: u64,
    /// 0-based line numbers of the malformed lines.
    pub malformed_lines: Vec<u64>,
    pub tables: BTreeMap<Table, TableCounts>,
    pub availability: BTreeMap<Table, IndexMap<String, bool>>,
    pub share_actions: u64,
    /// SHARE actions whose target account resolves and differs from the
    /// originator.
    pub resolvable_share_actions: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureManifest {
    pub seed: u64,
    pub retrieved_at: Timestamp,
    pub window_start: Timestamp,
    pub window_end: Timestamp,
    pub files: IndexMap<String, FileManifest>,
}

#[derive(Debug, thiserror::Error)]
pub enum FixtureError {
    #[error("cannot write fixtures to {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Writes both fixture files and `manifest.json` into `out_dir`.
pub fn generate_fixtures(seed: u64, out_dir: &Path) -> Result<FixtureManifest, FixtureError> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| FixtureError::Io { path, source }
    };
    std::fs::create_dir_all(out_dir).map_err(io(out_dir))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut files = IndexMap::new();
    for (name, adapter, generated) in [
        (MICROBLOG_FILE, "generic_microblog", microblog(&mut rng)),
        (FORUM_FILE, "generic_forum", forum(&mut rng)),
    ] {
        let text = generated.text();
        let path = out_dir.join(name);
        std::fs::write(&path, &text).map_err(io(&path))?;
        files.insert(name.to_string(), generated.manifest(adapter, &text));
    }
    let (window_start, window_end) = fixture_window();
    let manifest = FixtureManifest { seed, retrieved_at: fixture_retrieved_at(), window_start, window_end, files };
    let mut doc = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    doc.push('\n');
    let path = out_dir.join(MANIFEST_FILE);
    std::fs::write(&path, doc).map_err(io(&path))?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<FixtureManifest, String> {
    let path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

/// Expected store contents, tallied as lines are generated.
#[derive(Default)]
struct Tally {
    counts: BTreeMap<Table, TableCounts>,
    seen: HashSet<(Table, String)>,
    populated: BTreeMap<Table, BTreeSet<&'static str>>,
    share_actions: u64,
    resolvable_shares: u64,
}

impl Tally {
    /// Returns true when the key is new, i.e. the row would be inserted.
    fn record(&mut self, table: Table, key: String, fields: &[&'static str]) -> bool {
        let counts = self.counts.entry(table).or_default();
        counts.received += 1;
        if self.seen.insert((table, key)) {
            counts.inserted += 1;
            self.populated.entry(table).or_default().extend(fields);
            true
        } else {
            counts.deduplicated += 1;
            false
        }
    }

    fn entities(&mut self, post_id: &str, created: Timestamp, entities: &[(EntityType, String)]) {
        for (t, body) in entities {
            let key = format!("{post_id}\u{1f}{t}\u{1f}{body}\u{1f}{}", created.as_micros());
            self.record(Table::Entities, key, &["post_id", "body", "entity_type", "created_at", "retrieved_at"]);
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn action(
        &mut self,
        action_type: &str,
        originator: &str,
        origin_post: &str,
        target_account: Option<&str>,
        target_post: &str,
        created: Timestamp,
        resolved_target: Option<&str>,
    ) {
        let key = format!(
            "{originator}|{origin_post}|{}|{target_post}|{action_type}|{}",
            target_account.unwrap_or(""),
            created.as_micros()
        );
        let mut fields = vec!["originator_account_id", "originator_post_id", "target_post_id", "action_type", "created_at", "retrieved_at"];
        if target_account.is_some() {
            fields.push("target_account_id");
        }
        if self.record(Table::Actions, key, &fields) && action_type == "SHARE" {
            self.share_actions += 1;
            if resolved_target.is_some_and(|t| t != originator) {
                self.resolvable_shares += 1;
            }
        }
    }
}

struct Generated {
    lines: Vec<String>,
    malformed: Vec<u64>,
    tally: Tally,
}

impl Generated {
    fn text(&self) -> String {
        let mut s = self.lines.join("\n");
        s.push('\n');
        s
    }

    fn manifest(&self, adapter: &str, text: &str) -> FileManifest {
        let tables = Table::ALL.into_iter().map(|t| (t, self.tally.counts.get(&t).copied().unwrap_or_default())).collect();
        let availability = Table::ALL
            .into_iter()
            .map(|t| {
                let populated = self.tally.populated.get(&t);
                let fields =
                    t.fields().iter().map(|f| (f.name.to_string(), populated.is_some_and(|p| p.contains(f.name)))).collect();
                (t, fields)
            })
            .collect();
        FileManifest {
            adapter: adapter.to_string(),
            sha256: hex::encode(Sha256::digest(text.as_bytes())),
            lines: self.lines.len() as u64,
            records_read: self.lines.len() as u64,
            records_failed: self.malformed.len() as u64,
            malformed_lines: self.malformed.clone(),
            tables,
            availability,
            share_actions: self.tally.share_actions,
            resolvable_share_actions: self.tally.resolvable_shares,
        }
    }
}

/// Places verbatim duplicates after their originals and malformed lines
/// anywhere. Duplicated lines yield the same records again, all deduplicated.
fn interleave(
    rng: &mut ChaCha8Rng,
    mut lines: Vec<String>,
    per_line: &[BTreeMap<Table, u64>],
    duplicates: usize,
    malformed: Vec<String>,
    tally: &mut Tally,
) -> (Vec<String>, Vec<u64>) {
    let mut origin: Vec<usize> = (0..lines.len()).collect();
    for _ in 0..duplicates {
        let src = rng.gen_range(0..per_line.len());
        let pos = origin.iter().position(|&o| o == src).unwrap();
        let at = rng.gen_range(pos + 1..=lines.len());
        let copy = lines[pos].clone();
        lines.insert(at, copy);
        origin.insert(at, src);
        for (table, n) in &per_line[src] {
            let c = tally.counts.entry(*table).or_default();
            c.received += n;
            c.deduplicated += n;
        }
    }
    let mut bad_at: Vec<usize> = Vec::new();
    for bad in malformed {
        let at = rng.gen_range(0..=lines.len());
        lines.insert(at, bad);
        for b in bad_at.iter_mut() {
            if *b >= at {
                *b += 1;
            }
        }
        bad_at.push(at);
    }
    bad_at.sort_unstable();
    (lines, bad_at.into_iter().map(|i| i as u64).collect())
}

const WORDS: &[&str] = &[
    "the", "vote", "today", "great", "debate", "policy", "kiitos", "päivä", "hyvä", "huomenta", "tax", "energy",
    "schools", "why", "not", "really", "agree", "disagree", "news", "read", "this", "thread", "ok", "wow", "vaalit",
    "eduskunta", "budget", "jobs", "climate", "tonight", "results", "poll", "Helsinki", "Tampere", "Turku", "Oulu",
    "määrä", "lisää", "ääni", "never", "again", "maybe", "strong", "weak", "sources", "update", "live", "ok!",
];

const HASHTAGS: &[&str] = &[
    "#vaalit2023", "#Vaalit2023", "#eduskunta", "#politiikka", "#talous", "#ilmasto", "#JariSarasvuo", "#jarisarasvuo",
    "#kokoomus", "#sdp", "#perussuomalaiset", "#keskusta", "#helsinki", "#finland", "#news", "#uutiset", "#vaalit",
    "#nato", "#energia", "#koulutus", "#terveys", "#data_science", "#AI", "#ai", "#x2023",
];

const URL_BASES: &[&str] = &[
    "https://www.Example.org:443",
    "https://example.org",
    "http://news.example.com",
    "https://yle.fi",
    "https://www.yle.fi",
    "https://YLE.fi:8443",
    "https://hs.fi",
    "https://t.co",
    "http://blog.example.net",
    "https://sub.domain.example.co.uk",
];

const URL_TRAILERS: &[&str] = &[".", ",", "!", ")", "?", ";", ":"];

const EMAIL_DOMAINS: &[&str] = &["example.com", "mail.example.org", "uni.example.fi"];

fn words(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> Vec<String> {
    (0..rng.gen_range(lo..=hi)).map(|_| WORDS.choose(rng).unwrap().to_string()).collect()
}

fn url(rng: &mut ChaCha8Rng) -> String {
    if rng.gen_bool(0.01) {
        return "https://[bad/".to_string();
    }
    let base = URL_BASES.choose(rng).unwrap();
    let mut u = format!("{base}/{}/{}", WORDS[rng.gen_range(0..5)], rng.gen_range(1..100_000));
    if rng.gen_bool(0.2) {
        u.push_str(&format!("?id={}", rng.gen_range(1..1000)));
    }
    u
}

/// Free text with embedded entities. Returns the text and the entities the
/// extractor must find, in order.
fn text_with_entities(rng: &mut ChaCha8Rng, handles: &[String], tag_rate: f64) -> (String, Vec<(EntityType, String)>) {
    let mut tokens: Vec<(String, Option<(EntityType, String)>)> = words(rng, 3, 12).into_iter().map(|w| (w, None)).collect();
    for _ in 0..rng.gen_range(0..=3) {
        if rng.gen_bool(tag_rate) {
            let t = HASHTAGS.choose(rng).unwrap().to_string();
            tokens.push((t.clone(), Some((EntityType::Hashtag, t))));
        }
    }
    for _ in 0..rng.gen_range(0..=2) {
        if rng.gen_bool(tag_rate * 0.6) {
            let m = format!("@{}", handles.choose(rng).unwrap());
            tokens.push((m.clone(), Some((EntityType::Mention, m))));
        }
    }
    if rng.gen_bool(0.35) {
        let u = url(rng);
        let token = if rng.gen_bool(0.2) { format!("{u}{}", URL_TRAILERS.choose(rng).unwrap()) } else { u.clone() };
        tokens.push((token, Some((EntityType::Url, u))));
    }
    if rng.gen_bool(0.05) {
        let e = format!("{}@{}", handles.choose(rng).unwrap(), EMAIL_DOMAINS.choose(rng).unwrap());
        tokens.push((e.clone(), Some((EntityType::Email, e))));
    }
    tokens.shuffle(rng);
    let text = tokens.iter().map(|(t, _)| t.as_str()).collect::<Vec<_>>().join(" ");
    let entities = tokens.into_iter().filter_map(|(_, e)| e).collect();
    (text, entities)
}

fn day_times(rng: &mut ChaCha8Rng, n: usize) -> Vec<Timestamp> {
    let (start, _) = fixture_window();
    let mut secs: Vec<i64> = (0..n).map(|_| rng.gen_range(0..86_400)).collect();
    secs.sort_unstable();
    secs.into_iter().map(|s| Timestamp::from_micros(start.as_micros() + s * 1_000_000)).collect()
}

struct User {
    id: String,
    handle: String,
    display: String,
    bio: Option<String>,
    followers: u64,
    friends: u64,
    posts: u64,
    verified: bool,
    avatar: String,
    created: Timestamp,
}

struct MicroPost {
    id: String,
    author: usize,
}

fn skewed_index(rng: &mut ChaCha8Rng, n: usize) -> usize {
    let u: f64 = rng.gen();
    ((u * u) * n as f64) as usize
}

fn microblog(rng: &mut ChaCha8Rng) -> Generated {
    let users: Vec<User> = (0..MICROBLOG_USERS)
        .map(|i| {
            let handle = format!("{}_{}", WORDS[rng.gen_range(0..24)].replace(['ä', 'ö'], "a"), i);
            User {
                id: (100_000 + i as u64 * 7_919).to_string(),
                display: format!("User {i}"),
                bio: rng.gen_bool(0.7).then(|| words(rng, 2, 8).join(" ")),
                followers: rng.gen_range(0..50_000),
                friends: rng.gen_range(0..3_000),
                posts: rng.gen_range(1..40_000),
                verified: rng.gen_bool(0.08),
                avatar: format!("https://pbs.example.com/profile_images/{i}.jpg"),
                created: Timestamp::from_micros(rng.gen_range(1_230_768_000i64..1_672_531_200) * 1_000_000),
                handle,
            }
        })
        .collect();
    let handles: Vec<String> = users.iter().map(|u| u.handle.clone()).collect();

    let unique = MICROBLOG_LINES - MALFORMED_PER_FILE - MICROBLOG_DUPLICATES;
    let times = day_times(rng, unique);
    let mut tally = Tally::default();
    let mut posts: Vec<MicroPost> = Vec::new();
    let mut lines = Vec::with_capacity(MICROBLOG_LINES);
    let mut per_line = Vec::with_capacity(unique);

    let day_start = fixture_window().0.as_micros();
    for (n, created) in times.into_iter().enumerate() {
        let hour = (created.as_micros() - day_start) / 3_600_000_000;
        let campaign = CAMPAIGN_HOURS.contains(&hour) && rng.gen_bool(0.5);
        let author = if campaign { rng.gen_range(0..CAMPAIGN_FANS) } else { skewed_index(rng, users.len()) };
        let user = &users[author];
        let post_id = format!("1658{:011}", 20_000_000 + n as u64 * 3_137);

        let (mut text, mut entities) = text_with_entities(rng, &handles, 0.5);
        let mut obj = Map::new();
        obj.insert("id".into(), json!(post_id));

        let kind: f64 = if campaign { 0.0 } else { rng.gen() };
        let mut reference: Option<(&str, &str, &str, String, Option<String>, Option<String>)> = None;
        if kind < 0.35 {
            // SHARE
            let (target_post, target_user, resolved) = if campaign {
                let tu = users[CAMPAIGN_IDOL].id.clone();
                let theirs: Vec<&MicroPost> = posts.iter().filter(|p| p.author == CAMPAIGN_IDOL).collect();
                match theirs.choose(rng) {
                    Some(p) => (p.id.clone(), rng.gen_bool(0.5).then(|| tu.clone()), Some(tu)),
                    None => (format!("ext{}", rng.gen_range(1_000_000..9_999_999)), Some(tu.clone()), Some(tu)),
                }
            } else if !posts.is_empty() && rng.gen_bool(0.75) {
                let own: Vec<&MicroPost> = posts.iter().filter(|p| p.author == author).collect();
                let target = if !own.is_empty() && rng.gen_bool(0.06) { *own.choose(rng).unwrap() } else { posts.choose(rng).unwrap() };
                let tu = users[target.author].id.clone();
                let explicit = rng.gen_bool(0.5).then(|| tu.clone());
                (target.id.clone(), explicit, Some(tu))
            } else if rng.gen_bool(0.6) {
                let mut other = rng.gen_range(0..users.len());
                if other == author {
                    other = (other + 1) % users.len();
                }
                let tu = users[other].id.clone();
                (format!("ext{}", rng.gen_range(1_000_000..9_999_999)), Some(tu.clone()), Some(tu))
            } else {
                (format!("ext{}", rng.gen_range(1_000_000..9_999_999)), None, None)
            };
            let target_handle = match &resolved {
                Some(id) => users.iter().find(|u| &u.id == id).map(|u| u.handle.clone()).unwrap(),
                None => handles.choose(rng).unwrap().clone(),
            };
            let mention = format!("@{target_handle}");
            text = format!("RT {mention}: {text}");
            entities.insert(0, (EntityType::Mention, mention));
            reference = Some(("repost_of", "repost_of_user", "SHARE", target_post, target_user, resolved));
        } else if kind < 0.45 && !posts.is_empty() {
            let target = posts.choose(rng).unwrap();
            let tu = users[target.author].id.clone();
            let explicit = rng.gen_bool(0.5).then(|| tu.clone());
            let link = format!("https://twitter.com/{}/status/{}", users[target.author].handle, target.id);
            text = format!("{text} {link}");
            entities.push((EntityType::Url, link));
            reference = Some(("quote_of", "quote_of_user", "QUOTE", target.id.clone(), explicit, Some(tu)));
        } else if kind < 0.60 && !posts.is_empty() {
            let target = posts.choose(rng).unwrap();
            let tu = users[target.author].id.clone();
            let mention = format!("@{}", users[target.author].handle);
            text = format!("{mention} {text}");
            entities.insert(0, (EntityType::Mention, mention));
            reference = Some(("reply_to", "reply_to_user", "REPLY", target.id.clone(), Some(tu.clone()), Some(tu)));
        }
        obj.insert("text".into(), json!(text));

        obj.insert(
            "ts".into(),
            match rng.gen_range(0..20) {
                0..=11 => json!(created.datetime().format("%a %b %d %H:%M:%S +0000 %Y").to_string()),
                12..=17 => json!(created.to_iso()),
                18 => json!(created.as_micros() / 1_000_000),
                _ => json!(created.as_micros() / 1_000),
            },
        );

        let mut u = Map::new();
        u.insert("id".into(), if rng.gen_bool(0.5) { json!(user.id.parse::<u64>().unwrap()) } else { json!(user.id) });
        u.insert("name".into(), json!(user.handle));
        u.insert("display_name".into(), json!(user.display));
        if let Some(bio) = &user.bio {
            u.insert("bio".into(), json!(bio));
        }
        u.insert("followers".into(), json!(user.followers));
        u.insert("friends".into(), json!(user.friends));
        u.insert("posts".into(), json!(user.posts));
        u.insert("verified".into(), json!(user.verified));
        u.insert("avatar".into(), json!(user.avatar));
        u.insert("created_at".into(), json!(user.created.datetime().format("%a %b %d %H:%M:%S +0000 %Y").to_string()));
        obj.insert("user".into(), Value::Object(u));

        obj.insert("like_count".into(), json!(rng.gen_range(0..500)));
        obj.insert("share_count".into(), json!(rng.gen_range(0..200)));
        obj.insert("comment_count".into(), json!(rng.gen_range(0..80)));
        obj.insert("quote_count".into(), json!(rng.gen_range(0..30)));
        let located = rng.gen_bool(0.15);
        if located {
            let lat = 60.0 + rng.gen_range(0..20_000) as f64 / 10_000.0;
            let lon = 24.0 + rng.gen_range(0..20_000) as f64 / 10_000.0;
            obj.insert("location".into(), json!({"lat": lat, "lon": lon}));
        }
        if rng.gen_bool(0.1) {
            let keys: Vec<String> = (0..rng.gen_range(1..=2)).map(|_| format!("3_{}", rng.gen_range(10u64.pow(15)..10u64.pow(16)))).collect();
            for k in &keys {
                entities.push((EntityType::MediaKey, k.clone()));
            }
            obj.insert("media_keys".into(), json!(keys));
        }
        if let Some((post_key, user_key, _, target_post, target_user, _)) = &reference {
            obj.insert(post_key.to_string(), json!(target_post));
            if let Some(tu) = target_user {
                obj.insert(user_key.to_string(), json!(tu));
            }
        }

        let mut account_fields = vec![
            "account_id", "user_name", "profile_name", "post_count", "friend_count", "follower_count", "is_verified",
            "profile_image_url", "created_at", "retrieved_at",
        ];
        if user.bio.is_some() {
            account_fields.push("bio");
        }
        tally.record(Table::Accounts, user.id.clone(), &account_fields);
        let mut post_fields = vec![
            "post_id", "account_id", "body", "like_count", "share_count", "comment_count", "quote_count", "created_at",
            "retrieved_at",
        ];
        if located {
            post_fields.push("location");
        }
        tally.record(Table::Posts, post_id.clone(), &post_fields);
        tally.entities(&post_id, created, &entities);
        if let Some((_, _, action, target_post, target_user, resolved)) = &reference {
            tally.action(action, &user.id, &post_id, target_user.as_deref(), target_post, created, resolved.as_deref());
        }

        per_line.push(BTreeMap::from([
            (Table::Accounts, 1),
            (Table::Posts, 1),
            (Table::Entities, entities.len() as u64),
            (Table::Actions, u64::from(reference.is_some())),
        ]));
        lines.push(serde_json::to_string(&Value::Object(obj)).unwrap());
        posts.push(MicroPost { id: post_id, author });
    }

    let ts = fixture_window().0.to_iso();
    let malformed = vec![
        r#"{"id": "1658999999999901", "text": "cut off mid-reco"#.to_string(),
        json!({"id": "1658999999999902", "text": "no author here", "ts": ts}).to_string(),
        json!({"id": "1658999999999903", "user": {"id": "100000"}, "text": "when?", "ts": "yesterday"}).to_string(),
    ];
    let (lines, malformed) = interleave(rng, lines, &per_line, MICROBLOG_DUPLICATES, malformed, &mut tally);
    Generated { lines, malformed, tally }
}

struct Community {
    id: String,
    name: String,
    title: String,
    description: String,
    subscribers: u64,
    public: bool,
    icon: Option<String>,
    created: i64,
}

struct Author {
    id: String,
    name: String,
    created: i64,
}

struct Thread {
    community: usize,
    nodes: Vec<(String, usize)>,
}

fn base36(mut n: u64) -> String {
    const DIGITS: &[u8] = b"0123456789abcdefghijklmnopqrstuvwxyz";
    let mut s = Vec::new();
    loop {
        s.push(DIGITS[(n % 36) as usize]);
        n /= 36;
        if n == 0 {
            break;
        }
    }
    s.reverse();
    String::from_utf8(s).unwrap()
}

fn forum(rng: &mut ChaCha8Rng) -> Generated {
    const NAMES: [&str; COMMUNITIES] = [
        "Suomi", "Finland", "politics_fi", "helsinki", "AskFinland", "Eurovision", "worldnews", "dataisbeautiful",
        "rust", "learnprogramming",
    ];
    let communities: Vec<Community> = NAMES
        .iter()
        .enumerate()
        .map(|(i, name)| Community {
            id: format!("t5_{}", base36(3_000_000 + i as u64 * 7_777)),
            name: name.to_string(),
            title: format!("{name} community"),
            description: words(rng, 4, 10).join(" "),
            subscribers: rng.gen_range(1_000..2_000_000),
            public: i != 7,
            icon: (i % 4 != 3).then(|| format!("https://styles.example.com/{}.png", name.to_lowercase())),
            created: rng.gen_range(1_199_145_600..1_420_070_400),
        })
        .collect();
    let authors: Vec<Author> = (0..FORUM_AUTHORS)
        .map(|i| Author {
            id: format!("t2_{}", base36(40_000_000 + i as u64 * 104_729)),
            name: format!("{}{}", WORDS[rng.gen_range(0..24)].replace(['ä', 'ö'], "a"), i),
            created: rng.gen_range(1_262_304_000..1_672_531_200),
        })
        .collect();
    let handles: Vec<String> = authors.iter().map(|a| a.name.clone()).collect();

    let unique = FORUM_LINES - MALFORMED_PER_FILE - FORUM_DUPLICATES;
    let times = day_times(rng, unique);
    let retrieved = fixture_retrieved_at();
    let retrieved_on = retrieved.as_micros() / 1_000_000;
    let mut tally = Tally::default();
    let mut threads: Vec<Thread> = Vec::new();
    let mut lines = Vec::with_capacity(FORUM_LINES);
    let mut per_line = Vec::with_capacity(unique);

    for (n, created) in times.into_iter().enumerate() {
        let author_ix = skewed_index(rng, authors.len());
        let author = &authors[author_ix];
        let created_utc = created.as_micros() / 1_000_000;
        let mut obj = Map::new();
        let mut post_fields = vec!["post_id", "account_id", "conversation_id", "community_id", "body", "created_at", "retrieved_at"];
        let post_id;
        let community_ix;
        let mut entities;
        let mut reply: Option<(String, Option<String>)> = None;
        let full_community;

        if threads.is_empty() || rng.gen_bool(0.3) {
            community_ix = rng.gen_range(0..communities.len());
            post_id = format!("t3_{}", base36(900_000_000 + n as u64 * 31_337));
            let (title, title_entities) = text_with_entities(rng, &handles, 0.2);
            entities = title_entities;
            obj.insert("kind".into(), json!("submission"));
            obj.insert("id".into(), json!(post_id));
            obj.insert("author_id".into(), json!(author.id));
            obj.insert("author".into(), json!(author.name));
            obj.insert("author_created".into(), json!(author.created));
            obj.insert("title".into(), json!(title));
            if rng.gen_bool(0.6) {
                let (selftext, more) = text_with_entities(rng, &handles, 0.2);
                entities.extend(more);
                obj.insert("selftext".into(), json!(selftext));
            }
            if rng.gen_bool(0.5) {
                obj.insert("ups".into(), json!(rng.gen_range(0..5_000)));
            } else {
                obj.insert("score".into(), json!(rng.gen_range(0..5_000)));
            }
            post_fields.push("like_count");
            obj.insert("num_comments".into(), json!(rng.gen_range(0..400)));
            post_fields.push("comment_count");
            threads.push(Thread { community: community_ix, nodes: vec![(post_id.clone(), author_ix)] });
            full_community = true;
        } else {
            let thread_ix = rng.gen_range(0..threads.len());
            community_ix = threads[thread_ix].community;
            post_id = format!("t1_{}", base36(700_000_000 + n as u64 * 27_449));
            let (body, body_entities) = text_with_entities(rng, &handles, 0.2);
            entities = body_entities;
            let thread = &threads[thread_ix];
            let link_id = thread.nodes[0].0.clone();
            let (parent_id, parent_author) = if rng.gen_bool(0.5) {
                thread.nodes[0].clone()
            } else {
                thread.nodes.choose(rng).unwrap().clone()
            };
            let score: i64 = rng.gen_range(-20..300);
            obj.insert("kind".into(), json!("comment"));
            obj.insert("id".into(), json!(post_id));
            obj.insert("author_id".into(), json!(author.id));
            obj.insert("author".into(), json!(author.name));
            obj.insert("author_created".into(), json!(author.created));
            obj.insert("body".into(), json!(body));
            obj.insert("score".into(), json!(score));
            if score >= 0 {
                post_fields.push("like_count");
            }
            obj.insert("link_id".into(), json!(link_id));
            obj.insert("parent_id".into(), json!(parent_id));
            let parent_author_id = rng.gen_bool(0.85).then(|| authors[parent_author].id.clone());
            if let Some(pa) = &parent_author_id {
                obj.insert("parent_author_id".into(), json!(pa));
            }
            reply = Some((parent_id, parent_author_id));
            threads[thread_ix].nodes.push((post_id.clone(), author_ix));
            full_community = false;
        }
        obj.insert("created_utc".into(), json!(created_utc));
        obj.insert("retrieved_on".into(), json!(retrieved_on));
        let c = &communities[community_ix];
        let mut community_fields = vec!["community_id", "community_type", "community_username", "retrieved_at"];
        if full_community {
            let mut sub = json!({
                "id": c.id, "name": c.name, "title": c.title, "description": c.description,
                "subscribers": c.subscribers, "public": c.public,
            });
            if let Some(icon) = &c.icon {
                sub["icon"] = json!(icon);
                community_fields.push("profile_image_url");
            }
            sub["created"] = json!(c.created);
            obj.insert("subforum".into(), sub);
            community_fields.extend(["community_name", "bio", "is_public", "member_count", "created_at"]);
        } else {
            obj.insert("subforum".into(), json!({"id": c.id, "name": c.name}));
        }

        tally.record(Table::Communities, c.id.clone(), &community_fields);
        tally.record(Table::Accounts, author.id.clone(), &["account_id", "user_name", "created_at", "retrieved_at"]);
        tally.record(Table::Posts, post_id.clone(), &post_fields);
        tally.entities(&post_id, created, &entities);
        if let Some((parent_id, parent_author_id)) = &reply {
            tally.action("REPLY", &author.id, &post_id, parent_author_id.as_deref(), parent_id, created, None);
        }
        per_line.push(BTreeMap::from([
            (Table::Communities, 1),
            (Table::Accounts, 1),
            (Table::Posts, 1),
            (Table::Entities, entities.len() as u64),
            (Table::Actions, u64::from(reply.is_some())),
        ]));
        lines.push(serde_json::to_string(&Value::Object(obj)).unwrap());
    }

    let malformed = vec![
        "this line is not json at all".to_string(),
        json!({"kind": "comment", "id": "t1_bad2", "body": "who wrote this", "created_utc": retrieved_on - 90_000}).to_string(),
        json!({"kind": "poll", "id": "t3_bad3", "author_id": authors[0].id, "title": "poll", "created_utc": retrieved_on - 90_000})
            .to_string(),
    ];
    let (lines, malformed) = interleave(rng, lines, &per_line, FORUM_DUPLICATES, malformed, &mut tally);
    Generated { lines, malformed, tally }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_bytes() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ma = generate_fixtures(7, a.path()).unwrap();
        let mb = generate_fixtures(7, b.path()).unwrap();
        assert_eq!(ma, mb);
        for f in [MICROBLOG_FILE, FORUM_FILE, MANIFEST_FILE] {
            assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
        }
        let other = tempfile::tempdir().unwrap();
        let mc = generate_fixtures(8, other.path()).unwrap();
        assert_ne!(ma.files[MICROBLOG_FILE].sha256, mc.files[MICROBLOG_FILE].sha256);
    }

    #[test]
    fn shape_of_files() {
        let dir = tempfile::tempdir().unwrap();
        let m = generate_fixtures(DEFAULT_SEED, dir.path()).unwrap();
        let micro = &m.files[MICROBLOG_FILE];
        assert_eq!(micro.lines, 1000);
        assert_eq!(micro.records_failed, 3);
        assert!(!micro.availability[&Table::Communities]["community_id"]);
        let forum = &m.files[FORUM_FILE];
        assert_eq!(forum.lines, 500);
        assert!(forum.availability[&Table::Communities]["community_id"]);
        assert_eq!(forum.tables[&Table::Communities].inserted, 10);
        assert!(micro.resolvable_share_actions > 0 && micro.resolvable_share_actions < micro.share_actions);
    }

    #[test]
    fn base36_digits() {
        assert_eq!(base36(0), "0");
        assert_eq!(base36(35), "z");
        assert_eq!(base36(36), "10");
    }
}
