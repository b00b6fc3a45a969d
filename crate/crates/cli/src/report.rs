//! Human-readable run reports.

use std::fmt::Write;
use std::path::Path;

use smdt_core::anonymizer::AnonymizeReport;
use smdt_core::enricher::EnrichReport;
use smdt_core::fixtures::FixtureManifest;
use smdt_core::networks::{Network, NetworkWindow};
use smdt_core::standardizer::IngestReport;
use smdt_core::store::Table;

pub fn ingest(r: &IngestReport) -> String {
    let mut s = format!(
        "files: {}\nrecords read: {}\nrecords failed: {}\n",
        r.files_processed, r.records_read, r.records_failed
    );
    s.push_str("table | received | inserted | deduplicated\n");
    for t in Table::ALL {
        let c = r.insert_report.get(t);
        if c.received > 0 {
            let _ = writeln!(s, "{t} | {} | {} | {}", c.received, c.inserted, c.deduplicated);
        }
    }
    for f in &r.failures {
        let _ = writeln!(s, "failed {}:{}: {}", f.file_path, f.record_index, f.reason);
    }
    s
}

pub fn anonymize(dst: &str, r: &AnonymizeReport) -> String {
    let mut s = format!("destination: {dst}\ntokens issued: {}\n", r.tokens_issued);
    for (t, n) in &r.copied {
        let _ = writeln!(s, "copied {t}: {n}");
    }
    for (t, n) in &r.redactions {
        let _ = writeln!(s, "redacted {t}: {n}");
    }
    s
}

pub fn network(out: &Path, n: &Network) -> String {
    let mut s = format!("{} network: {} nodes, {} edges -> {}\n", n.meta.kind, n.meta.node_count, n.meta.edge_count, out.display());
    for (reason, count) in &n.meta.skipped {
        let _ = writeln!(s, "skipped {reason}: {count}");
    }
    s
}

pub fn windows(dir: &Path, files: &[(String, &NetworkWindow)]) -> String {
    let mut s = format!("{} windows -> {}\n", files.len(), dir.display());
    for (name, w) in files {
        let _ = writeln!(s, "{name}: {} nodes, {} edges", w.network.meta.node_count, w.network.meta.edge_count);
    }
    s
}

pub fn enrich(r: &EnrichReport) -> String {
    let mut s = format!(
        "model: {}\ntargets: {}\ncached: {}\nrequests: {}\nstored: {}\nfailures: {}\nretries: {}\nbatches: {}\n",
        r.model_id,
        r.targets_considered,
        r.targets_skipped_cached,
        r.requests_sent,
        r.responses_stored,
        r.failures,
        r.retries,
        r.batches
    );
    for f in &r.failure_details {
        let _ = writeln!(s, "failed {}: {}", f.target_id, f.reason);
    }
    s
}

pub fn fixtures(dir: &Path, m: &FixtureManifest) -> String {
    let mut s = format!("seed {} -> {}\n", m.seed, dir.display());
    for (name, f) in &m.files {
        let _ = writeln!(s, "{name}: {} lines, {} malformed, sha256 {}", f.lines, f.records_failed, f.sha256);
    }
    s
}
