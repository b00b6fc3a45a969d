use std::path::{Path, PathBuf};

use smdt_core::fixtures::{self, FixtureManifest, DEFAULT_SEED, FORUM_FILE, MANIFEST_FILE, MICROBLOG_FILE};
use smdt_core::inspector::{inspect_store, Availability};
use smdt_core::networks::{build_user_interaction_network, InteractionParams};
use smdt_core::standardizer::{run_ingestion, AdapterRegistry, IngestOptions};
use smdt_core::store::{ActionType, Table};
use smdt_core::StoreHandle;

fn committed() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// Set `SMDT_REGEN_FIXTURES=1` to rewrite the committed copy.
#[test]
fn committed_fixtures_match_regeneration() {
    if std::env::var_os("SMDT_REGEN_FIXTURES").is_some() {
        fixtures::generate_fixtures(DEFAULT_SEED, &committed()).unwrap();
    }
    let dir = tempfile::tempdir().unwrap();
    fixtures::generate_fixtures(DEFAULT_SEED, dir.path()).unwrap();
    for f in [MICROBLOG_FILE, FORUM_FILE, MANIFEST_FILE] {
        let fresh = std::fs::read(dir.path().join(f)).unwrap();
        let kept = std::fs::read(committed().join(f)).unwrap_or_default();
        assert!(fresh == kept, "{f} differs from its regeneration");
    }
}

fn ingest(manifest: &FixtureManifest, file: &str, dir: &Path) -> (StoreHandle, smdt_core::standardizer::IngestReport) {
    let store = smdt_core::init_store(dir.join(file).with_extension("db").to_str().unwrap(), true).unwrap();
    let opts = IngestOptions { default_retrieved_at: Some(manifest.retrieved_at), ..IngestOptions::default() };
    let adapter = &manifest.files[file].adapter;
    let report =
        run_ingestion(&store, &AdapterRegistry::with_builtins(), adapter, &[committed().join(file)], &opts).unwrap();
    (store, report)
}

#[test]
fn ingestion_matches_manifest() {
    let manifest = fixtures::read_manifest(&committed()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for (file, expected) in &manifest.files {
        let (store, report) = ingest(&manifest, file, dir.path());
        assert_eq!(report.records_read, expected.lines, "{file}");
        assert_eq!(report.records_failed, expected.records_failed, "{file}");
        let failed: Vec<u64> = report.failures.iter().map(|f| f.record_index).collect();
        assert_eq!(failed, expected.malformed_lines, "{file}");
        for table in Table::ALL {
            assert_eq!(report.insert_report.get(table), expected.tables[&table], "{file} {table}");
        }

        let schema = inspect_store(&store).unwrap();
        for (table, fields) in &expected.availability {
            for (field, available) in fields {
                let got = schema.availability[table][field] == Availability::Available;
                assert_eq!(got, *available, "{file} {table}.{field}");
            }
        }

        let shares = build_user_interaction_network(&store, &InteractionParams::new(ActionType::Share)).unwrap();
        assert_eq!(shares.total_weight(), expected.resolvable_share_actions, "{file}");
    }
}

#[test]
fn events_fall_inside_the_fixture_day() {
    let manifest = fixtures::read_manifest(&committed()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for file in manifest.files.keys() {
        let (store, _) = ingest(&manifest, file, dir.path());
        let stats = smdt_core::inspector::table_stats(&store, Table::Posts).unwrap();
        let created = &stats["created_at"];
        assert!(created.min_timestamp.unwrap() >= manifest.window_start, "{file}");
        assert!(created.max_timestamp.unwrap() < manifest.window_end, "{file}");
    }
}
