//! `smdt`: ingest, inspect, anonymize, network, enrich and export over
//! SQLite-backed stores.
//!
//! Exit codes: 0 success, 1 validation error, 2 runtime failure.

mod config;
mod duration;
mod report;

use std::io::{IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use smdt_core::anonymizer::{run_anonymization, AnonymizeConfig, AnonymizeError, AnonymizePolicy};
use smdt_core::enricher::{run_enricher, EnrichError};
use smdt_core::inspector::{inspect_store, parse_tables, report_schemas, InspectError};
use smdt_core::networks::{
    build_bipartite_network, build_cooccurrence_network, build_user_interaction_network, to_edge_list, to_json,
    user_interaction_over_time, BipartiteRight, InteractionParams, Network, NetworkError, Weighting,
};
use smdt_core::standardizer::{run_ingestion, IngestError, IngestOptions};
use smdt_core::store::{ActionType, EntityType, StoreError, Table};
use smdt_core::{StoreHandle, Timestamp};

use config::CliConfig;

#[derive(Debug)]
pub enum Failure {
    Invalid(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Invalid(m) | Failure::Runtime(m) => m,
        }
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::UnknownTable(_)
            | StoreError::UnknownField { .. }
            | StoreError::InvalidFilter { .. }
            | StoreError::MalformedRange { .. }
            | StoreError::NotFound(_)
            | StoreError::StoreExists(_) => Failure::Invalid(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<NetworkError> for Failure {
    fn from(e: NetworkError) -> Self {
        match e {
            NetworkError::Store(e) => e.into(),
            NetworkError::SideClash(_) => Failure::Runtime(e.to_string()),
            _ => Failure::Invalid(e.to_string()),
        }
    }
}

impl From<AnonymizeError> for Failure {
    fn from(e: AnonymizeError) -> Self {
        match e {
            AnonymizeError::Store(e) => e.into(),
            AnonymizeError::Collision { .. } | AnonymizeError::RowCountMismatch { .. } => Failure::Runtime(e.to_string()),
            _ => Failure::Invalid(e.to_string()),
        }
    }
}

impl From<EnrichError> for Failure {
    fn from(e: EnrichError) -> Self {
        match e {
            EnrichError::InvalidConfig(_) => Failure::Invalid(e.to_string()),
            EnrichError::Store(e) => e.into(),
            EnrichError::Auth { .. } => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<IngestError> for Failure {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::UnknownAdapter(_) => Failure::Invalid(e.to_string()),
            IngestError::Store(e) => e.into(),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "smdt", version, about = "Social media data toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Standardize raw files into a store.
    Ingest(IngestArgs),
    /// Field availability and statistics across stores.
    Inspect(InspectArgs),
    /// Copy a store with identifiers replaced by peppered hashes.
    Anonymize(AnonymizeArgs),
    /// Build interaction, co-occurrence or bipartite networks.
    Network(NetworkArgs),
    /// Annotate posts or accounts with model responses.
    Enrich(EnrichArgs),
    /// Write one table as JSON Lines.
    Export(ExportArgs),
    /// Generate the synthetic fixture files and manifest.
    Fixtures(FixturesArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ingest(_) => "ingest",
            Command::Inspect(_) => "inspect",
            Command::Anonymize(_) => "anonymize",
            Command::Network(_) => "network",
            Command::Enrich(_) => "enrich",
            Command::Export(_) => "export",
            Command::Fixtures(_) => "fixtures",
        }
    }
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    store: String,
    #[arg(long)]
    adapter: String,
    /// Config file with extra adapter definitions.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Retrieval time for records without one. Pin it for reproducible
    /// output; defaults to the current time.
    #[arg(long)]
    retrieved_at: Option<Timestamp>,
    /// Stop at the first bad record instead of skipping it.
    #[arg(long)]
    fail_fast: bool,
    /// Start from an empty store.
    #[arg(long)]
    overwrite: bool,
    #[arg(long)]
    json: bool,
    #[arg(required = true)]
    files: Vec<PathBuf>,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    stores: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    tables: Option<Vec<String>>,
    /// Also write the full statistics as JSON to this path.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct AnonymizeArgs {
    #[arg(long)]
    config: PathBuf,
    /// Reinitialize an existing destination without asking.
    #[arg(long)]
    force: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum NetworkKind {
    Interaction,
    Cooccur,
    Bipartite,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Json,
    Tsv,
}

#[derive(Args)]
struct NetworkArgs {
    #[arg(value_enum)]
    kind: NetworkKind,
    #[arg(long)]
    store: String,
    #[arg(long, default_value = "SHARE")]
    interaction: ActionType,
    /// Entity type for co-occurrence and the bipartite right side, or DOMAIN
    /// for URL hosts.
    #[arg(long, default_value = "HASHTAG")]
    entity_type: String,
    #[arg(long)]
    start: Option<Timestamp>,
    #[arg(long)]
    end: Option<Timestamp>,
    /// Window length such as 90m, 1h or 1d; writes one file per window into
    /// the --out directory.
    #[arg(long, value_parser = duration::parse)]
    step: Option<chrono::Duration>,
    #[arg(long, default_value_t = 1)]
    min_weight: u64,
    #[arg(long, default_value = "COUNT")]
    weighting: Weighting,
    #[arg(long)]
    undirected: bool,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    format: OutputFormat,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct EnrichArgs {
    #[arg(long)]
    store: String,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    name: String,
    /// Timestamp for stored enrichments. Pin it for reproducible output.
    #[arg(long)]
    retrieved_at: Option<Timestamp>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    store: String,
    #[arg(long)]
    table: Table,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FixturesArgs {
    #[arg(long, default_value_t = smdt_core::fixtures::DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_env("SMDT_LOG").unwrap_or_else(|_| "warn".into()),
        )
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let name = cli.command.name();
    let result = match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Inspect(a) => inspect(a),
        Command::Anonymize(a) => anonymize(a),
        Command::Network(a) => network(a),
        Command::Enrich(a) => enrich(a),
        Command::Export(a) => export(a),
        Command::Fixtures(a) => fixtures(a),
    };
    match result {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("smdt {name}: error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn open(name: &str) -> Result<StoreHandle, Failure> {
    Ok(StoreHandle::open_existing(name)?)
}

fn json_out<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn ingest(a: IngestArgs) -> Result<String, Failure> {
    let registry = match &a.config {
        Some(path) => CliConfig::load(path)?.registry()?,
        None => smdt_core::standardizer::AdapterRegistry::with_builtins(),
    };
    if registry.get(&a.adapter).is_none() {
        return Err(Failure::Invalid(format!("--adapter: unknown adapter `{}`", a.adapter)));
    }
    let store = StoreHandle::init(&a.store, a.overwrite)?;
    let opts = IngestOptions {
        fail_fast: a.fail_fast,
        default_retrieved_at: a.retrieved_at,
        ..IngestOptions::default()
    };
    let r = run_ingestion(&store, &registry, &a.adapter, &a.files, &opts)?;
    Ok(if a.json { json_out(&r) } else { report::ingest(&r) })
}

fn inspect(a: InspectArgs) -> Result<String, Failure> {
    let tables = a.tables.as_deref().map(parse_tables).transpose()?;
    let mut reports = Vec::new();
    for name in &a.stores {
        reports.push(inspect_store(&open(name)?)?);
    }
    let text = report_schemas(&reports, tables.as_deref()).map_err(|e| match e {
        InspectError::Store(e) => e.into(),
        other => Failure::Invalid(other.to_string()),
    })?;
    if let Some(path) = &a.json {
        if let Some(only) = &tables {
            for r in &mut reports {
                r.tables.retain(|t, _| only.contains(t));
                r.availability.retain(|t, _| only.contains(t));
            }
        }
        write_file(path, &json_out(&reports))?;
    }
    Ok(text)
}

fn confirm_reinit(force: bool) -> impl FnMut(&Path) -> bool {
    move |path: &Path| {
        if force {
            return true;
        }
        if !std::io::stdin().is_terminal() {
            return false;
        }
        eprint!("destination {} exists; reinitialize it? [y/N] ", path.display());
        let _ = std::io::stderr().flush();
        let mut answer = String::new();
        std::io::stdin().read_line(&mut answer).is_ok() && matches!(answer.trim(), "y" | "Y" | "yes")
    }
}

fn anonymize(a: AnonymizeArgs) -> Result<String, Failure> {
    let cfg = CliConfig::load(&a.config)?;
    let section = cfg.anonymize.ok_or_else(|| Failure::Invalid("config: missing [anonymize] section".into()))?;
    let algorithm = section.algorithm()?;
    let pepper = section.pepper()?;
    let mut config = AnonymizeConfig::new(&section.src, &section.dst, pepper);
    config.algorithm = algorithm;
    config.output_hex_len = section.output_hex_len.unwrap_or(algorithm.hex_len());
    config.chunk_rows = section.chunk_rows;
    config.ask_reinit = section.ask_reinit;
    let policy = section.policy.clone().unwrap_or_else(AnonymizePolicy::default_policy);
    let r = run_anonymization(&config, &policy, &mut confirm_reinit(a.force))?;
    Ok(if a.json { json_out(&r) } else { report::anonymize(&section.dst, &r) })
}

fn right_side(s: &str) -> Result<BipartiteRight, Failure> {
    if s.eq_ignore_ascii_case("domain") {
        return Ok(BipartiteRight::Domain);
    }
    s.parse::<EntityType>().map(BipartiteRight::Entity).map_err(|e| Failure::Invalid(format!("--entity-type: {e}")))
}

fn render(network: &Network, format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => to_json(network),
        OutputFormat::Tsv => to_edge_list(network),
    }
}

fn network(a: NetworkArgs) -> Result<String, Failure> {
    let range = match (a.start, a.end) {
        (Some(s), Some(e)) => Some((s, e)),
        (None, None) => None,
        _ => return Err(Failure::Invalid("--start and --end must be given together".into())),
    };
    if a.step.is_some() && !matches!(a.kind, NetworkKind::Interaction) {
        return Err(Failure::Invalid("--step applies to interaction networks only".into()));
    }
    let store = open(&a.store)?;
    let single = |network: Network| -> Result<String, Failure> {
        write_file(&a.out, &render(&network, a.format))?;
        Ok(if a.json { json_out(&network.meta) } else { report::network(&a.out, &network) })
    };
    match a.kind {
        NetworkKind::Interaction => {
            let params = InteractionParams {
                interaction: a.interaction,
                time_range: range,
                weighting: a.weighting,
                min_weight: a.min_weight,
                directed: !a.undirected,
            };
            let Some(step) = a.step else {
                return single(build_user_interaction_network(&store, &params)?);
            };
            let (start, end) = range.ok_or_else(|| Failure::Invalid("--step requires --start and --end".into()))?;
            let windows = user_interaction_over_time(&store, &params, start, end, step)?;
            std::fs::create_dir_all(&a.out)
                .map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", a.out.display())))?;
            let ext = match a.format {
                OutputFormat::Json => "json",
                OutputFormat::Tsv => "tsv",
            };
            let mut files = Vec::new();
            for w in &windows {
                let name = format!("{}.{ext}", w.window_start.datetime().format("%Y%m%dT%H%M%SZ"));
                let path = a.out.join(&name);
                write_file(&path, &render(&w.network, a.format))?;
                files.push((name, w));
            }
            if a.json {
                let metas: Vec<_> = windows
                    .iter()
                    .map(|w| serde_json::json!({"window_start": w.window_start, "window_end": w.window_end, "meta": w.network.meta}))
                    .collect();
                Ok(json_out(&metas))
            } else {
                Ok(report::windows(&a.out, &files))
            }
        }
        NetworkKind::Cooccur => {
            let t: EntityType = a.entity_type.parse().map_err(|e| Failure::Invalid(format!("--entity-type: {e}")))?;
            single(build_cooccurrence_network(&store, t, range, a.min_weight)?)
        }
        NetworkKind::Bipartite => single(build_bipartite_network(&store, right_side(&a.entity_type)?, range, a.min_weight)?),
    }
}

fn enrich(a: EnrichArgs) -> Result<String, Failure> {
    let cfg = CliConfig::load(&a.config)?;
    let section = cfg
        .enrichers
        .get(&a.name)
        .ok_or_else(|| Failure::Invalid(format!("--name: no [enrichers.{}] section in config", a.name)))?;
    let mut config = section.to_config(&a.name)?;
    config.run_time = a.retrieved_at;
    let store = open(&a.store)?;
    let r = run_enricher(&a.name, &store, &config)?;
    Ok(if a.json { json_out(&r) } else { report::enrich(&r) })
}

fn export(a: ExportArgs) -> Result<String, Failure> {
    let n = open(&a.store)?.export_json(a.table, &a.out)?;
    Ok(format!("exported {n} {} rows to {}\n", a.table, a.out.display()))
}

fn fixtures(a: FixturesArgs) -> Result<String, Failure> {
    let m = smdt_core::fixtures::generate_fixtures(a.seed, &a.out).map_err(|e| Failure::Runtime(e.to_string()))?;
    Ok(if a.json { json_out(&m) } else { report::fixtures(&a.out, &m) })
}
