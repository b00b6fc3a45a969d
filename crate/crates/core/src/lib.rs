//! Standardization toolkit for heterogeneous social media datasets.
//!
//! Raw platform exports are mapped by [`standardizer`] adapters into the
//! unified relational schema held by [`store`]. On top of a store the crate
//! provides field-availability profiling ([`inspector`]), peppered-hash
//! pseudonymization ([`anonymizer`]), interaction and co-occurrence graphs
//! ([`networks`]) and model-backed enrichment runs ([`enricher`]).
//! [`fixtures`] generates deterministic synthetic inputs for all of them.

pub mod anonymizer;
pub mod enricher;
pub mod fixtures;
pub mod inspector;
pub mod networks;
pub mod secret;
pub mod standardizer;
pub mod store;
pub mod timestamp;

pub use store::{init_store, Filter, InsertReport, Record, StoreError, StoreHandle, Table};
pub use timestamp::Timestamp;
