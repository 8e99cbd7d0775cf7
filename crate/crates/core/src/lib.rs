//! Indexing and analysis of Zcash-style chains with Sprout JoinSplits.
//!
//! Blocks come in from raw wire files, JSON lines or a node's JSON-RPC
//! interface, land in an append-only [`store`], and are analysed from
//! immutable snapshots: pool and participation statistics in
//! [`analytics`], round-trip transaction linking in [`rtt`]. The [`synth`]
//! module generates chains with known, planted links for evaluation.
//!
//! Each capability has a runnable example:
//!
//! ```text
//! cargo run --example ingest_sources    # raw / JSONL / RPC agree
//! cargo run --example store_snapshots   # append, snapshot, reload
//! cargo run --example pool_analytics    # census, pool series, fees
//! cargo run --example rtt_detection     # exact and fee-adjusted matching
//! cargo run --example appendix_replay   # six known round trips
//! cargo run --example synth_eval        # precision / recall on planted links
//! cargo run --example oracle_check      # indexed vs brute-force detector
//! cargo run --example write_reports     # CSV, .dat and Markdown outputs
//! ```

pub mod amount;
pub mod analytics;
pub mod cli;
pub mod config;
pub mod fixtures;
pub mod ingest;
pub mod model;
pub mod ratio;
pub mod report;
pub mod rtt;
pub mod store;
pub mod synth;
