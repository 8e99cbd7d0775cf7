//! Replays the six published round-trip samples and prints how each one
//! is classified. With a path argument, also writes the fixture as JSONL.
//!
//! ```text
//! cargo run --example appendix_replay -- tests/data/appendix.jsonl
//! ```

use zlinkage::fixtures::{appendix_chain, appendix_jsonl};
use zlinkage::rtt::{bucket_by_time, detect, DetectConfig, TIME_BUCKET_LABELS};
use zlinkage::store::Snapshot;

fn main() {
    let chain = Snapshot::from_blocks(appendix_chain());
    let detection = detect(&chain, &DetectConfig::default()).expect("default fees are valid");

    for m in detection.all() {
        println!(
            "{:5}  {} -> {}  {} coins  fee {}  {} min",
            m.kind.label(),
            m.shield.js.txid,
            m.deshield.js.txid,
            m.amount,
            m.fee_adjustment,
            m.delta_minutes
        );
    }
    println!();
    for (row, label) in bucket_by_time(&detection.exact).iter().zip(TIME_BUCKET_LABELS) {
        println!("{label:12} {}", row.count);
    }

    if let Some(path) = std::env::args().nth(1) {
        std::fs::write(&path, appendix_jsonl()).expect("write fixture");
        println!("\nwrote {path}");
    }
}
