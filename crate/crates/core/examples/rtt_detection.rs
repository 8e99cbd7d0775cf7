//! Exact and fee-adjusted round-trip detection on a synthetic chain, with
//! the time-to-return and top-N coverage tables.

use zlinkage::rtt::{build_report, detect, DetectConfig, DEFAULT_TOP_N};
use zlinkage::store::Snapshot;
use zlinkage::synth::{generate, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let chain = Snapshot::try_from_batch(&generate(&SynthConfig { seed: 5, n_blocks: 800, ..Default::default() })?.batch)?;
    let detection = detect(&chain, &DetectConfig::default())?;
    let report = build_report(&chain, &detection, &DEFAULT_TOP_N)?;

    println!("exact {}  1-fee {}  2-fee {}", report.exact_count, report.fee1_count, report.fee2_count);
    println!("matched coins {} of {} shielded ({}%)", report.matched_coin_total, report.shielded_inflow_total, report.matched_coin_share().percent_1dp());
    for row in &report.time_buckets_exact {
        println!("{:12} {:4} {}", row.label(), row.count, row.coins);
    }
    for row in &report.top_n {
        println!("top {:5}: {} of {} matched", row.n, row.matched, row.considered);
    }
    for row in report.fee2_table.iter().filter(|r| r.count > 0) {
        println!("fee {} = {:?}: {}", row.fee, row.parts.iter().map(ToString::to_string).collect::<Vec<_>>(), row.count);
    }
    Ok(())
}
