//! Writes the CSV, plot-data and Markdown report files for a chain into a
//! directory (default `./report`).

use zlinkage::report::{analytics_bundle, rtt_bundle, summary, ReportOptions};
use zlinkage::rtt::{build_report, detect, DetectConfig, DEFAULT_TOP_N};
use zlinkage::store::Snapshot;
use zlinkage::synth::{generate, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "report".into());
    let chain = Snapshot::try_from_batch(&generate(&SynthConfig::default())?.batch)?;
    let rtt = build_report(&chain, &detect(&chain, &DetectConfig::default())?, &DEFAULT_TOP_N)?;

    let opts = ReportOptions::default();
    let mut bundle = analytics_bundle(&chain, &opts)?;
    bundle.extend(rtt_bundle(&chain, &rtt, &opts));
    bundle.insert("summary.md", summary(&chain, Some(&rtt), &opts));
    bundle.write_to(std::path::Path::new(&out))?;
    for name in bundle.names() {
        println!("{out}/{name}");
    }
    Ok(())
}
