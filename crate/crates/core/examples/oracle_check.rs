//! Compares the indexed exact detector with a brute-force all-pairs scan
//! over a range of small random chains.

use zlinkage::rtt::find_exact_rtts;
use zlinkage::store::Snapshot;
use zlinkage::synth::{generate, oracle_exact_rtts, RttBehavior, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut matches = 0;
    for seed in 1..=40 {
        let rtt = RttBehavior { planted_exact_count: 4, planted_fee1_count: 1, planted_fee2_count: 1, collision_rate: 0.25, ..Default::default() };
        let batch = generate(&SynthConfig { seed, n_blocks: 40, rtt, ..Default::default() })?.batch;
        let oracle = oracle_exact_rtts(&batch)?;
        let snapshot = Snapshot::try_from_batch(&batch)?;
        let indexed = find_exact_rtts(&snapshot);
        assert_eq!(oracle, indexed, "seed {seed}");
        matches += indexed.len();
    }
    println!("40 chains agree ({matches} exact matches in total)");
    Ok(())
}
