//! Generates chains with planted round trips and scores the detector
//! against the ground truth, with and without amount collisions.

use zlinkage::rtt::{detect, DetectConfig};
use zlinkage::store::Snapshot;
use zlinkage::synth::{generate, score, RttBehavior, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for collision_rate in [0.0, 0.3] {
        let cfg = SynthConfig { seed: 21, n_blocks: 600, rtt: RttBehavior { collision_rate, ..Default::default() }, ..Default::default() };
        let synthetic = generate(&cfg)?;
        let chain = Snapshot::try_from_batch(&synthetic.batch)?;
        let found = detect(&chain, &DetectConfig::default())?.all();
        let s = score(&chain, &found, &synthetic.truth)?;
        println!(
            "collision rate {collision_rate}: precision {} recall {} (tp {} fp {} fn {})",
            s.precision().decimal_string(3),
            s.recall().decimal_string(3),
            s.true_positives,
            s.false_positives,
            s.false_negatives
        );
    }
    Ok(())
}
