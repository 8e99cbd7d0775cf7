#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use zlinkage::amount::Amount;
use zlinkage::model::{BlockRecord, Hash256, JoinSplitRecord, TxOutput, TxRecord};
use zlinkage::synth::{generate, RttBehavior, SynthConfig, Synthetic};

pub fn synthetic(seed: u64, n_blocks: u64) -> Synthetic {
    generate(&SynthConfig { seed, n_blocks, ..Default::default() }).expect("valid config")
}

/// Small chains with few planted links and frequent amount reuse, sized for
/// the brute-force oracle.
pub fn oracle_config(seed: u64) -> SynthConfig {
    SynthConfig {
        seed,
        n_blocks: 20 + seed % 31,
        txs_per_block_max: 8,
        fraction_tx_with_joinsplit: 0.4,
        rtt: RttBehavior {
            planted_exact_count: 3,
            planted_fee1_count: 1,
            planted_fee2_count: 1,
            delay_max_minutes: 60,
            fee_delay_max_minutes: 60,
            collision_rate: 0.3,
            ..Default::default()
        },
        ..Default::default()
    }
}

fn hash_of(tag: u8, n: u64) -> Hash256 {
    let mut h = [0u8; 32];
    h[0] = tag;
    h[1..9].copy_from_slice(&n.to_le_bytes());
    Hash256(h)
}

/// A large chain built directly as records, skipping wire serialization.
/// Half the JoinSplits shield and half deshield; a fraction of deshields
/// reuse an earlier shielding amount so the detector has work to do.
pub fn bulk_chain(n_joinsplits: u64, per_block: u64, seed: u64) -> Vec<BlockRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shielded: Vec<Amount> = Vec::new();
    let mut blocks = Vec::new();
    let mut js_made = 0;
    let mut tx_n = 0u64;
    let mut height = 0;
    while js_made < n_joinsplits {
        let coinbase = TxRecord {
            txid: hash_of(1, height),
            is_coinbase: true,
            inputs: vec![],
            outputs: vec![TxOutput { value: Amount::zat(1_250_000_000), script_id: vec![0] }],
            joinsplits: vec![],
            lock_time: 0,
        };
        let mut txs = vec![coinbase];
        for _ in 0..per_block.min(n_joinsplits - js_made) {
            let txid = hash_of(2, tx_n);
            tx_n += 1;
            let (old, new) = if rng.random_bool(0.5) || shielded.is_empty() {
                let a = Amount::zat(rng.random_range(10_000..1_000_000_000_000));
                shielded.push(a);
                (a, Amount::ZERO)
            } else if rng.random_bool(0.3) {
                (Amount::ZERO, shielded[rng.random_range(0..shielded.len())])
            } else {
                (Amount::ZERO, Amount::zat(rng.random_range(10_000..1_000_000_000_000)))
            };
            txs.push(TxRecord {
                txid,
                is_coinbase: false,
                inputs: vec![],
                outputs: vec![],
                joinsplits: vec![JoinSplitRecord { txid, js_index: 0, vpub_old: old, vpub_new: new }],
                lock_time: 0,
            });
            js_made += 1;
        }
        blocks.push(BlockRecord { height, hash: hash_of(3, height), time: 1_500_000_000 + height as i64 * 150, txs });
        height += 1;
    }
    blocks
}
