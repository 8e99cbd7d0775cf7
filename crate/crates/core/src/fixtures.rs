//! A small hand-built chain containing six well-known round trips from the
//! 2016–2017 Zcash chain, re-timed to sit in twelve consecutive blocks.
//!
//! Each shield transaction spends an input from outside the fixture (so its
//! fee is unknown), and each deshield transaction pays out its `vpub_new`
//! minus 0.0001 to a transparent output.

use crate::amount::Amount;
use crate::model::{BlockRecord, Hash256, JoinSplitRecord, OutPoint, TxOutput, TxRecord};
use crate::rtt::MatchKind;

pub const APPENDIX_BASE_HEIGHT: u64 = 1000;
/// 2017-01-01T00:00:00Z.
pub const APPENDIX_BASE_TIME: i64 = 1_483_228_800;

/// One expected match in the fixture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AppendixSample {
    pub shield_txid: &'static str,
    pub deshield_txid: &'static str,
    pub vpub_old: &'static str,
    pub vpub_new: &'static str,
    pub fee: &'static str,
    pub kind: MatchKind,
    pub delta_minutes: u64,
    pub bucket: &'static str,
}

pub const APPENDIX_SAMPLES: [AppendixSample; 6] = [
    AppendixSample {
        shield_txid: "a2c9f7ad3b1993c40e692da61966f8633d85cb96c07b8810c6b14493978f2b46",
        deshield_txid: "ab3b717b85a64541c6d4bb2da8c0806da9666fa1979e0f640c7f49c44fea3bca",
        vpub_old: "3479.51898254",
        vpub_new: "3479.51898254",
        fee: "0",
        kind: MatchKind::Exact,
        delta_minutes: 2,
        bucket: "[0, 5)",
    },
    AppendixSample {
        shield_txid: "d4e0047df31d0e1c8a7d311064314a74c43d0677ffcc430f8d093bb1867dd21b",
        deshield_txid: "b63f4948b405b91c28bd59affc06e12aa8e126cb1f101ab36e1114ee882bb0b3",
        vpub_old: "12.14981195",
        vpub_new: "12.14981195",
        fee: "0",
        kind: MatchKind::Exact,
        delta_minutes: 3,
        bucket: "[0, 5)",
    },
    AppendixSample {
        shield_txid: "a6c87c8e2f20b729a33fec7031b2ead3ec6a001e4aa4c575207c44f2690870e4",
        deshield_txid: "9f300ecfdfb6a8658f34bd469d74f401dd7233d7a610cb91faaeb4a2b3fdc299",
        vpub_old: "3.77326919",
        vpub_new: "3.77326919",
        fee: "0",
        kind: MatchKind::Exact,
        delta_minutes: 928,
        bucket: "[120, 1440)",
    },
    AppendixSample {
        shield_txid: "709e38ab58148f6b2a3eb56621ea502790270386b7c6648baf06a510cf48efaa",
        deshield_txid: "9f300ecfdfb6a8658f34bd469d74f401dd7233d7a610cb91faaeb4a2b3fdc299",
        vpub_old: "220.01805591",
        vpub_new: "220.01805591",
        fee: "0",
        kind: MatchKind::Exact,
        delta_minutes: 15,
        bucket: "[15, 30)",
    },
    AppendixSample {
        shield_txid: "2641aeece9df50c5275b692a20da6f900a1a42440adc454765d7f3e6a1b1aeef",
        deshield_txid: "4d83b22ab6967c83f11e4cb6f417623c553364ddc5c8d658027356bc28fa6f1a",
        vpub_old: "0.67209594",
        vpub_new: "0.67199594",
        fee: "0.0001",
        kind: MatchKind::Fee1,
        delta_minutes: 8,
        bucket: "[5, 15)",
    },
    AppendixSample {
        shield_txid: "84a11d9794e0eb318327dd960b7bfa4e1146855fcb1f0aaf6eb40ceadaf9ecbb",
        deshield_txid: "855e94b007d66f1ee283374c91b559d02fa397079d6f9b5b9012a668680efd71",
        vpub_old: "6.3805",
        vpub_new: "6.3794",
        fee: "0.0011",
        kind: MatchKind::Fee2,
        delta_minutes: 35,
        bucket: "[30, 60)",
    },
];

fn coins(s: &str) -> Amount {
    Amount::parse_coins(s).expect("fixture amount")
}

fn txid(hex: &str) -> Hash256 {
    Hash256::from_display_hex(hex).expect("fixture txid")
}

fn coinbase(height: u64) -> TxRecord {
    let mut tx = TxRecord {
        txid: Hash256::ZERO,
        is_coinbase: true,
        inputs: vec![],
        outputs: vec![TxOutput { value: Amount::zat(1_250_000_000), script_id: b"miner".to_vec() }],
        joinsplits: vec![],
        lock_time: 0,
    };
    tx.set_txid(Hash256::double_sha256(format!("appendix coinbase {height}").as_bytes()));
    tx
}

fn shield(id: &str, amount: &str) -> TxRecord {
    let mut tx = TxRecord {
        txid: Hash256::ZERO,
        is_coinbase: false,
        inputs: vec![OutPoint { txid: Hash256::double_sha256(id.as_bytes()), vout: 0 }],
        outputs: vec![],
        joinsplits: vec![JoinSplitRecord {
            txid: Hash256::ZERO,
            js_index: 0,
            vpub_old: coins(amount),
            vpub_new: Amount::ZERO,
        }],
        lock_time: 0,
    };
    tx.set_txid(txid(id));
    tx
}

fn deshield(id: &str, amounts: &[&str]) -> TxRecord {
    let fee = Amount::zat(10_000);
    let mut tx = TxRecord {
        txid: Hash256::ZERO,
        is_coinbase: false,
        inputs: vec![],
        outputs: amounts.iter().map(|a| TxOutput { value: coins(a) - fee, script_id: id.as_bytes()[..8].to_vec() }).collect(),
        joinsplits: amounts
            .iter()
            .map(|a| JoinSplitRecord { txid: Hash256::ZERO, js_index: 0, vpub_old: Amount::ZERO, vpub_new: coins(a) })
            .collect(),
        lock_time: 0,
    };
    // Only one fee is paid per transaction; fold the others back into the first output.
    let extra = Amount::zat(fee.as_zat() * (amounts.len() as u64 - 1));
    tx.outputs[0].value = tx.outputs[0].value + extra;
    tx.set_txid(txid(id));
    tx
}

/// The fixture chain: heights 1000..=1011.
pub fn appendix_chain() -> Vec<BlockRecord> {
    let s = &APPENDIX_SAMPLES;
    let events: Vec<(i64, Vec<TxRecord>)> = vec![
        (0, vec![]),
        (150, vec![shield(s[2].shield_txid, s[2].vpub_old)]),
        (300, vec![shield(s[0].shield_txid, s[0].vpub_old)]),
        (420, vec![deshield(s[0].deshield_txid, &[s[0].vpub_new])]),
        (600, vec![shield(s[1].shield_txid, s[1].vpub_old)]),
        (780, vec![deshield(s[1].deshield_txid, &[s[1].vpub_new])]),
        (900, vec![shield(s[4].shield_txid, s[4].vpub_old)]),
        (1380, vec![deshield(s[4].deshield_txid, &[s[4].vpub_new])]),
        (1500, vec![shield(s[5].shield_txid, s[5].vpub_old)]),
        (3600, vec![deshield(s[5].deshield_txid, &[s[5].vpub_new])]),
        (54_930, vec![shield(s[3].shield_txid, s[3].vpub_old)]),
        (55_830, vec![deshield(s[2].deshield_txid, &[s[2].vpub_new, s[3].vpub_new])]),
    ];
    events
        .into_iter()
        .enumerate()
        .map(|(i, (offset, txs))| {
            let height = APPENDIX_BASE_HEIGHT + i as u64;
            let mut all = vec![coinbase(height)];
            all.extend(txs);
            BlockRecord {
                height,
                hash: Hash256::double_sha256(format!("appendix block {height}").as_bytes()),
                time: APPENDIX_BASE_TIME + offset,
                txs: all,
            }
        })
        .collect()
}

/// The fixture chain in the canonical JSONL format.
pub fn appendix_jsonl() -> String {
    let mut out = Vec::new();
    crate::ingest::jsonl::write_jsonl(&mut out, &appendix_chain()).expect("write to memory");
    String::from_utf8(out).expect("jsonl is utf-8")
}
