//! Line-delimited JSON interchange format, one block per line.
//!
//! ```json
//! {"height":0,"hash":"…","time":1477641360,"txs":[{"txid":"…","coinbase":true,
//!   "vin":[],"vout":[{"value_zat":1250000000,"script_id":"76a9…"}],"joinsplits":[]}]}
//! ```
//!
//! Amounts may be given as integer zatoshi (`value_zat`, `vpub_old_zat`,
//! `vpub_new_zat`) or as exact decimal coin strings (`value`, `vpub_old`,
//! `vpub_new`), but not both. Unknown keys are ignored.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{IngestBatch, IngestError, Source};
use crate::amount::Amount;
use crate::model::{BlockRecord, Hash256, JoinSplitRecord, OutPoint, TxOutput, TxRecord};

#[derive(Deserialize)]
struct InBlock {
    height: u64,
    hash: Hash256,
    time: i64,
    txs: Vec<InTx>,
}

#[derive(Deserialize)]
struct InTx {
    txid: Hash256,
    coinbase: bool,
    vin: Vec<InInput>,
    vout: Vec<InOutput>,
    joinsplits: Vec<InJoinSplit>,
    #[serde(default)]
    locktime: u32,
}

#[derive(Deserialize)]
struct InInput {
    txid: Hash256,
    vout: u32,
}

#[derive(Deserialize)]
struct InOutput {
    value_zat: Option<u64>,
    value: Option<String>,
    script_id: String,
}

#[derive(Deserialize)]
struct InJoinSplit {
    vpub_old_zat: Option<u64>,
    vpub_old: Option<String>,
    vpub_new_zat: Option<u64>,
    vpub_new: Option<String>,
}

fn pick_amount(zat: Option<u64>, coins: Option<&str>, field: &str) -> Result<Amount, String> {
    match (zat, coins) {
        (Some(z), None) => Amount::from_zat(z).ok_or_else(|| format!("{field}_zat {z} exceeds the coin cap")),
        (None, Some(s)) => Amount::parse_coins(s).map_err(|e| format!("{field}: {e}")),
        (Some(_), Some(_)) => Err(format!("both {field}_zat and {field} given")),
        (None, None) => Err(format!("missing {field}_zat")),
    }
}

fn convert(b: InBlock) -> Result<BlockRecord, String> {
    let mut txs = Vec::with_capacity(b.txs.len());
    for t in b.txs {
        let inputs = t.vin.into_iter().map(|i| OutPoint { txid: i.txid, vout: i.vout }).collect();
        let mut outputs = Vec::with_capacity(t.vout.len());
        for o in t.vout {
            let value = pick_amount(o.value_zat, o.value.as_deref(), "value")?;
            let script_id = hex::decode(&o.script_id).map_err(|e| format!("script_id: {e}"))?;
            outputs.push(TxOutput { value, script_id });
        }
        let mut joinsplits = Vec::with_capacity(t.joinsplits.len());
        for (i, js) in t.joinsplits.into_iter().enumerate() {
            joinsplits.push(JoinSplitRecord {
                txid: t.txid,
                js_index: i as u32,
                vpub_old: pick_amount(js.vpub_old_zat, js.vpub_old.as_deref(), "vpub_old")?,
                vpub_new: pick_amount(js.vpub_new_zat, js.vpub_new.as_deref(), "vpub_new")?,
            });
        }
        txs.push(TxRecord {
            txid: t.txid,
            is_coinbase: t.coinbase,
            inputs,
            outputs,
            joinsplits,
            lock_time: t.locktime,
        });
    }
    Ok(BlockRecord { height: b.height, hash: b.hash, time: b.time, txs })
}

/// Parses a single JSONL line into a block.
pub fn parse_block_line(line: &str) -> Result<BlockRecord, String> {
    let raw: InBlock = serde_json::from_str(line).map_err(|e| e.to_string())?;
    convert(raw)
}

/// Reads a whole JSONL stream. Blank lines are skipped.
pub fn read_jsonl<R: BufRead>(reader: R) -> Result<IngestBatch, IngestError> {
    let mut blocks: Vec<BlockRecord> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let block = parse_block_line(&line).map_err(|msg| IngestError::Schema { line: line_no, msg })?;
        block.validate().map_err(|e| IngestError::Schema { line: line_no, msg: e.to_string() })?;
        if let Some(prev) = blocks.last() {
            if block.height <= prev.height {
                return Err(IngestError::NonMonotonic { prev: prev.height, height: block.height });
            }
        }
        blocks.push(block);
    }
    Ok(IngestBatch { blocks, source: Source::Jsonl })
}

#[derive(Serialize)]
struct OutBlock {
    height: u64,
    hash: Hash256,
    time: i64,
    txs: Vec<OutTx>,
}

#[derive(Serialize)]
struct OutTx {
    txid: Hash256,
    coinbase: bool,
    vin: Vec<OutInput>,
    vout: Vec<OutOutput>,
    joinsplits: Vec<OutJoinSplit>,
    #[serde(skip_serializing_if = "is_zero")]
    locktime: u32,
}

fn is_zero(v: &u32) -> bool {
    *v == 0
}

#[derive(Serialize)]
struct OutInput {
    txid: Hash256,
    vout: u32,
}

#[derive(Serialize)]
struct OutOutput {
    value_zat: u64,
    script_id: String,
}

#[derive(Serialize)]
struct OutJoinSplit {
    vpub_old_zat: u64,
    vpub_new_zat: u64,
}

/// Canonical single-line JSON for a block.
pub fn block_to_line(b: &BlockRecord) -> String {
    let out = OutBlock {
        height: b.height,
        hash: b.hash,
        time: b.time,
        txs: b
            .txs
            .iter()
            .map(|t| OutTx {
                txid: t.txid,
                coinbase: t.is_coinbase,
                vin: t.inputs.iter().map(|i| OutInput { txid: i.txid, vout: i.vout }).collect(),
                vout: t
                    .outputs
                    .iter()
                    .map(|o| OutOutput { value_zat: o.value.as_zat(), script_id: hex::encode(&o.script_id) })
                    .collect(),
                joinsplits: t
                    .joinsplits
                    .iter()
                    .map(|j| OutJoinSplit { vpub_old_zat: j.vpub_old.as_zat(), vpub_new_zat: j.vpub_new.as_zat() })
                    .collect(),
                locktime: t.lock_time,
            })
            .collect(),
    };
    serde_json::to_string(&out).expect("block serializes")
}

pub fn write_jsonl<W: Write>(mut w: W, blocks: &[BlockRecord]) -> std::io::Result<()> {
    for b in blocks {
        writeln!(w, "{}", block_to_line(b))?;
    }
    Ok(())
}
