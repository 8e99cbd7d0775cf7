//! Raw transaction and block-file codec.
//!
//! Transactions follow the Sprout-era layout: the Bitcoin transparent
//! fields, then (from `tx_version_with_joinsplits` on) a list of JoinSplit
//! descriptions. Only the two public amounts of a JoinSplit are decoded; the
//! remaining fields are skipped by their configured lengths.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::varint::{parse_varint, write_varint};
use super::WireError;
use crate::amount::Amount;
use crate::model::{BlockRecord, Hash256, JoinSplitRecord, OutPoint, TxOutput, TxRecord};

const OVERWINTER_FLAG: u32 = 1 << 31;
const NULL_VOUT: u32 = 0xffff_ffff;
const FINAL_SEQUENCE: u32 = 0xffff_ffff;

// Smallest possible encodings, used to bound declared counts.
const MIN_INPUT_LEN: usize = 32 + 4 + 1 + 4;
const MIN_OUTPUT_LEN: usize = 8 + 1;

/// Byte lengths of the opaque parts of a transaction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct WireLayoutConfig {
    pub anchor: usize,
    pub nullifiers: usize,
    pub commitments: usize,
    pub ephemeral_key: usize,
    pub random_seed: usize,
    pub macs: usize,
    pub proof: usize,
    pub ciphertexts: usize,
    /// Trailing per-transaction key and signature, present when a
    /// transaction has at least one JoinSplit.
    pub joinsplit_pubkey: usize,
    pub joinsplit_sig: usize,
    pub tx_version_with_joinsplits: u32,
}

impl Default for WireLayoutConfig {
    /// Sprout parameters: two 32-byte nullifiers and commitments, 296-byte
    /// PHGR13 proof, two 601-byte note ciphertexts.
    fn default() -> Self {
        WireLayoutConfig {
            anchor: 32,
            nullifiers: 64,
            commitments: 64,
            ephemeral_key: 32,
            random_seed: 32,
            macs: 64,
            proof: 296,
            ciphertexts: 1202,
            joinsplit_pubkey: 32,
            joinsplit_sig: 64,
            tx_version_with_joinsplits: 2,
        }
    }
}

impl WireLayoutConfig {
    fn opaque_lengths(&self) -> [(&'static str, usize); 8] {
        [
            ("anchor", self.anchor),
            ("nullifiers", self.nullifiers),
            ("commitments", self.commitments),
            ("ephemeral_key", self.ephemeral_key),
            ("random_seed", self.random_seed),
            ("macs", self.macs),
            ("proof", self.proof),
            ("ciphertexts", self.ciphertexts),
        ]
    }

    pub fn validate(&self) -> Result<(), WireError> {
        for (name, len) in self.opaque_lengths() {
            if len == 0 {
                return Err(WireError::BadLayout(format!("{name} length must be positive")));
            }
        }
        if self.joinsplit_pubkey == 0 || self.joinsplit_sig == 0 {
            return Err(WireError::BadLayout("joinsplit key/signature lengths must be positive".into()));
        }
        if self.tx_version_with_joinsplits < 2 {
            return Err(WireError::BadLayout("joinsplit version must be at least 2".into()));
        }
        Ok(())
    }

    /// Size of one serialized JoinSplit description.
    pub fn joinsplit_size(&self) -> usize {
        16 + self.opaque_lengths().iter().map(|(_, l)| l).sum::<usize>()
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn take(&mut self, n: usize, context: &'static str) -> Result<&'a [u8], WireError> {
        if self.remaining() < n {
            return Err(WireError::Truncated { context });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, context: &'static str) -> Result<u32, WireError> {
        Ok(u32::from_le_bytes(self.take(4, context)?.try_into().unwrap()))
    }

    fn u64(&mut self, context: &'static str) -> Result<u64, WireError> {
        Ok(u64::from_le_bytes(self.take(8, context)?.try_into().unwrap()))
    }

    fn hash(&mut self, context: &'static str) -> Result<Hash256, WireError> {
        Ok(Hash256(self.take(32, context)?.try_into().unwrap()))
    }

    fn varint(&mut self) -> Result<u64, WireError> {
        let (v, n) = parse_varint(&self.buf[self.pos..])?;
        self.pos += n;
        Ok(v)
    }

    /// Reads an element count and checks it against the bytes left.
    fn count(&mut self, min_elem: usize, context: &'static str) -> Result<usize, WireError> {
        let declared = self.varint()?;
        let fits = usize::try_from(declared)
            .ok()
            .and_then(|n| n.checked_mul(min_elem))
            .is_some_and(|need| need <= self.remaining());
        if !fits {
            return Err(WireError::CountTooLarge { context, declared, remaining: self.remaining() });
        }
        Ok(declared as usize)
    }

    fn amount(&mut self, context: &'static str) -> Result<Amount, WireError> {
        let raw = self.u64(context)?;
        Amount::from_zat(raw).ok_or(WireError::AmountOutOfRange { context, raw })
    }
}

/// Parses one transaction from the front of `bytes`.
///
/// Returns the record and the number of bytes consumed. The txid is the
/// double SHA-256 of exactly those bytes.
pub fn parse_transaction(bytes: &[u8], cfg: &WireLayoutConfig) -> Result<(TxRecord, usize), WireError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let version = r.u32("version")?;
    if version & OVERWINTER_FLAG != 0 || version == 0 {
        return Err(WireError::UnsupportedVersion(version));
    }

    let n_in = r.count(MIN_INPUT_LEN, "inputs")?;
    let mut inputs = Vec::with_capacity(n_in);
    for _ in 0..n_in {
        let txid = r.hash("input prevout")?;
        let vout = r.u32("input prevout")?;
        let script_len = r.count(1, "input script")?;
        r.take(script_len, "input script")?;
        r.u32("input sequence")?;
        inputs.push(OutPoint { txid, vout });
    }
    let is_coinbase = inputs.len() == 1 && inputs[0].txid == Hash256::ZERO && inputs[0].vout == NULL_VOUT;
    if is_coinbase {
        inputs.clear();
    }

    let n_out = r.count(MIN_OUTPUT_LEN, "outputs")?;
    let mut outputs = Vec::with_capacity(n_out);
    for _ in 0..n_out {
        let value = r.amount("output value")?;
        let script_len = r.count(1, "output script")?;
        let script_id = r.take(script_len, "output script")?.to_vec();
        outputs.push(TxOutput { value, script_id });
    }
    let lock_time = r.u32("lock time")?;

    let mut joinsplits = Vec::new();
    if version >= cfg.tx_version_with_joinsplits {
        let n_js = r.count(cfg.joinsplit_size(), "joinsplits")?;
        joinsplits.reserve(n_js);
        for i in 0..n_js {
            let vpub_old = r.amount("vpub_old")?;
            let vpub_new = r.amount("vpub_new")?;
            for (name, len) in cfg.opaque_lengths() {
                r.take(len, name)?;
            }
            joinsplits.push(JoinSplitRecord { txid: Hash256::ZERO, js_index: i as u32, vpub_old, vpub_new });
        }
        if n_js > 0 {
            r.take(cfg.joinsplit_pubkey, "joinsplit pubkey")?;
            r.take(cfg.joinsplit_sig, "joinsplit signature")?;
        }
    }

    let consumed = r.pos;
    let mut tx = TxRecord { txid: Hash256::ZERO, is_coinbase, inputs, outputs, joinsplits, lock_time };
    tx.set_txid(Hash256::double_sha256(&bytes[..consumed]));
    Ok((tx, consumed))
}

/// Serializes a record in the layout [`parse_transaction`] reads.
///
/// Fields the record does not carry (input scripts, sequences, JoinSplit
/// opaque data) are written as empty scripts, final sequences and zero bytes.
pub fn serialize_transaction(tx: &TxRecord, cfg: &WireLayoutConfig) -> Vec<u8> {
    let version = if tx.joinsplits.is_empty() { 1 } else { cfg.tx_version_with_joinsplits };
    let mut out = Vec::with_capacity(64 + tx.joinsplits.len() * cfg.joinsplit_size());
    out.extend_from_slice(&version.to_le_bytes());

    if tx.is_coinbase {
        write_varint(&mut out, 1);
        out.extend_from_slice(&Hash256::ZERO.0);
        out.extend_from_slice(&NULL_VOUT.to_le_bytes());
        write_varint(&mut out, 0);
        out.extend_from_slice(&FINAL_SEQUENCE.to_le_bytes());
    } else {
        write_varint(&mut out, tx.inputs.len() as u64);
        for input in &tx.inputs {
            out.extend_from_slice(&input.txid.0);
            out.extend_from_slice(&input.vout.to_le_bytes());
            write_varint(&mut out, 0);
            out.extend_from_slice(&FINAL_SEQUENCE.to_le_bytes());
        }
    }

    write_varint(&mut out, tx.outputs.len() as u64);
    for o in &tx.outputs {
        out.extend_from_slice(&o.value.as_zat().to_le_bytes());
        write_varint(&mut out, o.script_id.len() as u64);
        out.extend_from_slice(&o.script_id);
    }
    out.extend_from_slice(&tx.lock_time.to_le_bytes());

    if version >= cfg.tx_version_with_joinsplits {
        write_varint(&mut out, tx.joinsplits.len() as u64);
        for js in &tx.joinsplits {
            out.extend_from_slice(&js.vpub_old.as_zat().to_le_bytes());
            out.extend_from_slice(&js.vpub_new.as_zat().to_le_bytes());
            out.resize(out.len() + cfg.joinsplit_size() - 16, 0);
        }
        if !tx.joinsplits.is_empty() {
            out.resize(out.len() + cfg.joinsplit_pubkey + cfg.joinsplit_sig, 0);
        }
    }
    out
}

/// The txid this record would have once serialized.
pub fn compute_txid(tx: &TxRecord, cfg: &WireLayoutConfig) -> Hash256 {
    Hash256::double_sha256(&serialize_transaction(tx, cfg))
}

/// Serializes blocks into the raw chain-file layout.
///
/// Each block is `u32 length || payload`, where the payload is
/// `u64 height || hash[32] || i64 time || compact-size tx count` followed by
/// `u32 length || transaction bytes` per transaction. Integers are
/// little-endian; the hash is in wire order.
pub fn write_raw_blocks(blocks: &[BlockRecord], cfg: &WireLayoutConfig) -> Vec<u8> {
    let mut out = Vec::new();
    for b in blocks {
        let mut payload = Vec::new();
        payload.extend_from_slice(&b.height.to_le_bytes());
        payload.extend_from_slice(&b.hash.0);
        payload.extend_from_slice(&b.time.to_le_bytes());
        write_varint(&mut payload, b.txs.len() as u64);
        for tx in &b.txs {
            let raw = serialize_transaction(tx, cfg);
            payload.extend_from_slice(&(raw.len() as u32).to_le_bytes());
            payload.extend_from_slice(&raw);
        }
        out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
        out.extend_from_slice(&payload);
    }
    out
}

fn parse_block_payload(payload: &[u8], cfg: &WireLayoutConfig) -> Result<BlockRecord, WireError> {
    let mut r = Reader { buf: payload, pos: 0 };
    let height = r.u64("block height")?;
    let hash = r.hash("block hash")?;
    let time = r.u64("block time")? as i64;
    let n_tx = r.count(4, "block transactions")?;
    let mut txs = Vec::with_capacity(n_tx);
    for _ in 0..n_tx {
        let len = r.u32("transaction length")? as usize;
        let raw = r.take(len, "transaction")?;
        let (tx, used) = parse_transaction(raw, cfg)?;
        if used != len {
            return Err(WireError::TrailingBytes { context: "transaction record", extra: len - used });
        }
        txs.push(tx);
    }
    if r.remaining() != 0 {
        return Err(WireError::TrailingBytes { context: "block record", extra: r.remaining() });
    }
    Ok(BlockRecord { height, hash, time, txs })
}

/// Parses a raw chain file. Blocks are decoded in parallel and returned in
/// file order.
pub fn read_raw_blocks(bytes: &[u8], cfg: &WireLayoutConfig) -> Result<Vec<BlockRecord>, WireError> {
    cfg.validate()?;
    let mut payloads = Vec::new();
    let mut r = Reader { buf: bytes, pos: 0 };
    while r.remaining() > 0 {
        let len = r.u32("block length")? as usize;
        payloads.push(r.take(len, "block record")?);
    }
    payloads.par_iter().map(|p| parse_block_payload(p, cfg)).collect()
}
