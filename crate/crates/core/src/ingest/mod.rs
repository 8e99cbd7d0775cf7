//! Bringing chain data into the canonical model.
//!
//! Three sources produce the same [`IngestBatch`]: the raw binary codec in
//! [`wire`], the JSONL interchange format in [`jsonl`], and a node JSON-RPC
//! client in [`rpc`].
//!
//! Txids are recomputed from the bytes for raw input. JSONL and RPC input
//! carry declared txids, which are trusted.

pub mod jsonl;
pub mod playback;
pub mod rpc;
pub mod varint;
pub mod wire;

use std::path::Path;

use thiserror::Error;

use crate::model::BlockRecord;
pub use jsonl::{read_jsonl, write_jsonl};
pub use rpc::{RpcClient, RpcError};
pub use varint::parse_varint;
pub use wire::{parse_transaction, serialize_transaction, WireLayoutConfig};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("truncated input while reading {context}")]
    Truncated { context: &'static str },
    #[error("non-canonical compact size: {value} encoded in {width} bytes")]
    NonCanonicalVarint { value: u64, width: usize },
    #[error("{context} count {declared} exceeds the {remaining} bytes left")]
    CountTooLarge { context: &'static str, declared: u64, remaining: usize },
    #[error("{context} value {raw} is above the coin cap")]
    AmountOutOfRange { context: &'static str, raw: u64 },
    #[error("unsupported transaction version {0:#x}")]
    UnsupportedVersion(u32),
    #[error("{extra} trailing bytes after {context}")]
    TrailingBytes { context: &'static str, extra: usize },
    #[error("bad wire layout: {0}")]
    BadLayout(String),
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error("line {line}: {msg}")]
    Schema { line: usize, msg: String },
    #[error("block heights not increasing: {height} after {prev}")]
    NonMonotonic { prev: u64, height: u64 },
    #[error("invalid height range {from}..={to}")]
    InvalidRange { from: u64, to: u64 },
    #[error("height {requested} is beyond the node tip {tip}")]
    BeyondTip { requested: u64, tip: u64 },
    #[error(transparent)]
    Rpc(#[from] RpcError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    RawFile,
    Jsonl,
    Rpc,
    Synthetic,
}

/// Height-ordered blocks from one source.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestBatch {
    pub blocks: Vec<BlockRecord>,
    pub source: Source,
}

impl IngestBatch {
    pub fn tx_count(&self) -> usize {
        self.blocks.iter().map(|b| b.txs.len()).sum()
    }

    pub fn joinsplit_count(&self) -> usize {
        self.blocks.iter().map(|b| b.joinsplits().count()).sum()
    }

    /// Checks per-block invariants and strictly increasing heights.
    pub fn validate(&self) -> Result<(), IngestError> {
        let mut prev: Option<u64> = None;
        for b in &self.blocks {
            b.validate().map_err(|e| IngestError::Schema { line: 0, msg: e.to_string() })?;
            if let Some(p) = prev {
                if b.height <= p {
                    return Err(IngestError::NonMonotonic { prev: p, height: b.height });
                }
            }
            prev = Some(b.height);
        }
        Ok(())
    }
}

pub fn read_raw_file(path: &Path, cfg: &WireLayoutConfig) -> Result<IngestBatch, IngestError> {
    let bytes = std::fs::read(path)?;
    let batch = IngestBatch { blocks: wire::read_raw_blocks(&bytes, cfg)?, source: Source::RawFile };
    batch.validate()?;
    Ok(batch)
}

pub fn read_jsonl_file(path: &Path) -> Result<IngestBatch, IngestError> {
    let f = std::fs::File::open(path)?;
    read_jsonl(std::io::BufReader::new(f))
}
