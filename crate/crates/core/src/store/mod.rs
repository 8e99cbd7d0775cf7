//! Queryable chain index with snapshot reads and optional file persistence.
//!
//! A [`Store`] has one writer. Readers take a [`Snapshot`], an immutable
//! view that later appends never touch: appends go through
//! copy-on-write on the shared index, so an open snapshot keeps the version
//! it was taken from.

pub mod codec;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::ops::Deref;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::amount::Amount;
use crate::ingest::IngestBatch;
use crate::model::{BlockRecord, Hash256, JoinSplitKind, JsRef, OutPoint, RecordError, TxRecord};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("height gap: expected block {expected}, got {got}")]
    HeightGap { expected: u64, got: u64 },
    #[error("block {height} conflicts with the stored block {stored}")]
    Conflict { height: u64, stored: Hash256 },
    #[error("duplicate txid {0}")]
    DuplicateTxid(Hash256),
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error("store is locked by another writer ({0})")]
    Locked(PathBuf),
    #[error("store file is corrupt: {0}")]
    Corrupt(String),
    #[error("unsupported store format version {0}")]
    Version(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A JoinSplit entry in an amount bucket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct JsEntry {
    pub height: u64,
    pub js: JsRef,
    pub time: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct TxLocation {
    height: u64,
    position: u32,
}

/// The in-memory indexes over a contiguous run of blocks.
#[derive(Debug, Clone, Default)]
pub struct ChainIndex {
    blocks: Vec<Arc<BlockRecord>>,
    tx_by_id: HashMap<Hash256, TxLocation>,
    shieldings: BTreeMap<Amount, Vec<JsEntry>>,
    deshieldings: BTreeMap<Amount, Vec<JsEntry>>,
    /// Every output ever created, spent or not.
    values: HashMap<OutPoint, Amount>,
    unspent: HashSet<OutPoint>,
    unresolved_inputs: u64,
    joinsplit_count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AppendSummary {
    pub tip: Option<u64>,
    pub new_blocks: usize,
    pub skipped_blocks: usize,
    pub new_txs: usize,
    pub new_joinsplits: usize,
}

impl ChainIndex {
    pub fn base_height(&self) -> Option<u64> {
        self.blocks.first().map(|b| b.height)
    }

    pub fn tip_height(&self) -> Option<u64> {
        self.blocks.last().map(|b| b.height)
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn tx_count(&self) -> usize {
        self.tx_by_id.len()
    }

    pub fn joinsplit_count(&self) -> u64 {
        self.joinsplit_count
    }

    pub fn unresolved_input_count(&self) -> u64 {
        self.unresolved_inputs
    }

    pub fn blocks(&self) -> impl DoubleEndedIterator<Item = &BlockRecord> + ExactSizeIterator {
        self.blocks.iter().map(|b| b.as_ref())
    }

    pub fn block(&self, height: u64) -> Option<&BlockRecord> {
        let base = self.base_height()?;
        let i = usize::try_from(height.checked_sub(base)?).ok()?;
        self.blocks.get(i).map(|b| b.as_ref())
    }

    /// The transaction and the block that holds it.
    pub fn tx(&self, txid: &Hash256) -> Option<(&BlockRecord, &TxRecord)> {
        let loc = self.tx_by_id.get(txid)?;
        let block = self.block(loc.height)?;
        Some((block, &block.txs[loc.position as usize]))
    }

    /// Shielding-side JoinSplits with exactly `vpub_old == amount`, ordered
    /// by (height, txid, js_index).
    pub fn joinsplits_with_vpub_old(&self, amount: Amount) -> &[JsEntry] {
        self.shieldings.get(&amount).map_or(&[], Vec::as_slice)
    }

    /// Deshielding-side JoinSplits with exactly `vpub_new == amount`.
    pub fn joinsplits_with_vpub_new(&self, amount: Amount) -> &[JsEntry] {
        self.deshieldings.get(&amount).map_or(&[], Vec::as_slice)
    }

    pub fn shielding_buckets(&self) -> impl DoubleEndedIterator<Item = (Amount, &[JsEntry])> {
        self.shieldings.iter().map(|(a, v)| (*a, v.as_slice()))
    }

    pub fn deshielding_buckets(&self) -> impl DoubleEndedIterator<Item = (Amount, &[JsEntry])> {
        self.deshieldings.iter().map(|(a, v)| (*a, v.as_slice()))
    }

    /// Value of a previously created output, spent or unspent.
    pub fn resolve_input_value(&self, prev: &OutPoint) -> Option<Amount> {
        self.values.get(prev).copied()
    }

    pub fn is_unspent(&self, out: &OutPoint) -> bool {
        self.unspent.contains(out)
    }

    pub fn unspent_count(&self) -> usize {
        self.unspent.len()
    }

    fn check_block(&self, b: &BlockRecord) -> Result<bool, StoreError> {
        if let Some(stored) = self.block(b.height) {
            if stored == b {
                return Ok(false);
            }
            return Err(StoreError::Conflict { height: b.height, stored: stored.hash });
        }
        if let Some(tip) = self.tip_height() {
            if b.height != tip + 1 {
                return Err(StoreError::HeightGap { expected: tip + 1, got: b.height });
            }
        }
        b.validate()?;
        for tx in &b.txs {
            if self.tx_by_id.contains_key(&tx.txid) {
                return Err(StoreError::DuplicateTxid(tx.txid));
            }
        }
        Ok(true)
    }

    /// Validates then indexes one block. Nothing is modified on error.
    /// Returns `false` when the identical block was already stored.
    pub fn push_block(&mut self, block: BlockRecord) -> Result<bool, StoreError> {
        if !self.check_block(&block)? {
            return Ok(false);
        }
        let height = block.height;
        let mut shield_new: Vec<(Amount, JsEntry)> = Vec::new();
        let mut deshield_new: Vec<(Amount, JsEntry)> = Vec::new();
        for (pos, tx) in block.txs.iter().enumerate() {
            self.tx_by_id.insert(tx.txid, TxLocation { height, position: pos as u32 });
            for input in &tx.inputs {
                if !self.values.contains_key(input) {
                    self.unresolved_inputs += 1;
                }
                self.unspent.remove(input);
            }
            for (vout, o) in tx.outputs.iter().enumerate() {
                let op = OutPoint { txid: tx.txid, vout: vout as u32 };
                self.values.insert(op, o.value);
                self.unspent.insert(op);
            }
            for js in &tx.joinsplits {
                let entry = JsEntry { height, js: js.js_ref(), time: block.time };
                // Mixed JoinSplits are counted but never matched.
                match js.kind() {
                    JoinSplitKind::Shielding => shield_new.push((js.vpub_old, entry)),
                    JoinSplitKind::Deshielding => deshield_new.push((js.vpub_new, entry)),
                    JoinSplitKind::FullyShielded | JoinSplitKind::Mixed => {}
                }
                self.joinsplit_count += 1;
            }
        }
        // Within a block, bucket order is (txid, js_index).
        shield_new.sort_by_key(|(_, e)| e.js);
        deshield_new.sort_by_key(|(_, e)| e.js);
        for (a, e) in shield_new {
            self.shieldings.entry(a).or_default().push(e);
        }
        for (a, e) in deshield_new {
            self.deshieldings.entry(a).or_default().push(e);
        }
        self.blocks.push(Arc::new(block));
        Ok(true)
    }

    /// Rebuilds every index from the stored blocks.
    pub fn rebuild(&self) -> ChainIndex {
        let mut fresh = ChainIndex::default();
        for b in &self.blocks {
            fresh.push_block(b.as_ref().clone()).expect("stored blocks re-index");
        }
        fresh
    }

    /// Compares incrementally maintained indexes with a from-scratch rebuild.
    pub fn indexes_consistent(&self) -> bool {
        let fresh = self.rebuild();
        fresh.shieldings == self.shieldings
            && fresh.deshieldings == self.deshieldings
            && fresh.values == self.values
            && fresh.unspent == self.unspent
            && fresh.tx_by_id == self.tx_by_id
            && fresh.unresolved_inputs == self.unresolved_inputs
    }

    /// SHA-256 over the canonical encoding of every block, in height order.
    pub fn content_hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        let mut buf = Vec::new();
        for b in &self.blocks {
            buf.clear();
            codec::encode_block(b, &mut buf);
            h.update((buf.len() as u64).to_le_bytes());
            h.update(&buf);
        }
        h.finalize().into()
    }
}

/// Read-only view of the index at a fixed tip.
#[derive(Debug, Clone)]
pub struct Snapshot {
    index: Arc<ChainIndex>,
}

impl Snapshot {
    /// Indexes a batch in memory. Panics on invalid input; meant for
    /// fixtures and tests.
    pub fn from_blocks(blocks: impl IntoIterator<Item = BlockRecord>) -> Snapshot {
        let mut idx = ChainIndex::default();
        for b in blocks {
            idx.push_block(b).expect("valid block sequence");
        }
        Snapshot { index: Arc::new(idx) }
    }

    pub fn try_from_batch(batch: &IngestBatch) -> Result<Snapshot, StoreError> {
        let mut store = Store::in_memory();
        store.append_blocks(batch)?;
        Ok(store.snapshot())
    }

    pub fn content_hash_hex(&self) -> String {
        hex::encode(self.index.content_hash())
    }
}

impl Deref for Snapshot {
    type Target = ChainIndex;

    fn deref(&self) -> &ChainIndex {
        &self.index
    }
}

struct Persistence {
    file: File,
    lock_path: PathBuf,
}

impl Drop for Persistence {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.lock_path);
    }
}

/// Single-writer store, in memory or backed by one file.
pub struct Store {
    index: Arc<ChainIndex>,
    persistence: Option<Persistence>,
}

fn lock_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".lock");
    PathBuf::from(p)
}

fn load_blocks(path: &Path) -> Result<Vec<BlockRecord>, StoreError> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 12 || &bytes[..8] != codec::MAGIC {
        return Err(StoreError::Corrupt("bad header".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != codec::FORMAT_VERSION {
        return Err(StoreError::Version(version));
    }
    let mut pos = 12;
    let mut blocks = Vec::new();
    while pos < bytes.len() {
        let len_bytes = bytes.get(pos..pos + 4).ok_or_else(|| StoreError::Corrupt("truncated record length".into()))?;
        let len = u32::from_le_bytes(len_bytes.try_into().unwrap()) as usize;
        pos += 4;
        let rec = bytes.get(pos..pos + len).ok_or_else(|| StoreError::Corrupt("truncated record".into()))?;
        blocks.push(codec::decode_block(rec).ok_or_else(|| StoreError::Corrupt(format!("undecodable record at {pos}")))?);
        pos += len;
    }
    Ok(blocks)
}

impl Store {
    pub fn in_memory() -> Store {
        Store { index: Arc::new(ChainIndex::default()), persistence: None }
    }

    /// Opens (or creates) a store file for writing, taking the writer lock.
    pub fn open(path: &Path) -> Result<Store, StoreError> {
        let lock = lock_path(path);
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => return Err(StoreError::Locked(lock)),
            Err(e) => return Err(e.into()),
        }
        let result = (|| {
            if !path.exists() || std::fs::metadata(path)?.len() == 0 {
                let mut f = File::create(path)?;
                f.write_all(codec::MAGIC)?;
                f.write_all(&codec::FORMAT_VERSION.to_le_bytes())?;
                f.sync_all()?;
            }
            let mut index = ChainIndex::default();
            for b in load_blocks(path)? {
                index.push_block(b)?;
            }
            let file = OpenOptions::new().append(true).open(path)?;
            Ok::<_, StoreError>((index, file))
        })();
        match result {
            Ok((index, file)) => Ok(Store { index: Arc::new(index), persistence: Some(Persistence { file, lock_path: lock }) }),
            Err(e) => {
                let _ = std::fs::remove_file(&lock);
                Err(e)
            }
        }
    }

    /// Loads a store file for reading only; no lock is taken.
    pub fn load_snapshot(path: &Path) -> Result<Snapshot, StoreError> {
        let mut index = ChainIndex::default();
        for b in load_blocks(path)? {
            index.push_block(b)?;
        }
        Ok(Snapshot { index: Arc::new(index) })
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot { index: self.index.clone() }
    }

    pub fn tip_height(&self) -> Option<u64> {
        self.index.tip_height()
    }

    /// Appends a height-ordered batch. Blocks already stored with identical
    /// content are skipped. Each block is validated before anything is
    /// written, so a failing block leaves the store at the previous block.
    pub fn append_blocks(&mut self, batch: &IngestBatch) -> Result<AppendSummary, StoreError> {
        let mut summary = AppendSummary::default();
        let mut encoded = Vec::new();
        let result = (|| {
            for b in &batch.blocks {
                let index = Arc::make_mut(&mut self.index);
                if index.push_block(b.clone())? {
                    summary.new_blocks += 1;
                    summary.new_txs += b.txs.len();
                    summary.new_joinsplits += b.joinsplits().count();
                    if self.persistence.is_some() {
                        let start = encoded.len();
                        encoded.extend_from_slice(&[0; 4]);
                        codec::encode_block(b, &mut encoded);
                        let len = (encoded.len() - start - 4) as u32;
                        encoded[start..start + 4].copy_from_slice(&len.to_le_bytes());
                    }
                } else {
                    summary.skipped_blocks += 1;
                }
            }
            Ok::<_, StoreError>(())
        })();
        // Blocks indexed before a failure are still committed.
        if let Some(p) = &mut self.persistence {
            if !encoded.is_empty() {
                p.file.write_all(&encoded)?;
                p.file.sync_data()?;
            }
        }
        result?;
        summary.tip = self.tip_height();
        Ok(summary)
    }
}
