//! Chain records shared by every other module.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::amount::Amount;

/// A 32-byte hash stored in wire (internal) byte order.
///
/// Hex rendering and parsing use the byte-reversed display convention, so
/// the string form matches what block explorers and node RPCs print.
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Hash256(pub [u8; 32]);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid 32-byte hex hash {0:?}")]
pub struct ParseHashError(pub String);

impl Hash256 {
    pub const ZERO: Hash256 = Hash256([0; 32]);

    /// Double SHA-256 of `data`, in wire order.
    pub fn double_sha256(data: &[u8]) -> Hash256 {
        let first = Sha256::digest(data);
        let second = Sha256::digest(first);
        let mut out = [0u8; 32];
        out.copy_from_slice(&second);
        Hash256(out)
    }

    pub fn to_display_hex(&self) -> String {
        let mut rev = self.0;
        rev.reverse();
        hex::encode(rev)
    }

    pub fn from_display_hex(s: &str) -> Result<Hash256, ParseHashError> {
        let mut bytes = [0u8; 32];
        hex::decode_to_slice(s, &mut bytes).map_err(|_| ParseHashError(s.to_owned()))?;
        bytes.reverse();
        Ok(Hash256(bytes))
    }
}

impl fmt::Display for Hash256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_display_hex())
    }
}

impl fmt::Debug for Hash256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Hash256({})", self.to_display_hex())
    }
}

impl FromStr for Hash256 {
    type Err = ParseHashError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Hash256::from_display_hex(s)
    }
}

impl Serialize for Hash256 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_display_hex())
    }
}

impl<'de> Deserialize<'de> for Hash256 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Hash256::from_display_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// Reference to a transaction output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OutPoint {
    pub txid: Hash256,
    pub vout: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxOutput {
    pub value: Amount,
    /// Locking script or script hash, kept opaque.
    pub script_id: Vec<u8>,
}

/// Public fields of one JoinSplit description.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JoinSplitRecord {
    pub txid: Hash256,
    pub js_index: u32,
    /// Value entering the shielded pool.
    pub vpub_old: Amount,
    /// Value leaving the shielded pool.
    pub vpub_new: Amount,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum JoinSplitKind {
    Shielding,
    Deshielding,
    FullyShielded,
    /// Both public values positive. Never observed on the real chain, but
    /// representable.
    Mixed,
}

impl JoinSplitRecord {
    pub fn kind(&self) -> JoinSplitKind {
        match (self.vpub_old.is_zero(), self.vpub_new.is_zero()) {
            (false, true) => JoinSplitKind::Shielding,
            (true, false) => JoinSplitKind::Deshielding,
            (true, true) => JoinSplitKind::FullyShielded,
            (false, false) => JoinSplitKind::Mixed,
        }
    }

    /// Net zatoshi moved into the shielded pool (`vpub_old - vpub_new`).
    pub fn pool_delta(&self) -> i64 {
        self.vpub_old.as_zat() as i64 - self.vpub_new.as_zat() as i64
    }

    pub fn js_ref(&self) -> JsRef {
        JsRef { txid: self.txid, js_index: self.js_index }
    }
}

/// Free-function form of [`JoinSplitRecord::kind`].
pub fn classify_joinsplit(js: &JoinSplitRecord) -> JoinSplitKind {
    js.kind()
}

/// Free-function form of [`JoinSplitRecord::pool_delta`].
pub fn pool_delta(js: &JoinSplitRecord) -> i64 {
    js.pool_delta()
}

/// Identifies a JoinSplit within a chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct JsRef {
    pub txid: Hash256,
    pub js_index: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxRecord {
    pub txid: Hash256,
    pub is_coinbase: bool,
    /// Spent outpoints. Empty for coinbase transactions.
    pub inputs: Vec<OutPoint>,
    pub outputs: Vec<TxOutput>,
    pub joinsplits: Vec<JoinSplitRecord>,
    pub lock_time: u32,
}

impl TxRecord {
    pub fn has_joinsplit(&self) -> bool {
        !self.joinsplits.is_empty()
    }

    pub fn output_total(&self) -> Amount {
        self.outputs.iter().map(|o| o.value).sum()
    }

    /// Sets the txid and propagates it into every JoinSplit record.
    pub fn set_txid(&mut self, txid: Hash256) {
        self.txid = txid;
        for (i, js) in self.joinsplits.iter_mut().enumerate() {
            js.txid = txid;
            js.js_index = i as u32;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockRecord {
    pub height: u64,
    pub hash: Hash256,
    /// Unix timestamp, seconds.
    pub time: i64,
    pub txs: Vec<TxRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecordError {
    #[error("block {height}: first transaction is not a coinbase")]
    MissingCoinbase { height: u64 },
    #[error("block {height}: coinbase at position {index} (only the first transaction may be coinbase)")]
    MisplacedCoinbase { height: u64, index: usize },
    #[error("block {height}: coinbase {txid} has spendable inputs")]
    CoinbaseWithInputs { height: u64, txid: Hash256 },
    #[error("block {height}: duplicate txid {txid}")]
    DuplicateTxid { height: u64, txid: Hash256 },
    #[error("block {height}: joinsplit {index} of {txid} carries a mismatched reference")]
    JoinSplitRef { height: u64, txid: Hash256, index: usize },
}

impl BlockRecord {
    /// Checks the structural invariants of a single block.
    pub fn validate(&self) -> Result<(), RecordError> {
        let height = self.height;
        if let Some(first) = self.txs.first() {
            if !first.is_coinbase {
                return Err(RecordError::MissingCoinbase { height });
            }
        }
        let mut seen = std::collections::HashSet::with_capacity(self.txs.len());
        for (i, tx) in self.txs.iter().enumerate() {
            if tx.is_coinbase && i != 0 {
                return Err(RecordError::MisplacedCoinbase { height, index: i });
            }
            if tx.is_coinbase && !tx.inputs.is_empty() {
                return Err(RecordError::CoinbaseWithInputs { height, txid: tx.txid });
            }
            if !seen.insert(tx.txid) {
                return Err(RecordError::DuplicateTxid { height, txid: tx.txid });
            }
            for (j, js) in tx.joinsplits.iter().enumerate() {
                if js.txid != tx.txid || js.js_index as usize != j {
                    return Err(RecordError::JoinSplitRef { height, txid: tx.txid, index: j });
                }
            }
        }
        Ok(())
    }

    pub fn joinsplits(&self) -> impl Iterator<Item = &JoinSplitRecord> {
        self.txs.iter().flat_map(|tx| tx.joinsplits.iter())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn js(old: u64, new: u64) -> JoinSplitRecord {
        JoinSplitRecord {
            txid: Hash256::ZERO,
            js_index: 0,
            vpub_old: Amount::zat(old),
            vpub_new: Amount::zat(new),
        }
    }

    #[test]
    fn classification_table() {
        assert_eq!(classify_joinsplit(&js(347_951_898_254, 0)), JoinSplitKind::Shielding);
        assert_eq!(classify_joinsplit(&js(0, 10_000)), JoinSplitKind::Deshielding);
        assert_eq!(classify_joinsplit(&js(0, 0)), JoinSplitKind::FullyShielded);
        assert_eq!(classify_joinsplit(&js(5, 5)), JoinSplitKind::Mixed);
    }

    #[test]
    fn pool_delta_signs() {
        assert_eq!(pool_delta(&js(10_000, 0)), 10_000);
        assert_eq!(pool_delta(&js(0, 10_000)), -10_000);
        let pair = pool_delta(&js(67_209_594, 0)) + pool_delta(&js(0, 67_199_594));
        assert_eq!(pair, 10_000);
    }

    #[test]
    fn hash_display_is_byte_reversed() {
        let h = Hash256::from_display_hex(
            "a2c9f7ad3b1993c40e692da61966f8633d85cb96c07b8810c6b14493978f2b46",
        )
        .unwrap();
        assert_eq!(h.0[0], 0x46);
        assert_eq!(h.0[31], 0xa2);
        assert_eq!(
            h.to_string(),
            "a2c9f7ad3b1993c40e692da61966f8633d85cb96c07b8810c6b14493978f2b46"
        );
        assert!(Hash256::from_display_hex("abc").is_err());
    }

    #[test]
    fn block_validation() {
        let cb = TxRecord {
            txid: Hash256([1; 32]),
            is_coinbase: true,
            inputs: vec![],
            outputs: vec![],
            joinsplits: vec![],
            lock_time: 0,
        };
        let mut plain = cb.clone();
        plain.is_coinbase = false;
        plain.txid = Hash256([2; 32]);

        let mut b = BlockRecord { height: 3, hash: Hash256::ZERO, time: 0, txs: vec![cb.clone(), plain.clone()] };
        assert!(b.validate().is_ok());
        b.txs = vec![plain.clone()];
        assert_eq!(b.validate(), Err(RecordError::MissingCoinbase { height: 3 }));
        b.txs = vec![cb.clone(), cb.clone()];
        assert!(matches!(b.validate(), Err(RecordError::MisplacedCoinbase { .. })));
        b.txs = vec![cb.clone(), plain.clone(), plain];
        assert!(matches!(b.validate(), Err(RecordError::DuplicateTxid { .. })));
        b.txs = vec![];
        assert!(b.validate().is_ok());
    }

    proptest! {
        #[test]
        fn exactly_one_kind(old in 0u64..1_000, new in 0u64..1_000) {
            let j = js(old, new);
            let k = j.kind();
            let flags = [
                old > 0 && new == 0,
                new > 0 && old == 0,
                old == 0 && new == 0,
                old > 0 && new > 0,
            ];
            prop_assert_eq!(flags.iter().filter(|f| **f).count(), 1);
            let expected = [JoinSplitKind::Shielding, JoinSplitKind::Deshielding,
                JoinSplitKind::FullyShielded, JoinSplitKind::Mixed][flags.iter().position(|f| *f).unwrap()];
            prop_assert_eq!(k, expected);
        }

        #[test]
        fn pool_delta_antisymmetric(old in 0u64..=Amount::MAX.as_zat(), new in 0u64..=Amount::MAX.as_zat()) {
            prop_assert_eq!(js(old, new).pool_delta(), -js(new, old).pool_delta());
        }

        #[test]
        fn pool_delta_sum_order_independent(mut v in proptest::collection::vec((0u64..1u64 << 40, 0u64..1u64 << 40), 0..50)) {
            let fwd: i64 = v.iter().map(|&(o, n)| js(o, n).pool_delta()).sum();
            v.reverse();
            let rev: i64 = v.iter().map(|&(o, n)| js(o, n).pool_delta()).sum();
            prop_assert_eq!(fwd, rev);
        }
    }
}
