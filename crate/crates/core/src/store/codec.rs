//! Binary block encoding used by the store file and the content hash.

use crate::amount::Amount;
use crate::ingest::varint::{parse_varint, write_varint};
use crate::model::{BlockRecord, Hash256, JoinSplitRecord, OutPoint, TxOutput, TxRecord};

pub const MAGIC: &[u8; 8] = b"ZLSTORE\0";
pub const FORMAT_VERSION: u32 = 1;

pub fn encode_block(b: &BlockRecord, out: &mut Vec<u8>) {
    out.extend_from_slice(&b.height.to_le_bytes());
    out.extend_from_slice(&b.hash.0);
    out.extend_from_slice(&b.time.to_le_bytes());
    write_varint(out, b.txs.len() as u64);
    for tx in &b.txs {
        out.extend_from_slice(&tx.txid.0);
        out.push(u8::from(tx.is_coinbase));
        out.extend_from_slice(&tx.lock_time.to_le_bytes());
        write_varint(out, tx.inputs.len() as u64);
        for i in &tx.inputs {
            out.extend_from_slice(&i.txid.0);
            out.extend_from_slice(&i.vout.to_le_bytes());
        }
        write_varint(out, tx.outputs.len() as u64);
        for o in &tx.outputs {
            out.extend_from_slice(&o.value.as_zat().to_le_bytes());
            write_varint(out, o.script_id.len() as u64);
            out.extend_from_slice(&o.script_id);
        }
        write_varint(out, tx.joinsplits.len() as u64);
        for js in &tx.joinsplits {
            out.extend_from_slice(&js.vpub_old.as_zat().to_le_bytes());
            out.extend_from_slice(&js.vpub_new.as_zat().to_le_bytes());
        }
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let s = self.buf.get(self.pos..self.pos.checked_add(n)?)?;
        self.pos += n;
        Some(s)
    }
    fn u32(&mut self) -> Option<u32> {
        Some(u32::from_le_bytes(self.take(4)?.try_into().ok()?))
    }
    fn u64(&mut self) -> Option<u64> {
        Some(u64::from_le_bytes(self.take(8)?.try_into().ok()?))
    }
    fn hash(&mut self) -> Option<Hash256> {
        Some(Hash256(self.take(32)?.try_into().ok()?))
    }
    fn count(&mut self) -> Option<usize> {
        let (v, n) = parse_varint(&self.buf[self.pos..]).ok()?;
        self.pos += n;
        let v = usize::try_from(v).ok()?;
        // Every element takes at least one byte.
        (v <= self.buf.len() - self.pos).then_some(v)
    }
    fn amount(&mut self) -> Option<Amount> {
        Amount::from_zat(self.u64()?)
    }
}

pub fn decode_block(buf: &[u8]) -> Option<BlockRecord> {
    let mut c = Cursor { buf, pos: 0 };
    let height = c.u64()?;
    let hash = c.hash()?;
    let time = c.u64()? as i64;
    let n_tx = c.count()?;
    let mut txs = Vec::with_capacity(n_tx);
    for _ in 0..n_tx {
        let txid = c.hash()?;
        let is_coinbase = match c.take(1)?[0] {
            0 => false,
            1 => true,
            _ => return None,
        };
        let lock_time = c.u32()?;
        let n_in = c.count()?;
        let mut inputs = Vec::with_capacity(n_in);
        for _ in 0..n_in {
            inputs.push(OutPoint { txid: c.hash()?, vout: c.u32()? });
        }
        let n_out = c.count()?;
        let mut outputs = Vec::with_capacity(n_out);
        for _ in 0..n_out {
            let value = c.amount()?;
            let len = c.count()?;
            outputs.push(TxOutput { value, script_id: c.take(len)?.to_vec() });
        }
        let n_js = c.count()?;
        let mut joinsplits = Vec::with_capacity(n_js);
        for i in 0..n_js {
            joinsplits.push(JoinSplitRecord { txid, js_index: i as u32, vpub_old: c.amount()?, vpub_new: c.amount()? });
        }
        txs.push(TxRecord { txid, is_coinbase, inputs, outputs, joinsplits, lock_time });
    }
    (c.pos == buf.len()).then_some(BlockRecord { height, hash, time, txs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_block() -> impl Strategy<Value = BlockRecord> {
        let tx = (
            any::<[u8; 32]>(),
            any::<bool>(),
            any::<u32>(),
            proptest::collection::vec((any::<[u8; 32]>(), any::<u32>()), 0..3),
            proptest::collection::vec((0u64..=Amount::MAX.as_zat(), proptest::collection::vec(any::<u8>(), 0..30)), 0..3),
            proptest::collection::vec((0u64..1 << 50, 0u64..1 << 50), 0..3),
        )
            .prop_map(|(id, cb, lt, ins, outs, jss)| {
                let txid = Hash256(id);
                TxRecord {
                    txid,
                    is_coinbase: cb,
                    lock_time: lt,
                    inputs: ins.into_iter().map(|(t, v)| OutPoint { txid: Hash256(t), vout: v }).collect(),
                    outputs: outs.into_iter().map(|(v, s)| TxOutput { value: Amount::zat(v), script_id: s }).collect(),
                    joinsplits: jss
                        .into_iter()
                        .enumerate()
                        .map(|(i, (o, n))| JoinSplitRecord {
                            txid,
                            js_index: i as u32,
                            vpub_old: Amount::zat(o),
                            vpub_new: Amount::zat(n),
                        })
                        .collect(),
                }
            });
        (any::<u64>(), any::<[u8; 32]>(), any::<i64>(), proptest::collection::vec(tx, 0..4))
            .prop_map(|(height, h, time, txs)| BlockRecord { height, hash: Hash256(h), time, txs })
    }

    proptest! {
        #[test]
        fn decode_inverts_encode(b in arb_block()) {
            let mut buf = Vec::new();
            encode_block(&b, &mut buf);
            prop_assert_eq!(decode_block(&buf), Some(b));
            prop_assert!(buf.is_empty() || decode_block(&buf[..buf.len() - 1]).is_none());
        }
    }
}
