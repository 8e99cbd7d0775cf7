//! Reference exact-match detector: a literal all-pairs scan with no indexes.

use std::collections::BTreeMap;

use super::SynthError;
use crate::amount::Amount;
use crate::ingest::IngestBatch;
use crate::model::JoinSplitKind;
use crate::rtt::{sort_matches, MatchKind, RttMatch};
use crate::store::JsEntry;

/// Per-amount cap on candidate pairs before the oracle refuses to run.
pub const ORACLE_PAIR_GUARD: u64 = 100_000;

pub fn oracle_exact_rtts(batch: &IngestBatch) -> Result<Vec<RttMatch>, SynthError> {
    let mut all = Vec::new();
    for b in &batch.blocks {
        for tx in &b.txs {
            for js in &tx.joinsplits {
                if js.kind() == JoinSplitKind::Mixed {
                    continue;
                }
                all.push((JsEntry { height: b.height, js: js.js_ref(), time: b.time }, js.vpub_old, js.vpub_new));
            }
        }
    }

    let mut pairs: BTreeMap<Amount, Vec<(JsEntry, JsEntry)>> = BTreeMap::new();
    for (s, s_old, _) in &all {
        if s_old.is_zero() {
            continue;
        }
        for (d, _, d_new) in &all {
            if d_new == s_old && d.height > s.height {
                let list = pairs.entry(*s_old).or_default();
                list.push((*s, *d));
                if list.len() as u64 > ORACLE_PAIR_GUARD {
                    return Err(SynthError::OracleTooLarge { amount: *s_old, pairs: list.len() as u64 });
                }
            }
        }
    }

    let mut out: Vec<RttMatch> = pairs
        .into_iter()
        .filter(|(_, list)| list.len() == 1)
        .map(|(amount, list)| RttMatch::new(list[0].0, list[0].1, amount, None, MatchKind::Exact))
        .collect();
    sort_matches(&mut out);
    Ok(out)
}
