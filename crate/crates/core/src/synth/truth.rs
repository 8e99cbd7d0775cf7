//! Ground truth records, their sidecar file, and scoring.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::amount::Amount;
use crate::model::{Hash256, JsRef};
use crate::ratio::Ratio;
use crate::rtt::{MatchKind, RttMatch};
use crate::store::ChainIndex;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedLink {
    pub kind: MatchKind,
    pub shield: JsRef,
    pub deshield: JsRef,
    pub shield_height: u64,
    pub deshield_height: u64,
    pub amount: Amount,
    /// Zero for exact links.
    pub fee: Amount,
    pub fee_parts: Vec<Amount>,
    /// A duplicate shielding of `amount` was injected before the deshield.
    pub collided: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    pub seed: u64,
    /// Hash of the chain's tip block.
    pub chain_id: Hash256,
    pub planted_links: Vec<PlantedLink>,
    /// JoinSplits emitted without a planted partner.
    pub decoy_refs: Vec<JsRef>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum Line {
    Header { seed: u64, chain_id: Hash256 },
    Link(PlantedLink),
    Decoy(JsRef),
}

impl GroundTruth {
    pub fn planted_coins(&self) -> Amount {
        self.planted_links.iter().map(|l| l.amount).sum()
    }

    /// One JSON object per line: a header, then links, then decoys.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut put = |line: &Line| -> std::io::Result<()> {
            serde_json::to_writer(&mut w, line)?;
            w.write_all(b"\n")
        };
        put(&Line::Header { seed: self.seed, chain_id: self.chain_id })?;
        for l in &self.planted_links {
            put(&Line::Link(l.clone()))?;
        }
        for d in &self.decoy_refs {
            put(&Line::Decoy(*d))?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<GroundTruth, SynthError> {
        let mut truth: Option<GroundTruth> = None;
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: Line =
                serde_json::from_str(&line).map_err(|e| SynthError::Parse { line: i + 1, msg: e.to_string() })?;
            match (parsed, truth.as_mut()) {
                (Line::Header { seed, chain_id }, None) => {
                    truth = Some(GroundTruth { seed, chain_id, planted_links: vec![], decoy_refs: vec![] })
                }
                (Line::Link(l), Some(t)) => t.planted_links.push(l),
                (Line::Decoy(d), Some(t)) => t.decoy_refs.push(d),
                (Line::Header { .. }, Some(_)) => {
                    return Err(SynthError::Parse { line: i + 1, msg: "second header".into() })
                }
                (_, None) => return Err(SynthError::Parse { line: i + 1, msg: "record before header".into() }),
            }
        }
        truth.ok_or(SynthError::Parse { line: 0, msg: "missing header".into() })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct KindScore {
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
}

impl KindScore {
    pub fn precision(&self) -> Ratio {
        Ratio::new(self.true_positives as u128, (self.true_positives + self.false_positives) as u128)
    }

    pub fn recall(&self) -> Ratio {
        Ratio::new(self.true_positives as u128, (self.true_positives + self.false_negatives) as u128)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EvalScore {
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    /// True positives and false negatives are filed under the planted kind,
    /// false positives under the detected kind.
    pub by_kind: BTreeMap<MatchKind, KindScore>,
    pub detected_coins: Amount,
    pub planted_coins: Amount,
    pub shielded_inflow: Amount,
}

impl EvalScore {
    fn totals(&self) -> KindScore {
        KindScore {
            true_positives: self.true_positives,
            false_positives: self.false_positives,
            false_negatives: self.false_negatives,
        }
    }

    /// `TP / (TP + FP)`; undefined (rendered 0) with no detections.
    pub fn precision(&self) -> Ratio {
        self.totals().precision()
    }

    /// `TP / (TP + FN)`; undefined (rendered 0) with nothing planted.
    pub fn recall(&self) -> Ratio {
        self.totals().recall()
    }

    pub fn detected_coin_share(&self) -> Ratio {
        Ratio::new(self.detected_coins.as_zat() as u128, self.shielded_inflow.as_zat() as u128)
    }

    pub fn planted_coin_share(&self) -> Ratio {
        Ratio::new(self.planted_coins.as_zat() as u128, self.shielded_inflow.as_zat() as u128)
    }
}

/// Compares detections with planted links by `(shield, deshield)` pair.
pub fn score(chain: &ChainIndex, detected: &[RttMatch], truth: &GroundTruth) -> Result<EvalScore, SynthError> {
    let tip = chain.tip_height().and_then(|h| chain.block(h)).map_or(Hash256::ZERO, |b| b.hash);
    if tip != truth.chain_id {
        return Err(SynthError::ChainMismatch { truth: truth.chain_id, chain: tip });
    }
    let planted: HashSet<(JsRef, JsRef)> = truth.planted_links.iter().map(|l| (l.shield, l.deshield)).collect();
    let found: HashSet<(JsRef, JsRef)> = detected.iter().map(|m| (m.shield.js, m.deshield.js)).collect();
    let mut by_kind: BTreeMap<MatchKind, KindScore> = BTreeMap::new();
    for l in &truth.planted_links {
        let k = by_kind.entry(l.kind).or_default();
        if found.contains(&(l.shield, l.deshield)) {
            k.true_positives += 1;
        } else {
            k.false_negatives += 1;
        }
    }
    for m in detected {
        if !planted.contains(&(m.shield.js, m.deshield.js)) {
            by_kind.entry(m.kind).or_default().false_positives += 1;
        }
    }
    let sum = |f: fn(&KindScore) -> u64| by_kind.values().map(f).sum::<u64>();
    Ok(EvalScore {
        true_positives: sum(|k| k.true_positives),
        false_positives: sum(|k| k.false_positives),
        false_negatives: sum(|k| k.false_negatives),
        detected_coins: detected.iter().map(|m| m.amount).sum(),
        planted_coins: truth.planted_coins(),
        shielded_inflow: crate::analytics::census(chain).total_shielded_inflow,
        by_kind,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, RttBehavior, SynthConfig};
    use crate::store::Snapshot;

    fn cfg() -> SynthConfig {
        SynthConfig {
            n_blocks: 40,
            rtt: RttBehavior { planted_exact_count: 3, planted_fee1_count: 1, planted_fee2_count: 1, ..Default::default() },
            ..Default::default()
        }
    }

    #[test]
    fn sidecar_round_trip() {
        let s = generate(&cfg()).unwrap();
        let mut buf = Vec::new();
        s.truth.write_jsonl(&mut buf).unwrap();
        assert_eq!(GroundTruth::read_jsonl(&buf[..]).unwrap(), s.truth);
        assert!(GroundTruth::read_jsonl(&b"{\"type\":\"decoy\",\"txid\":\"00\",\"js_index\":0}\n"[..]).is_err());
    }

    #[test]
    fn missed_links_count_as_false_negatives() {
        let s = generate(&cfg()).unwrap();
        let snap = Snapshot::try_from_batch(&s.batch).unwrap();
        let sc = score(&snap, &[], &s.truth).unwrap();
        assert_eq!((sc.true_positives, sc.false_negatives), (0, 5));
        assert_eq!(sc.recall(), Ratio::new(0, 5));
        assert!(!sc.precision().is_defined());
    }

    #[test]
    fn mismatched_chain_is_rejected() {
        let a = generate(&cfg()).unwrap();
        let b = generate(&SynthConfig { seed: 99, ..cfg() }).unwrap();
        let snap = Snapshot::try_from_batch(&b.batch).unwrap();
        assert!(matches!(score(&snap, &[], &a.truth), Err(SynthError::ChainMismatch { .. })));
    }
}
