//! Round-trip transaction (RTT) detection.
//!
//! A shielding JoinSplit and a later deshielding JoinSplit are linked when
//! their public amounts agree and no other pair in the chain could claim the
//! same amount. For an amount `a`, the candidate set is
//!
//! ```text
//! C(a) = { (s, d) : vpub_old(s) = a, vpub_new(d) = a, height(d) > height(s) }
//! ```
//!
//! and an exact match is reported iff `|C(a)| = 1`. Fee-adjusted matching
//! relaxes the equality to `vpub_new(d) = a − f` for `f` in a [`FeeSumSet`],
//! restricts candidates to a time window and excludes JoinSplits already
//! claimed by an earlier pass.

pub mod fees;
pub mod report;

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::amount::Amount;
use crate::model::JsRef;
use crate::store::{ChainIndex, JsEntry};
pub use fees::{enumerate_fee_sums, FeeSum, FeeSumSet, DEFAULT_BASE_FEES};
pub use report::{bucket_by_time, build_report, top_n_coverage, RttReport, DEFAULT_TOP_N, TIME_BUCKET_LABELS};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RttError {
    #[error("no base fees given")]
    EmptyFees,
    #[error("bad base fees: {0}")]
    BadFees(String),
    #[error("fee chains of length {0} are not supported (use 1 or 2)")]
    BadK(u8),
    #[error("the fee window must be positive")]
    BadWindow,
    #[error("no top-N sizes given")]
    EmptyTopN,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchKind {
    Exact,
    Fee1,
    Fee2,
}

impl MatchKind {
    pub fn label(self) -> &'static str {
        match self {
            MatchKind::Exact => "exact",
            MatchKind::Fee1 => "fee1",
            MatchKind::Fee2 => "fee2",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RttMatch {
    pub shield: JsEntry,
    pub deshield: JsEntry,
    /// The shielded amount (`vpub_old` of the shield side).
    pub amount: Amount,
    /// `amount − vpub_new(deshield)`; zero for exact matches.
    pub fee_adjustment: Amount,
    pub fee_parts: Vec<Amount>,
    pub kind: MatchKind,
    pub delta_blocks: u64,
    /// Whole minutes between block timestamps, zero if the clock went back.
    pub delta_minutes: u64,
}

impl RttMatch {
    pub(crate) fn new(shield: JsEntry, deshield: JsEntry, amount: Amount, fee: Option<&FeeSum>, kind: MatchKind) -> RttMatch {
        let (fee_adjustment, fee_parts) = match fee {
            Some(f) => (f.total, f.parts.clone()),
            None => (Amount::ZERO, Vec::new()),
        };
        RttMatch {
            shield,
            deshield,
            amount,
            fee_adjustment,
            fee_parts,
            kind,
            delta_blocks: deshield.height - shield.height,
            delta_minutes: (deshield.time - shield.time).max(0) as u64 / 60,
        }
    }

    pub fn deshielded_amount(&self) -> Amount {
        self.amount - self.fee_adjustment
    }

    /// Canonical order: shield height, amount, then the two references.
    pub fn sort_key(&self) -> (u64, Amount, JsRef, u64, JsRef, MatchKind) {
        (self.shield.height, self.amount, self.shield.js, self.deshield.height, self.deshield.js, self.kind)
    }
}

pub fn sort_matches(matches: &mut [RttMatch]) {
    matches.sort_by_key(RttMatch::sort_key);
}

/// The unique pair in `shields × deshields` with the deshield strictly
/// higher, or `None` when there are zero or several such pairs.
///
/// Both slices are ordered by height.
fn unique_ordered_pair(shields: &[JsEntry], deshields: &[JsEntry]) -> Option<(JsEntry, JsEntry)> {
    let mut found = None;
    let mut count = 0usize;
    for d in deshields {
        let earlier = shields.partition_point(|s| s.height < d.height);
        count += earlier;
        if count > 1 {
            return None;
        }
        if earlier == 1 {
            found = Some((shields[0], *d));
        }
    }
    found
}

/// Exact round trips over the whole chain, with no time limit.
pub fn find_exact_rtts(chain: &ChainIndex) -> Vec<RttMatch> {
    let buckets: Vec<(Amount, &[JsEntry])> = chain.shielding_buckets().collect();
    let mut out: Vec<RttMatch> = buckets
        .par_iter()
        .filter_map(|&(amount, shields)| {
            let deshields = chain.joinsplits_with_vpub_new(amount);
            unique_ordered_pair(shields, deshields)
                .map(|(s, d)| RttMatch::new(s, d, amount, None, MatchKind::Exact))
        })
        .collect();
    sort_matches(&mut out);
    out
}

#[derive(Debug, Clone)]
pub struct FeeMatchOptions {
    /// Maximum `time(deshield) − time(shield)`, in seconds.
    pub window_secs: i64,
    /// JoinSplits barred from candidacy (on either side).
    pub excluded: HashSet<JsRef>,
}

impl FeeMatchOptions {
    pub fn with_window_hours(hours: u64) -> Result<FeeMatchOptions, RttError> {
        if hours == 0 {
            return Err(RttError::BadWindow);
        }
        Ok(FeeMatchOptions { window_secs: hours as i64 * 3600, excluded: HashSet::new() })
    }
}

/// One fee-adjusted pass over every shielding amount and every fee sum.
///
/// For each `(a, f)` with `a > f`, the windowed candidate set is built from
/// non-excluded JoinSplits and a match is emitted iff it has exactly one
/// element. Matches that share a JoinSplit with another match of the same
/// pass are dropped as ambiguous.
pub fn find_fee_adjusted_rtts(chain: &ChainIndex, fee_sums: &FeeSumSet, opts: &FeeMatchOptions) -> Vec<RttMatch> {
    let kind = if fee_sums.k == 1 { MatchKind::Fee1 } else { MatchKind::Fee2 };
    let buckets: Vec<(Amount, &[JsEntry])> = chain.shielding_buckets().collect();
    let candidates: Vec<RttMatch> = buckets
        .par_iter()
        .flat_map_iter(|&(amount, shields)| {
            let shields: Vec<JsEntry> = shields.iter().filter(|s| !opts.excluded.contains(&s.js)).copied().collect();
            fee_sums.sums.iter().filter_map(move |fee| {
                let target = amount.checked_sub(fee.total).filter(|t| !t.is_zero())?;
                let mut found = None;
                let mut count = 0;
                'outer: for s in &shields {
                    let deshields = chain.joinsplits_with_vpub_new(target);
                    let later = deshields.partition_point(|d| d.height <= s.height);
                    for d in &deshields[later..] {
                        if d.time - s.time > opts.window_secs || opts.excluded.contains(&d.js) {
                            continue;
                        }
                        count += 1;
                        if count > 1 {
                            break 'outer;
                        }
                        found = Some((*s, *d));
                    }
                }
                match (count, found) {
                    (1, Some((s, d))) => Some(RttMatch::new(s, d, amount, Some(fee), kind)),
                    _ => None,
                }
            })
        })
        .collect();

    let mut uses: HashMap<JsRef, usize> = HashMap::new();
    for m in &candidates {
        *uses.entry(m.shield.js).or_default() += 1;
        *uses.entry(m.deshield.js).or_default() += 1;
    }
    let mut out: Vec<RttMatch> =
        candidates.into_iter().filter(|m| uses[&m.shield.js] == 1 && uses[&m.deshield.js] == 1).collect();
    sort_matches(&mut out);
    out
}

#[derive(Debug, Clone)]
pub struct DetectConfig {
    pub base_fees: Vec<Amount>,
    pub window_hours: u64,
    /// Bar JoinSplits claimed by exact (and then 1-fee) matches from later
    /// passes.
    pub exclude_consumed: bool,
}

impl Default for DetectConfig {
    fn default() -> Self {
        DetectConfig { base_fees: DEFAULT_BASE_FEES.to_vec(), window_hours: 24, exclude_consumed: true }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Detection {
    pub exact: Vec<RttMatch>,
    pub fee1: Vec<RttMatch>,
    pub fee2: Vec<RttMatch>,
    pub fee1_sums: Option<FeeSumSet>,
    pub fee2_sums: Option<FeeSumSet>,
}

impl Detection {
    pub fn all(&self) -> Vec<RttMatch> {
        let mut v: Vec<RttMatch> = self.exact.iter().chain(&self.fee1).chain(&self.fee2).cloned().collect();
        sort_matches(&mut v);
        v
    }
}

/// Runs the exact pass, then the 1-fee pass, then the 2-fee pass.
pub fn detect(chain: &ChainIndex, cfg: &DetectConfig) -> Result<Detection, RttError> {
    let fee1_sums = enumerate_fee_sums(&cfg.base_fees, 1)?;
    let fee2_sums = enumerate_fee_sums(&cfg.base_fees, 2)?;
    let mut opts = FeeMatchOptions::with_window_hours(cfg.window_hours)?;

    let exact = find_exact_rtts(chain);
    let consume = |opts: &mut FeeMatchOptions, ms: &[RttMatch]| {
        if cfg.exclude_consumed {
            opts.excluded.extend(ms.iter().flat_map(|m| [m.shield.js, m.deshield.js]));
        }
    };
    consume(&mut opts, &exact);
    let fee1 = find_fee_adjusted_rtts(chain, &fee1_sums, &opts);
    consume(&mut opts, &fee1);
    let fee2 = find_fee_adjusted_rtts(chain, &fee2_sums, &opts);
    Ok(Detection { exact, fee1, fee2, fee1_sums: Some(fee1_sums), fee2_sums: Some(fee2_sums) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BlockRecord, Hash256, JoinSplitRecord, TxRecord};
    use crate::store::Snapshot;

    /// A chain of single-JoinSplit transactions: (height, time, vpub_old, vpub_new).
    fn chain(events: &[(u64, i64, u64, u64)]) -> Snapshot {
        let max_h = events.iter().map(|e| e.0).max().unwrap_or(0);
        let mut blocks: Vec<BlockRecord> = (0..=max_h)
            .map(|h| BlockRecord {
                height: h,
                hash: Hash256::double_sha256(&h.to_le_bytes()),
                time: h as i64 * 150,
                txs: vec![TxRecord {
                    txid: Hash256::double_sha256(format!("cb{h}").as_bytes()),
                    is_coinbase: true,
                    inputs: vec![],
                    outputs: vec![],
                    joinsplits: vec![],
                    lock_time: 0,
                }],
            })
            .collect();
        for (i, &(h, t, old, new)) in events.iter().enumerate() {
            let txid = Hash256::double_sha256(format!("tx{i}").as_bytes());
            let b = &mut blocks[h as usize];
            b.time = t;
            b.txs.push(TxRecord {
                txid,
                is_coinbase: false,
                inputs: vec![],
                outputs: vec![],
                joinsplits: vec![JoinSplitRecord { txid, js_index: 0, vpub_old: Amount::zat(old), vpub_new: Amount::zat(new) }],
                lock_time: 0,
            });
        }
        Snapshot::from_blocks(blocks)
    }

    #[test]
    fn mixed_joinsplits_are_not_matched() {
        let c = chain(&[(1, 150, 5000, 0), (2, 300, 0, 5000), (3, 450, 7000, 7000), (4, 600, 0, 7000)]);
        let m = find_exact_rtts(&c);
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].amount, Amount::zat(5000));
        assert!(c.joinsplits_with_vpub_old(Amount::zat(7000)).is_empty());
        let batch = crate::ingest::IngestBatch { blocks: c.blocks().cloned().collect(), source: crate::ingest::Source::Synthetic };
        assert_eq!(crate::synth::oracle_exact_rtts(&batch).unwrap(), m);
    }

    #[test]
    fn unique_pair_matches() {
        let s = chain(&[(1, 1000, 500, 0), (3, 1120, 0, 500)]);
        let m = find_exact_rtts(&s);
        assert_eq!(m.len(), 1);
        assert_eq!((m[0].delta_blocks, m[0].delta_minutes, m[0].kind), (2, 2, MatchKind::Exact));
        assert_eq!(m[0].fee_adjustment, Amount::ZERO);
    }

    #[test]
    fn two_shields_one_deshield_is_ambiguous() {
        let s = chain(&[(1, 1000, 500, 0), (2, 1100, 500, 0), (3, 1200, 0, 500)]);
        assert!(find_exact_rtts(&s).is_empty());
    }

    #[test]
    fn earlier_shield_only_counts_for_later_deshields() {
        // The second shield comes after the only deshield, so C(a) has one pair.
        let s = chain(&[(1, 1000, 500, 0), (2, 1100, 0, 500), (3, 1200, 500, 0)]);
        assert_eq!(find_exact_rtts(&s).len(), 1);
    }

    #[test]
    fn same_block_never_matches() {
        let s = chain(&[(1, 1000, 500, 0), (1, 1000, 0, 500)]);
        assert!(find_exact_rtts(&s).is_empty());
    }

    #[test]
    fn second_deshield_destroys_match() {
        let s = chain(&[(1, 1000, 500, 0), (2, 1100, 0, 500), (4, 9000, 0, 500)]);
        assert!(find_exact_rtts(&s).is_empty());
    }

    #[test]
    fn clock_regression_clamps_to_zero() {
        let s = chain(&[(1, 5000, 500, 0), (2, 4000, 0, 500)]);
        let m = find_exact_rtts(&s);
        assert_eq!(m[0].delta_minutes, 0);
        assert_eq!(m[0].delta_blocks, 1);
    }

    #[test]
    fn fee_adjusted_window_and_uniqueness() {
        let fees = enumerate_fee_sums(&[Amount::zat(10)], 1).unwrap();
        let opts = FeeMatchOptions::with_window_hours(24).unwrap();
        let s = chain(&[(1, 0, 1000, 0), (2, 480, 0, 990)]);
        let m = find_fee_adjusted_rtts(&s, &fees, &opts);
        assert_eq!(m.len(), 1);
        assert_eq!((m[0].kind, m[0].fee_adjustment, m[0].delta_minutes), (MatchKind::Fee1, Amount::zat(10), 8));

        let late = chain(&[(1, 0, 1000, 0), (2, 25 * 3600, 0, 990)]);
        assert!(find_fee_adjusted_rtts(&late, &fees, &opts).is_empty());

        // A second in-window candidate makes the pair ambiguous...
        let two = chain(&[(1, 0, 1000, 0), (2, 100, 0, 990), (3, 200, 0, 990)]);
        assert!(find_fee_adjusted_rtts(&two, &fees, &opts).is_empty());
        // ...but one outside the window does not.
        let outside = chain(&[(1, 0, 1000, 0), (2, 100, 0, 990), (3, 30 * 3600, 0, 990)]);
        assert_eq!(find_fee_adjusted_rtts(&outside, &fees, &opts).len(), 1);
    }

    #[test]
    fn exact_matches_are_excluded_from_fee_passes() {
        // 1000 -> 1000 is exact; 1000 -> 990 would also be a 1-fee match.
        let s = chain(&[(1, 0, 1000, 0), (2, 100, 0, 1000), (3, 200, 0, 990)]);
        let cfg = DetectConfig { base_fees: vec![Amount::zat(10)], ..Default::default() };
        let d = detect(&s, &cfg).unwrap();
        assert_eq!(d.exact.len(), 1);
        assert!(d.fee1.is_empty());

        let loose = DetectConfig { exclude_consumed: false, ..cfg };
        let d = detect(&s, &loose).unwrap();
        assert_eq!(d.fee1.len(), 1);
        assert_eq!(d.fee1[0].shield.js, d.exact[0].shield.js);
    }

    #[test]
    fn shield_matching_two_fees_is_dropped() {
        let fees = enumerate_fee_sums(&[Amount::zat(10), Amount::zat(20)], 1).unwrap();
        let opts = FeeMatchOptions::with_window_hours(24).unwrap();
        let s = chain(&[(1, 0, 1000, 0), (2, 100, 0, 990), (3, 200, 0, 980)]);
        assert!(find_fee_adjusted_rtts(&s, &fees, &opts).is_empty());
    }

    #[test]
    fn zero_window_rejected() {
        assert_eq!(FeeMatchOptions::with_window_hours(0).unwrap_err(), RttError::BadWindow);
    }
}
