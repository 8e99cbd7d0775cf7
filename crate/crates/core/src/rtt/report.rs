//! Aggregate tables over detected matches.

use serde::Serialize;

use super::{Detection, FeeSumSet, MatchKind, RttError, RttMatch};
use crate::amount::Amount;
use crate::analytics::census;
use crate::ratio::Ratio;
use crate::store::ChainIndex;

pub const DEFAULT_TOP_N: [usize; 5] = [10, 50, 250, 500, 1000];

/// Half-open minute intervals; the last is unbounded.
pub const TIME_BUCKETS: [(u64, Option<u64>); 7] = [
    (0, Some(5)),
    (5, Some(15)),
    (15, Some(30)),
    (30, Some(60)),
    (60, Some(120)),
    (120, Some(1440)),
    (1440, None),
];

pub const TIME_BUCKET_LABELS: [&str; 7] =
    ["[0, 5)", "[5, 15)", "[15, 30)", "[30, 60)", "[60, 120)", "[120, 1440)", "[1440, ∞)"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BucketRow {
    pub lo: u64,
    pub hi: Option<u64>,
    pub count: u64,
    pub coins: Amount,
}

impl BucketRow {
    pub fn label(&self) -> String {
        TIME_BUCKET_LABELS[bucket_index(self.lo)].to_owned()
    }

    pub fn contains(&self, minutes: u64) -> bool {
        minutes >= self.lo && self.hi.is_none_or(|hi| minutes < hi)
    }
}

pub fn bucket_index(minutes: u64) -> usize {
    TIME_BUCKETS
        .iter()
        .position(|&(lo, hi)| minutes >= lo && hi.is_none_or(|hi| minutes < hi))
        .expect("buckets cover all minutes")
}

pub fn bucket_by_time(matches: &[RttMatch]) -> Vec<BucketRow> {
    let mut rows: Vec<BucketRow> =
        TIME_BUCKETS.iter().map(|&(lo, hi)| BucketRow { lo, hi, count: 0, coins: Amount::ZERO }).collect();
    for m in matches {
        let row = &mut rows[bucket_index(m.delta_minutes)];
        row.count += 1;
        row.coins = row.coins + m.amount;
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TopNRow {
    pub n: usize,
    /// JoinSplits actually considered (`min(n, shielding JoinSplits)`).
    pub considered: usize,
    pub matched: usize,
    pub coins: Amount,
}

/// For each `n`, how many of the `n` largest shielding JoinSplits are the
/// shield side of a match, and their summed amount. Ties in amount are
/// broken by height, then txid.
pub fn top_n_coverage(chain: &ChainIndex, matches: &[RttMatch], n_values: &[usize]) -> Result<Vec<TopNRow>, RttError> {
    if n_values.is_empty() {
        return Err(RttError::EmptyTopN);
    }
    let matched: std::collections::HashSet<_> = matches.iter().map(|m| m.shield.js).collect();
    let max_n = n_values.iter().copied().max().unwrap_or(0);
    let ranked: Vec<(Amount, bool)> = chain
        .shielding_buckets()
        .rev()
        .flat_map(|(amount, entries)| entries.iter().map(move |e| (amount, e.js)))
        .take(max_n)
        .map(|(amount, js)| (amount, matched.contains(&js)))
        .collect();
    Ok(n_values
        .iter()
        .map(|&n| {
            let top = &ranked[..n.min(ranked.len())];
            let hits = top.iter().filter(|(_, hit)| *hit);
            TopNRow { n, considered: top.len(), matched: hits.clone().count(), coins: hits.map(|(a, _)| *a).sum() }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FeeTableRow {
    pub fee: Amount,
    pub parts: Vec<Amount>,
    pub count: u64,
    pub coins: Amount,
}

/// One row per fee sum, in the set's order.
pub fn fee_table(sums: &FeeSumSet, matches: &[RttMatch]) -> Vec<FeeTableRow> {
    sums.sums
        .iter()
        .map(|s| {
            let hits = matches.iter().filter(|m| m.fee_adjustment == s.total);
            FeeTableRow {
                fee: s.total,
                parts: s.parts.clone(),
                count: hits.clone().count() as u64,
                coins: hits.map(|m| m.amount).sum(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RttReport {
    /// All matches in canonical order.
    pub matches: Vec<RttMatch>,
    pub time_buckets_exact: Vec<BucketRow>,
    pub time_buckets_fee1: Vec<BucketRow>,
    pub time_buckets_fee2: Vec<BucketRow>,
    pub fee1_table: Vec<FeeTableRow>,
    pub fee2_table: Vec<FeeTableRow>,
    pub top_n: Vec<TopNRow>,
    pub exact_count: u64,
    pub exact_coins: Amount,
    pub fee1_count: u64,
    pub fee1_coins: Amount,
    pub fee2_count: u64,
    pub fee2_coins: Amount,
    /// Σ amount over all matches.
    pub matched_coin_total: Amount,
    /// Σ vpub_old over the whole chain.
    pub shielded_inflow_total: Amount,
    /// Exact matches with `delta_minutes < 120`.
    pub exact_within_two_hours: u64,
}

impl RttReport {
    pub fn matched_coin_share(&self) -> Ratio {
        Ratio::new(self.matched_coin_total.as_zat() as u128, self.shielded_inflow_total.as_zat() as u128)
    }

    /// Exact-match coins over shielded inflow.
    pub fn exact_coin_share(&self) -> Ratio {
        Ratio::new(self.exact_coins.as_zat() as u128, self.shielded_inflow_total.as_zat() as u128)
    }

    pub fn within_two_hours_share(&self) -> Ratio {
        Ratio::new(self.exact_within_two_hours as u128, self.exact_count as u128)
    }
}

pub fn build_report(chain: &ChainIndex, detection: &Detection, top_n: &[usize]) -> Result<RttReport, RttError> {
    let sum = |ms: &[RttMatch]| ms.iter().map(|m| m.amount).sum::<Amount>();
    let empty_sums = |k| FeeSumSet { base_fees: vec![], k, sums: vec![] };
    let fee1_sums = detection.fee1_sums.clone().unwrap_or_else(|| empty_sums(1));
    let fee2_sums = detection.fee2_sums.clone().unwrap_or_else(|| empty_sums(2));
    let all = detection.all();
    debug_assert!(all.iter().all(|m| m.kind != MatchKind::Exact || m.fee_adjustment.is_zero()));
    Ok(RttReport {
        time_buckets_exact: bucket_by_time(&detection.exact),
        time_buckets_fee1: bucket_by_time(&detection.fee1),
        time_buckets_fee2: bucket_by_time(&detection.fee2),
        fee1_table: fee_table(&fee1_sums, &detection.fee1),
        fee2_table: fee_table(&fee2_sums, &detection.fee2),
        top_n: top_n_coverage(chain, &detection.exact, top_n)?,
        exact_count: detection.exact.len() as u64,
        exact_coins: sum(&detection.exact),
        fee1_count: detection.fee1.len() as u64,
        fee1_coins: sum(&detection.fee1),
        fee2_count: detection.fee2.len() as u64,
        fee2_coins: sum(&detection.fee2),
        matched_coin_total: sum(&all),
        shielded_inflow_total: census(chain).total_shielded_inflow,
        exact_within_two_hours: detection.exact.iter().filter(|m| m.delta_minutes < 120).count() as u64,
        matches: all,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Hash256, JsRef};
    use crate::store::JsEntry;

    fn m(minutes: u64, amount: u64) -> RttMatch {
        let e = |h, t| JsEntry { height: h, js: JsRef { txid: Hash256::ZERO, js_index: 0 }, time: t };
        RttMatch {
            shield: e(1, 0),
            deshield: e(2, minutes as i64 * 60),
            amount: Amount::zat(amount),
            fee_adjustment: Amount::ZERO,
            fee_parts: vec![],
            kind: MatchKind::Exact,
            delta_blocks: 1,
            delta_minutes: minutes,
        }
    }

    #[test]
    fn bucket_boundaries() {
        assert_eq!(bucket_index(2), 0);
        assert_eq!(bucket_index(928), 5);
        assert_eq!(bucket_index(1440), 6);
        assert_eq!(bucket_index(1439), 5);
        assert_eq!(bucket_index(5), 1);
        assert_eq!(bucket_index(15), 2);
        let rows = bucket_by_time(&[m(2, 10), m(3, 5), m(20000, 1)]);
        assert_eq!((rows[0].count, rows[0].coins), (2, Amount::zat(15)));
        assert_eq!(rows[6].count, 1);
        let labels: Vec<String> = rows.iter().map(BucketRow::label).collect();
        assert_eq!(labels, ["[0, 5)", "[5, 15)", "[15, 30)", "[30, 60)", "[60, 120)", "[120, 1440)", "[1440, ∞)"]);
        assert!(rows.iter().all(|r| r.contains(r.lo)));
    }

    #[test]
    fn empty_matches_give_empty_buckets() {
        assert!(bucket_by_time(&[]).iter().all(|r| r.count == 0 && r.coins.is_zero()));
    }
}
