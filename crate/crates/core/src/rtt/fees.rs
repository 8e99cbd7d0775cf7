//! Fee adjustments considered by fee-adjusted matching.

use std::collections::BTreeMap;

use serde::Serialize;

use super::RttError;
use crate::amount::Amount;

/// The five most common non-coinbase fees on the 2016–2017 chain, in
/// descending order of use: 0.0001, 0.001, 0.0002, 0.00009, 0.00005.
pub const DEFAULT_BASE_FEES: [Amount; 5] = [
    Amount::zat(10_000),
    Amount::zat(100_000),
    Amount::zat(20_000),
    Amount::zat(9_000),
    Amount::zat(5_000),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FeeSum {
    pub total: Amount,
    /// One decomposition of `total` into base fees, in base-fee order.
    pub parts: Vec<Amount>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FeeSumSet {
    pub base_fees: Vec<Amount>,
    pub k: u8,
    /// For `k = 1` in base-fee order; for `k = 2` by descending total.
    pub sums: Vec<FeeSum>,
}

impl FeeSumSet {
    pub fn totals(&self) -> Vec<Amount> {
        self.sums.iter().map(|s| s.total).collect()
    }
}

/// Enumerates the fee adjustments for `k` chained fees.
///
/// `k = 1` yields the base fees. `k = 2` yields every total of an unordered
/// pair of base fees (a fee may pair with itself), dropping totals that are
/// themselves a base fee. Totals are unique; when two pairs share a total
/// the first pair in base-fee order is kept as its decomposition.
pub fn enumerate_fee_sums(base_fees: &[Amount], k: u8) -> Result<FeeSumSet, RttError> {
    if base_fees.is_empty() {
        return Err(RttError::EmptyFees);
    }
    for (i, f) in base_fees.iter().enumerate() {
        if f.is_zero() {
            return Err(RttError::BadFees(format!("fee {f} is not positive")));
        }
        if base_fees[..i].contains(f) {
            return Err(RttError::BadFees(format!("fee {f} listed twice")));
        }
    }
    let sums = match k {
        1 => base_fees.iter().map(|&f| FeeSum { total: f, parts: vec![f] }).collect(),
        2 => {
            let mut by_total: BTreeMap<Amount, Vec<Amount>> = BTreeMap::new();
            for (i, &a) in base_fees.iter().enumerate() {
                for &b in &base_fees[i..] {
                    let total = a.checked_add(b).ok_or_else(|| RttError::BadFees("fee sum overflows".into()))?;
                    if !base_fees.contains(&total) {
                        by_total.entry(total).or_insert_with(|| vec![a, b]);
                    }
                }
            }
            by_total.into_iter().rev().map(|(total, parts)| FeeSum { total, parts }).collect()
        }
        _ => return Err(RttError::BadK(k)),
    };
    Ok(FeeSumSet { base_fees: base_fees.to_vec(), k, sums })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn coins(v: &[&str]) -> Vec<Amount> {
        v.iter().map(|s| Amount::parse_coins(s).unwrap()).collect()
    }

    // Ordered-pair brute force with explicit dedup, independent of the
    // unordered-pair loop above.
    fn brute_force_pairs(fees: &[Amount]) -> BTreeSet<Amount> {
        let mut out = BTreeSet::new();
        for &a in fees {
            for &b in fees {
                let t = a + b;
                if !fees.contains(&t) {
                    out.insert(t);
                }
            }
        }
        out
    }

    #[test]
    fn single_fees_are_the_base_fees() {
        let s = enumerate_fee_sums(&DEFAULT_BASE_FEES, 1).unwrap();
        assert_eq!(s.totals(), coins(&["0.0001", "0.001", "0.0002", "0.00009", "0.00005"]));
    }

    #[test]
    fn pair_sums_of_common_fees() {
        let s = enumerate_fee_sums(&DEFAULT_BASE_FEES, 2).unwrap();
        let expected = coins(&[
            "0.002", "0.0012", "0.0011", "0.00109", "0.00105", "0.0004", "0.0003", "0.00029", "0.00025", "0.00019",
            "0.00018", "0.00015", "0.00014",
        ]);
        assert_eq!(s.totals(), expected);
        assert_eq!(brute_force_pairs(&DEFAULT_BASE_FEES), expected.iter().copied().collect());
        let totals = s.totals();
        assert!(!totals.contains(&Amount::parse_coins("0.0002").unwrap()));
        assert!(!totals.contains(&Amount::parse_coins("0.0001").unwrap()));
        let eleven = s.sums.iter().find(|x| x.total == Amount::parse_coins("0.0011").unwrap()).unwrap();
        assert_eq!(eleven.parts, coins(&["0.0001", "0.001"]));
    }

    #[test]
    fn single_fee_doubles() {
        let s = enumerate_fee_sums(&coins(&["1"]), 2).unwrap();
        assert_eq!(s.totals(), coins(&["2"]));
        let s = enumerate_fee_sums(&coins(&["1", "2"]), 2).unwrap();
        assert_eq!(s.totals(), coins(&["4", "3"]));
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(enumerate_fee_sums(&[], 1), Err(RttError::EmptyFees));
        assert_eq!(enumerate_fee_sums(&DEFAULT_BASE_FEES, 3), Err(RttError::BadK(3)));
        assert!(enumerate_fee_sums(&[Amount::ZERO], 1).is_err());
        assert!(enumerate_fee_sums(&coins(&["1", "1"]), 1).is_err());
    }

    proptest::proptest! {
        #[test]
        fn pair_totals_positive_unique_disjoint(raw in proptest::collection::btree_set(1u64..1_000_000, 1..8)) {
            let fees: Vec<Amount> = raw.into_iter().map(Amount::zat).collect();
            let s = enumerate_fee_sums(&fees, 2).unwrap();
            let totals = s.totals();
            let set: BTreeSet<_> = totals.iter().copied().collect();
            proptest::prop_assert_eq!(set.len(), totals.len());
            proptest::prop_assert!(totals.iter().all(|t| !t.is_zero() && !fees.contains(t)));
            proptest::prop_assert_eq!(set, brute_force_pairs(&fees));
            for sum in &s.sums {
                proptest::prop_assert_eq!(sum.parts.iter().copied().sum::<Amount>(), sum.total);
            }
        }
    }
}
