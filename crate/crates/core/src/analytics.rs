//! Chain-wide measurements: JoinSplit participation per block, the
//! JoinSplit kind census, the shielded-pool series and the fee distribution.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::amount::Amount;
use crate::model::{JoinSplitKind, TxRecord};
use crate::ratio::Ratio;
use crate::store::ChainIndex;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalyticsError {
    #[error("the chain is empty")]
    EmptyChain,
    #[error("coinbase transactions do not have fees")]
    CoinbaseFee,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BlockParticipation {
    pub height: u64,
    pub tx_count: u64,
    pub tx_with_joinsplit_count: u64,
}

impl BlockParticipation {
    /// Share of transactions carrying at least one JoinSplit. Undefined
    /// (zero denominator) for a block without transactions.
    pub fn percent(&self) -> Ratio {
        Ratio::new(self.tx_with_joinsplit_count as u128, self.tx_count as u128)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticipationReport {
    pub blocks: Vec<BlockParticipation>,
    /// `histogram[i]` counts blocks whose percentage lies in `[i, i+1)`;
    /// `histogram[100]` holds exactly-100% blocks. Empty blocks count as 0%.
    pub histogram: [u64; 101],
    pub blocks_without_joinsplits: u64,
}

impl ParticipationReport {
    pub fn no_joinsplit_block_share(&self) -> Ratio {
        Ratio::new(self.blocks_without_joinsplits as u128, self.blocks.len() as u128)
    }
}

pub fn block_participation(chain: &ChainIndex) -> Result<ParticipationReport, AnalyticsError> {
    if chain.is_empty() {
        return Err(AnalyticsError::EmptyChain);
    }
    let mut histogram = [0u64; 101];
    let mut blocks = Vec::with_capacity(chain.block_count());
    let mut without = 0;
    for b in chain.blocks() {
        let with_js = b.txs.iter().filter(|t| t.has_joinsplit()).count() as u64;
        let bp = BlockParticipation { height: b.height, tx_count: b.txs.len() as u64, tx_with_joinsplit_count: with_js };
        let bucket = (with_js * 100).checked_div(bp.tx_count).unwrap_or(0) as usize;
        histogram[bucket] += 1;
        if with_js == 0 {
            without += 1;
        }
        blocks.push(bp);
    }
    Ok(ParticipationReport { blocks, histogram, blocks_without_joinsplits: without })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CensusReport {
    pub tx_count: u64,
    pub non_coinbase_tx_count: u64,
    pub txs_with_joinsplit: u64,
    pub joinsplit_count: u64,
    pub shielding: u64,
    pub deshielding: u64,
    pub fully_shielded: u64,
    pub mixed: u64,
    pub total_shielded_inflow: Amount,
    pub total_deshielded_outflow: Amount,
    pub is_empty: bool,
}

impl CensusReport {
    fn share(&self, n: u64) -> Ratio {
        Ratio::new(n as u128, self.joinsplit_count as u128)
    }

    pub fn tx_with_joinsplit_share(&self) -> Ratio {
        Ratio::new(self.txs_with_joinsplit as u128, self.tx_count as u128)
    }

    pub fn kind_share(&self, kind: JoinSplitKind) -> Ratio {
        self.share(self.kind_count(kind))
    }

    pub fn kind_count(&self, kind: JoinSplitKind) -> u64 {
        match kind {
            JoinSplitKind::Shielding => self.shielding,
            JoinSplitKind::Deshielding => self.deshielding,
            JoinSplitKind::FullyShielded => self.fully_shielded,
            JoinSplitKind::Mixed => self.mixed,
        }
    }

    /// JoinSplits with any shielding component (`vpub_old > 0`).
    pub fn with_shielding(&self) -> u64 {
        self.shielding + self.mixed
    }

    /// JoinSplits with any deshielding component (`vpub_new > 0`).
    pub fn with_deshielding(&self) -> u64 {
        self.deshielding + self.mixed
    }

    pub fn with_shielding_share(&self) -> Ratio {
        self.share(self.with_shielding())
    }

    pub fn with_deshielding_share(&self) -> Ratio {
        self.share(self.with_deshielding())
    }
}

pub fn census(chain: &ChainIndex) -> CensusReport {
    let mut r = CensusReport { is_empty: chain.is_empty(), ..Default::default() };
    for b in chain.blocks() {
        for tx in &b.txs {
            r.tx_count += 1;
            r.non_coinbase_tx_count += u64::from(!tx.is_coinbase);
            r.txs_with_joinsplit += u64::from(tx.has_joinsplit());
            for js in &tx.joinsplits {
                r.joinsplit_count += 1;
                match js.kind() {
                    JoinSplitKind::Shielding => r.shielding += 1,
                    JoinSplitKind::Deshielding => r.deshielding += 1,
                    JoinSplitKind::FullyShielded => r.fully_shielded += 1,
                    JoinSplitKind::Mixed => r.mixed += 1,
                }
                r.total_shielded_inflow = r.total_shielded_inflow + js.vpub_old;
                r.total_deshielded_outflow = r.total_deshielded_outflow + js.vpub_new;
            }
        }
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PoolSeriesPoint {
    pub height: u64,
    /// Running sum of `vpub_old - vpub_new`. Negative only on partial chains.
    pub shielded_pool: i64,
    /// Running sum of coinbase outputs.
    pub total_supply: Amount,
}

impl PoolSeriesPoint {
    pub fn pool_share(&self) -> Ratio {
        Ratio::new(self.shielded_pool.max(0) as u128, self.total_supply.as_zat() as u128)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoolSeries {
    pub points: Vec<PoolSeriesPoint>,
}

impl PoolSeries {
    pub fn final_point(&self) -> Option<&PoolSeriesPoint> {
        self.points.last()
    }

    pub fn final_share(&self) -> Ratio {
        self.final_point().map(PoolSeriesPoint::pool_share).unwrap_or_default()
    }

    /// Mean over blocks of the per-block pool percentage. Blocks with zero
    /// supply are skipped. Summed in height order, so the result is
    /// reproducible bit for bit.
    pub fn average_share_percent(&self) -> f64 {
        let (sum, n) = self
            .points
            .iter()
            .filter(|p| !p.total_supply.is_zero())
            .fold((0.0, 0u64), |(s, n), p| (s + p.pool_share().percent_f64(), n + 1));
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }
}

pub fn pool_series(chain: &ChainIndex) -> PoolSeries {
    let mut pool: i64 = 0;
    let mut supply = Amount::ZERO;
    let points = chain
        .blocks()
        .map(|b| {
            pool += b.joinsplits().map(|js| js.pool_delta()).sum::<i64>();
            if let Some(cb) = b.txs.first().filter(|t| t.is_coinbase) {
                supply = supply + cb.output_total();
            }
            PoolSeriesPoint { height: b.height, shielded_pool: pool, total_supply: supply }
        })
        .collect();
    PoolSeries { points }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fee {
    Known(Amount),
    /// At least one input could not be resolved.
    Unknown,
    /// Outputs exceed inputs by this much; only on inconsistent data.
    Negative(u64),
}

/// `Σ inputs + Σ vpub_new − Σ outputs − Σ vpub_old`.
pub fn fee_of(chain: &ChainIndex, tx: &TxRecord) -> Result<Fee, AnalyticsError> {
    if tx.is_coinbase {
        return Err(AnalyticsError::CoinbaseFee);
    }
    let mut balance: i128 = 0;
    for input in &tx.inputs {
        match chain.resolve_input_value(input) {
            Some(v) => balance += i128::from(v.as_zat()),
            None => return Ok(Fee::Unknown),
        }
    }
    for js in &tx.joinsplits {
        balance += i128::from(js.vpub_new.as_zat()) - i128::from(js.vpub_old.as_zat());
    }
    balance -= i128::from(tx.output_total().as_zat());
    Ok(if balance < 0 {
        Fee::Negative(balance.unsigned_abs() as u64)
    } else {
        Fee::Known(Amount::from_zat(balance as u64).unwrap_or(Amount::MAX))
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FeeHistogram {
    pub counts: BTreeMap<Amount, u64>,
    pub unknown: u64,
    pub negative: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeeRow {
    pub fee: Amount,
    pub count: u64,
    pub share: Ratio,
}

impl FeeHistogram {
    pub fn known_total(&self) -> u64 {
        self.counts.values().sum()
    }

    fn merge(mut self, other: FeeHistogram) -> FeeHistogram {
        for (fee, n) in other.counts {
            *self.counts.entry(fee).or_default() += n;
        }
        self.unknown += other.unknown;
        self.negative += other.negative;
        self
    }

    /// Rows by descending count (ties by ascending fee); shares are over
    /// all transactions with a known fee.
    pub fn table(&self) -> Vec<FeeRow> {
        let total = self.known_total() as u128;
        let mut rows: Vec<FeeRow> = self
            .counts
            .iter()
            .map(|(&fee, &count)| FeeRow { fee, count, share: Ratio::new(count as u128, total) })
            .collect();
        rows.sort_by(|a, b| b.count.cmp(&a.count).then(a.fee.cmp(&b.fee)));
        rows
    }

    pub fn top_fees(&self, k: usize) -> Vec<Amount> {
        self.table().into_iter().take(k).map(|r| r.fee).collect()
    }
}

pub fn fee_histogram(chain: &ChainIndex) -> FeeHistogram {
    let blocks: Vec<_> = chain.blocks().collect();
    blocks
        .par_iter()
        .map(|b| {
            let mut h = FeeHistogram::default();
            for tx in b.txs.iter().filter(|t| !t.is_coinbase) {
                match fee_of(chain, tx).expect("non-coinbase") {
                    Fee::Known(f) => *h.counts.entry(f).or_default() += 1,
                    Fee::Unknown => h.unknown += 1,
                    Fee::Negative(_) => h.negative += 1,
                }
            }
            h
        })
        .reduce(FeeHistogram::default, FeeHistogram::merge)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amount::COIN;
    use crate::model::{BlockRecord, Hash256, JoinSplitRecord, OutPoint, TxOutput};
    use crate::store::Snapshot;

    struct B {
        txs: Vec<TxRecord>,
        next: u8,
    }

    impl B {
        fn new(coinbase_zat: u64, seed: u8) -> B {
            let mut b = B { txs: vec![], next: seed };
            b.push(true, vec![], &[coinbase_zat], &[]);
            b
        }
        fn push(&mut self, cb: bool, inputs: Vec<OutPoint>, outs: &[u64], jss: &[(u64, u64)]) -> Hash256 {
            let txid = Hash256([self.next; 32]);
            self.next += 1;
            self.txs.push(TxRecord {
                txid,
                is_coinbase: cb,
                inputs,
                outputs: outs.iter().map(|&v| TxOutput { value: Amount::zat(v), script_id: vec![] }).collect(),
                joinsplits: jss
                    .iter()
                    .enumerate()
                    .map(|(i, &(o, n))| JoinSplitRecord { txid, js_index: i as u32, vpub_old: Amount::zat(o), vpub_new: Amount::zat(n) })
                    .collect(),
                lock_time: 0,
            });
            txid
        }
        fn at(self, height: u64) -> BlockRecord {
            BlockRecord { height, hash: Hash256([height as u8; 32]), time: height as i64 * 150, txs: self.txs }
        }
    }

    #[test]
    fn participation_percentages() {
        let mut b = B::new(1, 10);
        b.push(false, vec![], &[], &[(5, 0)]);
        b.push(false, vec![], &[1], &[]);
        b.push(false, vec![], &[2], &[]);
        let only_cb = B::new(1, 50);
        let s = Snapshot::from_blocks([b.at(0), only_cb.at(1)]);
        let r = block_participation(&s).unwrap();
        assert_eq!(r.blocks[0].percent().percent_1dp(), "25.0");
        assert_eq!(r.histogram[25], 1);
        assert_eq!(r.blocks[1].percent().percent_1dp(), "0.0");
        assert_eq!(r.histogram[0], 1);
        assert_eq!(r.no_joinsplit_block_share().percent_1dp(), "50.0");
        assert_eq!(block_participation(&Snapshot::from_blocks([])), Err(AnalyticsError::EmptyChain));
    }

    #[test]
    fn census_counts_and_shares() {
        let mut b = B::new(1, 10);
        b.push(false, vec![], &[], &[(5, 0), (0, 3), (0, 0)]);
        let s = Snapshot::from_blocks([b.at(0)]);
        let c = census(&s);
        assert_eq!((c.shielding, c.deshielding, c.fully_shielded, c.mixed), (1, 1, 1, 0));
        for k in [JoinSplitKind::Shielding, JoinSplitKind::Deshielding, JoinSplitKind::FullyShielded] {
            assert_eq!(c.kind_share(k).percent_1dp(), "33.3");
        }
        assert_eq!(c.total_shielded_inflow, Amount::zat(5));
        assert_eq!(c.txs_with_joinsplit, 1);
        assert_eq!(c.tx_with_joinsplit_share().percent_1dp(), "50.0");

        let empty = census(&Snapshot::from_blocks([]));
        assert!(empty.is_empty);
        assert_eq!(empty.joinsplit_count, 0);
        assert_eq!(empty.with_shielding_share().percent_1dp(), "0.0");
    }

    #[test]
    fn pool_series_single_block() {
        let mut b = B::new(50 * COIN, 10);
        b.push(false, vec![], &[], &[(10 * COIN, 0)]);
        let s = Snapshot::from_blocks([b.at(0)]);
        let p = pool_series(&s);
        let last = p.final_point().unwrap();
        assert_eq!(last.shielded_pool, 1_000_000_000);
        assert_eq!(last.total_supply.as_zat(), 5_000_000_000);
        assert_eq!(p.final_share().percent_1dp(), "20.0");
    }

    #[test]
    fn shield_then_deshield_returns_to_zero() {
        let mut b0 = B::new(COIN, 10);
        b0.push(false, vec![], &[], &[(777, 0)]);
        let mut b1 = B::new(COIN, 40);
        b1.push(false, vec![], &[], &[(0, 777)]);
        let p = pool_series(&Snapshot::from_blocks([b0.at(0), b1.at(1)]));
        assert_eq!(p.points.iter().map(|x| x.shielded_pool).collect::<Vec<_>>(), vec![777, 0]);
    }

    #[test]
    fn fee_identity() {
        let b0 = B::new(100_010_000, 10);
        let cb = b0.txs[0].txid;
        let mut b1 = B::new(COIN, 40);
        let plain = b1.push(false, vec![OutPoint { txid: cb, vout: 0 }], &[COIN], &[]);
        let mut b2 = B::new(COIN, 70);
        let with_js = b2.push(false, vec![OutPoint { txid: b1.txs[0].txid, vout: 0 }], &[150_000_000], &[(0, 50_000_000)]);
        let unresolved = b2.push(false, vec![OutPoint { txid: Hash256([0xee; 32]), vout: 0 }], &[1], &[]);
        let s = Snapshot::from_blocks([b0.at(0), b1.at(1), b2.at(2)]);
        let fee = |id: Hash256| fee_of(&s, s.tx(&id).unwrap().1).unwrap();
        assert_eq!(fee(plain), Fee::Known(Amount::zat(10_000)));
        assert_eq!(fee(with_js), Fee::Known(Amount::ZERO));
        assert_eq!(fee(unresolved), Fee::Unknown);
        assert_eq!(fee_of(&s, s.tx(&cb).unwrap().1), Err(AnalyticsError::CoinbaseFee));
    }

    #[test]
    fn fee_table_ordering() {
        let mut h = FeeHistogram::default();
        h.counts.insert(Amount::zat(10_000), 2);
        h.counts.insert(Amount::ZERO, 1);
        let t = h.table();
        assert_eq!(t[0].fee, Amount::zat(10_000));
        assert_eq!((t[0].count, t[0].share.percent_1dp()), (2, "66.7".to_string()));
        assert_eq!((t[1].fee, t[1].count, t[1].share.percent_1dp()), (Amount::ZERO, 1, "33.3".to_string()));
    }

    #[test]
    fn coinbase_only_chain_has_empty_fee_histogram() {
        let s = Snapshot::from_blocks([B::new(1, 10).at(0), B::new(1, 20).at(1)]);
        let h = fee_histogram(&s);
        assert!(h.counts.is_empty());
        assert_eq!(h.unknown, 0);
    }
}
