//! Synthetic chains with known linkage.
//!
//! [`generate`] builds a chain block by block while tracking a transparent
//! UTXO set, the shielded pool and every public amount it has emitted. It
//! plants shield/deshield pairs (exact and fee-adjusted) whose amounts are
//! unique with respect to every configured fee offset, so the detector
//! should find exactly those links unless collisions are injected on
//! purpose. All randomness comes from a seeded ChaCha8 stream.

pub mod oracle;
pub mod truth;

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::amount::Amount;
use crate::ingest::wire::compute_txid;
use crate::ingest::{IngestBatch, Source, WireLayoutConfig};
use crate::model::{BlockRecord, Hash256, JoinSplitRecord, JsRef, OutPoint, TxOutput, TxRecord};
use crate::rtt::{enumerate_fee_sums, FeeSum, MatchKind, DEFAULT_BASE_FEES};

pub use oracle::oracle_exact_rtts;
pub use truth::{score, EvalScore, GroundTruth, KindScore, PlantedLink};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    Invalid(String),
    #[error("infeasible synth config: {0}")]
    Infeasible(String),
    #[error("oracle size guard: amount {amount} has {pairs} candidate pairs")]
    OracleTooLarge { amount: Amount, pairs: u64 },
    #[error("ground truth belongs to chain {truth}, detections to {chain}")]
    ChainMismatch { truth: Hash256, chain: Hash256 },
    #[error("ground truth line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeeWeight {
    pub fee: Amount,
    pub weight: u32,
}

/// Planted round trips and the distributions they are drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RttBehavior {
    pub planted_exact_count: u32,
    pub planted_fee1_count: u32,
    pub planted_fee2_count: u32,
    /// Shield-to-deshield delay, log-uniform in minutes.
    pub delay_min_minutes: u64,
    pub delay_max_minutes: u64,
    /// Upper delay bound for fee-adjusted plants; must fit the fee window.
    pub fee_delay_max_minutes: u64,
    pub fee_window_hours: u64,
    /// Probability that a planted exact link gets a duplicate shielding, and
    /// that a decoy reuses an amount already on the chain.
    pub collision_rate: f64,
    /// Log-uniform amount range, in zatoshi.
    pub amount_min_zat: u64,
    pub amount_max_zat: u64,
    /// Fees subtracted by fee-adjusted plants (1- and 2-fee sums of these).
    pub plant_base_fees: Vec<Amount>,
}

impl Default for RttBehavior {
    fn default() -> Self {
        RttBehavior {
            planted_exact_count: 20,
            planted_fee1_count: 5,
            planted_fee2_count: 5,
            delay_min_minutes: 1,
            delay_max_minutes: 2 * 1440,
            fee_delay_max_minutes: 12 * 60,
            fee_window_hours: 24,
            collision_rate: 0.0,
            amount_min_zat: 10_000,
            amount_max_zat: 1_000_000_000_000,
            plant_base_fees: DEFAULT_BASE_FEES.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_blocks: u64,
    pub start_height: u64,
    pub start_time: i64,
    pub block_interval_secs: u32,
    /// Uniform jitter around the interval; must be below it.
    pub block_jitter_secs: u32,
    /// Non-coinbase transactions per block, before planted ones.
    pub txs_per_block_min: u32,
    pub txs_per_block_max: u32,
    /// Exactly `round(fraction × n_blocks)` blocks carry no JoinSplit.
    pub joinsplit_free_block_fraction: f64,
    /// Chance that a transaction slot in a JoinSplit block is a JoinSplit.
    pub fraction_tx_with_joinsplit: f64,
    pub fully_shielded_rate: f64,
    /// Steer decoy traffic toward this pool / supply ratio.
    pub target_pool_share: Option<f64>,
    pub block_subsidy: Amount,
    pub fee_mix: Vec<FeeWeight>,
    pub rtt: RttBehavior,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let weights = [60, 20, 10, 6, 4];
        SynthConfig {
            seed: 42,
            n_blocks: 500,
            start_height: 0,
            start_time: 1_477_670_400,
            block_interval_secs: 150,
            block_jitter_secs: 60,
            txs_per_block_min: 1,
            txs_per_block_max: 6,
            joinsplit_free_block_fraction: 0.4,
            fraction_tx_with_joinsplit: 0.2,
            fully_shielded_rate: 0.019,
            target_pool_share: Some(0.035),
            block_subsidy: Amount::zat(1_250_000_000),
            fee_mix: DEFAULT_BASE_FEES.iter().zip(weights).map(|(&fee, weight)| FeeWeight { fee, weight }).collect(),
            rtt: RttBehavior::default(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Invalid(m));
        let probs = [
            ("joinsplit_free_block_fraction", self.joinsplit_free_block_fraction),
            ("fraction_tx_with_joinsplit", self.fraction_tx_with_joinsplit),
            ("fully_shielded_rate", self.fully_shielded_rate),
            ("collision_rate", self.rtt.collision_rate),
            ("target_pool_share", self.target_pool_share.unwrap_or(0.0)),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is not in [0, 1]"));
            }
        }
        if self.n_blocks == 0 {
            return bad("n_blocks must be positive".into());
        }
        if self.block_jitter_secs >= self.block_interval_secs {
            return bad("block_jitter_secs must be below block_interval_secs".into());
        }
        if self.txs_per_block_min > self.txs_per_block_max {
            return bad("txs_per_block_min exceeds txs_per_block_max".into());
        }
        if self.fee_mix.is_empty() || self.fee_mix.iter().all(|f| f.weight == 0) {
            return bad("fee_mix needs at least one positive weight".into());
        }
        let r = &self.rtt;
        if r.amount_min_zat == 0 || r.amount_min_zat > r.amount_max_zat || Amount::from_zat(r.amount_max_zat).is_none() {
            return bad("amount range must satisfy 0 < min <= max <= cap".into());
        }
        if r.delay_min_minutes == 0 || r.delay_min_minutes > r.delay_max_minutes {
            return bad("delay range must satisfy 0 < min <= max".into());
        }
        if r.fee_window_hours == 0 || r.fee_delay_max_minutes < r.delay_min_minutes {
            return bad("fee delay range is empty".into());
        }
        if r.fee_delay_max_minutes > r.fee_window_hours * 60 {
            return bad("fee_delay_max_minutes exceeds the fee window".into());
        }
        if Amount::from_zat(self.block_subsidy.as_zat()).is_none() || self.block_subsidy.is_zero() {
            return bad("block_subsidy must be positive and within the cap".into());
        }
        if r.planted_fee1_count + r.planted_fee2_count > 0 {
            enumerate_fee_sums(&r.plant_base_fees, 1).map_err(|e| SynthError::Invalid(e.to_string()))?;
        }
        Ok(())
    }
}

/// A generated chain and what was planted in it.
#[derive(Debug, Clone)]
pub struct Synthetic {
    pub batch: IngestBatch,
    pub truth: GroundTruth,
}

#[derive(Debug, Clone)]
struct Plan {
    kind: MatchKind,
    fee: Option<FeeSum>,
    shield_block: usize,
    deshield_block: usize,
    collision_block: Option<usize>,
    amount: Option<Amount>,
    shield: Option<(JsRef, u64)>,
    collided: bool,
}

struct Gen<'a> {
    cfg: &'a SynthConfig,
    rng: ChaCha8Rng,
    layout: WireLayoutConfig,
    utxos: Vec<(OutPoint, Amount)>,
    used: HashSet<Amount>,
    used_list: Vec<Amount>,
    offsets: Vec<u64>,
    fee_current: Vec<i64>,
    pool: u64,
    pending: u64,
    supply: u64,
    tx_counter: u32,
    decoys: Vec<JsRef>,
}

impl Gen<'_> {
    fn log_uniform(&mut self, lo: u64, hi: u64) -> u64 {
        if lo >= hi {
            return lo;
        }
        let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
        let x = (a + self.rng.random::<f64>() * (b - a)).exp().round() as u64;
        x.clamp(lo, hi)
    }

    fn is_free(&self, a: u64) -> bool {
        self.offsets.iter().all(|&f| {
            !self.used.contains(&Amount::zat(a.saturating_add(f).min(Amount::MAX.as_zat())))
                && (a < f || !self.used.contains(&Amount::zat(a - f)))
        })
    }

    fn reserve(&mut self, a: Amount) {
        if self.used.insert(a) {
            self.used_list.push(a);
        }
    }

    /// A fresh amount in `[lo, hi]` whose offsets collide with nothing, and
    /// whose partner `a − partner` (if any) is equally clean.
    fn unique_amount(&mut self, lo: u64, hi: u64, partner: Option<u64>) -> Option<Amount> {
        if lo == 0 || lo > hi {
            return None;
        }
        for _ in 0..256 {
            let a = self.log_uniform(lo, hi);
            let ok = self.is_free(a) && partner.is_none_or(|f| a > f && self.is_free(a - f));
            if ok {
                return Some(Amount::zat(a));
            }
        }
        None
    }

    /// Decoy amount: with probability `collision_rate` reuse an emitted
    /// amount that fits, otherwise a fresh unique one.
    fn decoy_amount(&mut self, lo: u64, hi: u64) -> Option<Amount> {
        if !self.used_list.is_empty() && self.rng.random_bool(self.cfg.rtt.collision_rate) {
            let a = self.used_list[self.rng.random_range(0..self.used_list.len())];
            if (lo..=hi).contains(&a.as_zat()) {
                return Some(a);
            }
        }
        self.unique_amount(lo, hi, None)
    }

    /// Smooth weighted round-robin over the fee mix.
    fn next_fee(&mut self) -> Amount {
        let total: i64 = self.cfg.fee_mix.iter().map(|f| f.weight as i64).sum();
        let mut best = 0;
        for (i, f) in self.cfg.fee_mix.iter().enumerate() {
            self.fee_current[i] += f.weight as i64;
            if self.fee_current[i] > self.fee_current[best] {
                best = i;
            }
        }
        self.fee_current[best] -= total;
        self.cfg.fee_mix[best].fee
    }

    fn script(&mut self) -> Vec<u8> {
        let mut s = vec![0u8; 20];
        self.rng.fill(&mut s[..]);
        s
    }


    fn take_random(&mut self, n: usize) -> Vec<(OutPoint, Amount)> {
        let mut picked = Vec::with_capacity(n);
        while picked.len() < n && !self.utxos.is_empty() {
            let i = self.rng.random_range(0..self.utxos.len());
            picked.push(self.utxos.swap_remove(i));
        }
        picked
    }

    /// Removes random UTXOs until their total reaches `need`, giving up
    /// after 20 inputs.
    fn take_until(&mut self, need: u64) -> Vec<(OutPoint, Amount)> {
        let mut picked = Vec::new();
        let mut total = 0u64;
        while total < need && !self.utxos.is_empty() && picked.len() < 20 {
            let i = self.rng.random_range(0..self.utxos.len());
            let u = self.utxos.swap_remove(i);
            total += u.1.as_zat();
            picked.push(u);
        }
        picked
    }

    fn give_back(&mut self, picked: Vec<(OutPoint, Amount)>) {
        self.utxos.extend(picked);
    }

    /// Assigns a unique lock time and the txid, then applies the transaction
    /// to the UTXO set and pool.
    fn finish(&mut self, mut tx: TxRecord) -> TxRecord {
        if !tx.is_coinbase {
            tx.lock_time = self.tx_counter;
            self.tx_counter += 1;
        }
        tx.set_txid(compute_txid(&tx, &self.layout));
        for (vout, o) in tx.outputs.iter().enumerate() {
            self.utxos.push((OutPoint { txid: tx.txid, vout: vout as u32 }, o.value));
        }
        for js in &tx.joinsplits {
            self.pool = self.pool + js.vpub_old.as_zat() - js.vpub_new.as_zat();
        }
        tx
    }

    fn tx(&self, inputs: Vec<OutPoint>, outputs: Vec<TxOutput>, js: Option<(Amount, Amount)>) -> TxRecord {
        TxRecord {
            txid: Hash256::ZERO,
            is_coinbase: false,
            inputs,
            outputs,
            joinsplits: js
                .map(|(vpub_old, vpub_new)| JoinSplitRecord { txid: Hash256::ZERO, js_index: 0, vpub_old, vpub_new })
                .into_iter()
                .collect(),
            lock_time: 0,
        }
    }

    fn coinbase(&mut self, height: u64) -> TxRecord {
        let mut script_id = b"cb".to_vec();
        script_id.extend_from_slice(&height.to_le_bytes());
        let tx = TxRecord {
            txid: Hash256::ZERO,
            is_coinbase: true,
            inputs: vec![],
            outputs: vec![TxOutput { value: self.cfg.block_subsidy, script_id }],
            joinsplits: vec![],
            lock_time: 0,
        };
        self.supply += self.cfg.block_subsidy.as_zat();
        self.finish(tx)
    }

    fn plain(&mut self) -> Option<TxRecord> {
        let fee = self.next_fee().as_zat();
        let n_in = self.rng.random_range(1..=2);
        let picked = self.take_random(n_in);
        let total: u64 = picked.iter().map(|p| p.1.as_zat()).sum();
        if total <= fee + 1 {
            self.give_back(picked);
            return None;
        }
        let rest = total - fee;
        let values = if self.rng.random_bool(0.5) {
            let split = self.rng.random_range(1..rest);
            vec![split, rest - split]
        } else {
            vec![rest]
        };
        let outputs = values.into_iter().map(|v| TxOutput { value: Amount::zat(v), script_id: self.script() }).collect();
        let tx = self.tx(picked.iter().map(|p| p.0).collect(), outputs, None);
        Some(self.finish(tx))
    }

    /// A shielding transaction spending `picked`, returning change.
    fn shield(&mut self, picked: Vec<(OutPoint, Amount)>, amount: Amount, fee: Amount) -> TxRecord {
        let total: u64 = picked.iter().map(|p| p.1.as_zat()).sum();
        let change = total - amount.as_zat() - fee.as_zat();
        let outputs = if change > 0 {
            vec![TxOutput { value: Amount::zat(change), script_id: self.script() }]
        } else {
            vec![]
        };
        let tx = self.tx(picked.iter().map(|p| p.0).collect(), outputs, Some((amount, Amount::ZERO)));
        self.finish(tx)
    }

    /// A deshielding transaction paying `amount − fee` to a fresh script.
    fn deshield(&mut self, amount: Amount, fee: Amount) -> TxRecord {
        let outputs = match amount.checked_sub(fee).filter(|v| !v.is_zero()) {
            Some(v) => vec![TxOutput { value: v, script_id: self.script() }],
            None => vec![],
        };
        let tx = self.tx(vec![], outputs, Some((Amount::ZERO, amount)));
        self.finish(tx)
    }

    fn fully_shielded(&mut self) -> TxRecord {
        let tx = self.tx(vec![], vec![], Some((Amount::ZERO, Amount::ZERO)));
        self.finish(tx)
    }

    fn decoy_shield(&mut self, target: u64) -> Option<TxRecord> {
        let min = self.cfg.rtt.amount_min_zat;
        let fee = self.next_fee();
        let picked = self.take_until(target.saturating_add(fee.as_zat()));
        let total: u64 = picked.iter().map(|p| p.1.as_zat()).sum();
        let hi = (target + target / 10).min(total.saturating_sub(fee.as_zat())).min(self.cfg.rtt.amount_max_zat);
        let lo = (target - target / 10).max(min).min(hi);
        match self.decoy_amount(lo, hi) {
            Some(a) => {
                self.reserve(a);
                let tx = self.shield(picked, a, fee);
                self.decoys.push(tx.joinsplits[0].js_ref());
                Some(tx)
            }
            None => {
                self.give_back(picked);
                None
            }
        }
    }

    fn decoy_deshield(&mut self, target: u64) -> Option<TxRecord> {
        let min = self.cfg.rtt.amount_min_zat;
        let withdrawable = self.pool.saturating_sub(self.pending);
        let hi = (target + target / 10).min(withdrawable).min(self.cfg.rtt.amount_max_zat);
        let lo = (target - target / 10).max(min).min(hi);
        let a = self.decoy_amount(lo, hi)?;
        self.reserve(a);
        let fee = self.next_fee();
        let tx = self.deshield(a, fee);
        self.decoys.push(tx.joinsplits[0].js_ref());
        Some(tx)
    }

    fn decoy_joinsplit(&mut self) -> TxRecord {
        if self.rng.random_bool(self.cfg.fully_shielded_rate) {
            let tx = self.fully_shielded();
            self.decoys.push(tx.joinsplits[0].js_ref());
            return tx;
        }
        let (min, max) = (self.cfg.rtt.amount_min_zat, self.cfg.rtt.amount_max_zat);
        let (shield_first, shield_target, deshield_target) = match self.cfg.target_pool_share {
            Some(p) => {
                let desired = p * self.supply as f64;
                let pool = self.pool as f64;
                let jitter = self.rng.random_range(0.5..1.5);
                let gap = ((desired - pool).abs() * jitter).round() as u64;
                (pool < desired, gap.max(min), gap.max(min))
            }
            None => {
                let s = self.log_uniform(min, max);
                let d = self.log_uniform(min, max);
                (self.rng.random_bool(0.5), s, d)
            }
        };
        let tx = if shield_first {
            self.decoy_shield(shield_target).or_else(|| self.decoy_deshield(deshield_target))
        } else {
            self.decoy_deshield(deshield_target).or_else(|| self.decoy_shield(shield_target))
        };
        tx.unwrap_or_else(|| {
            let tx = self.fully_shielded();
            self.decoys.push(tx.joinsplits[0].js_ref());
            tx
        })
    }

    fn schedule(
        &mut self,
        times: &[i64],
        enabled: &[usize],
        fee1: &[FeeSum],
        fee2: &[FeeSum],
    ) -> Result<Vec<Plan>, SynthError> {
        let r = &self.cfg.rtt;
        let kinds = std::iter::repeat_n(MatchKind::Exact, r.planted_exact_count as usize)
            .chain(std::iter::repeat_n(MatchKind::Fee1, r.planted_fee1_count as usize))
            .chain(std::iter::repeat_n(MatchKind::Fee2, r.planted_fee2_count as usize))
            .collect::<Vec<_>>();
        let window = r.fee_window_hours as i64 * 3600;
        let mut plans = Vec::with_capacity(kinds.len());
        for kind in kinds {
            if enabled.len() < 2 {
                return Err(SynthError::Infeasible("planted links need at least two JoinSplit blocks".into()));
            }
            let max_delay = if kind == MatchKind::Exact { r.delay_max_minutes } else { r.fee_delay_max_minutes };
            let mut placed = None;
            for _ in 0..200 {
                let i = enabled[self.rng.random_range(0..enabled.len() - 1)];
                let delay = self.log_uniform(r.delay_min_minutes, max_delay) as i64 * 60;
                let j = enabled.iter().copied().find(|&j| j > i && times[j] - times[i] >= delay);
                if let Some(j) = j {
                    if kind == MatchKind::Exact || times[j] - times[i] <= window {
                        placed = Some((i, j));
                        break;
                    }
                }
            }
            let (i, j) = placed.ok_or_else(|| {
                SynthError::Infeasible(format!("no block pair fits a {} delay; add blocks", kind.label()))
            })?;
            let fee = match kind {
                MatchKind::Exact => None,
                MatchKind::Fee1 => Some(fee1[self.rng.random_range(0..fee1.len())].clone()),
                MatchKind::Fee2 => Some(fee2[self.rng.random_range(0..fee2.len())].clone()),
            };
            let collision_block = (kind == MatchKind::Exact && self.rng.random_bool(r.collision_rate)).then(|| {
                let between: Vec<usize> = enabled.iter().copied().filter(|&k| k >= i && k < j).collect();
                between[self.rng.random_range(0..between.len())]
            });
            plans.push(Plan {
                kind,
                fee,
                shield_block: i,
                deshield_block: j,
                collision_block,
                amount: None,
                shield: None,
                collided: false,
            });
        }
        Ok(plans)
    }

    fn planted_shield(&mut self, plan: &mut Plan, height: u64) -> Result<TxRecord, SynthError> {
        let (min, max) = (self.cfg.rtt.amount_min_zat, self.cfg.rtt.amount_max_zat);
        let partner = plan.fee.as_ref().map(|f| f.total.as_zat());
        let lo = min + partner.unwrap_or(0);
        let fee = self.next_fee();
        let target = self.log_uniform(lo, max.max(lo));
        let mut picked = self.take_until(target + fee.as_zat());
        let mut total: u64 = picked.iter().map(|p| p.1.as_zat()).sum();
        if total < lo + fee.as_zat() {
            self.give_back(picked);
            picked = self.take_until(lo + fee.as_zat());
            total = picked.iter().map(|p| p.1.as_zat()).sum();
            if total < lo + fee.as_zat() {
                return Err(SynthError::Infeasible(format!("no transparent funds for a planted shield at height {height}")));
            }
        }
        let hi = target.min(total - fee.as_zat()).max(lo);
        let amount = self
            .unique_amount(lo, hi, partner)
            .ok_or_else(|| SynthError::Infeasible(format!("no unique amount left in [{lo}, {hi}] zat")))?;
        self.reserve(amount);
        if let Some(f) = partner {
            self.reserve(Amount::zat(amount.as_zat() - f));
        }
        self.pending += amount.as_zat();
        let tx = self.shield(picked, amount, fee);
        plan.amount = Some(amount);
        plan.shield = Some((tx.joinsplits[0].js_ref(), height));
        Ok(tx)
    }

    fn collision_shield(&mut self, plan: &mut Plan) -> Option<TxRecord> {
        let amount = plan.amount?;
        let fee = self.next_fee();
        let picked = self.take_until(amount.as_zat() + fee.as_zat());
        let total: u64 = picked.iter().map(|p| p.1.as_zat()).sum();
        if total < amount.as_zat() + fee.as_zat() {
            self.give_back(picked);
            return None;
        }
        let tx = self.shield(picked, amount, fee);
        self.decoys.push(tx.joinsplits[0].js_ref());
        plan.collided = true;
        Some(tx)
    }
}

/// Generates a chain and its ground truth. Deterministic in `cfg`.
pub fn generate(cfg: &SynthConfig) -> Result<Synthetic, SynthError> {
    cfg.validate()?;
    let n = cfg.n_blocks as usize;
    let mut gen = Gen {
        cfg,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        layout: WireLayoutConfig::default(),
        utxos: Vec::new(),
        used: HashSet::new(),
        used_list: Vec::new(),
        offsets: vec![0],
        fee_current: vec![0; cfg.fee_mix.len()],
        pool: 0,
        pending: 0,
        supply: 0,
        tx_counter: 0,
        decoys: Vec::new(),
    };

    let mut times = Vec::with_capacity(n);
    let mut t = cfg.start_time;
    for i in 0..n {
        if i > 0 {
            let j = cfg.block_jitter_secs as i64;
            t += cfg.block_interval_secs as i64 + gen.rng.random_range(-j..=j);
        }
        times.push(t);
    }

    let free = ((cfg.joinsplit_free_block_fraction * n as f64).round() as usize).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut gen.rng);
    let mut js_enabled = vec![true; n];
    for &i in &order[..free] {
        js_enabled[i] = false;
    }
    let enabled: Vec<usize> = (0..n).filter(|&i| js_enabled[i]).collect();

    let (fee1, fee2) = if cfg.rtt.plant_base_fees.is_empty() {
        (vec![], vec![])
    } else {
        let sums = |k| enumerate_fee_sums(&cfg.rtt.plant_base_fees, k).map_err(|e| SynthError::Invalid(e.to_string()));
        (sums(1)?.sums, sums(2)?.sums)
    };
    gen.offsets.extend(fee1.iter().chain(&fee2).map(|f| f.total.as_zat()));
    gen.offsets.sort_unstable();
    gen.offsets.dedup();

    let mut plans = gen.schedule(&times, &enabled, &fee1, &fee2)?;
    let mut shield_at = vec![Vec::new(); n];
    let mut deshield_at = vec![Vec::new(); n];
    let mut collide_at = vec![Vec::new(); n];
    for (pid, p) in plans.iter().enumerate() {
        shield_at[p.shield_block].push(pid);
        deshield_at[p.deshield_block].push(pid);
        if let Some(k) = p.collision_block {
            collide_at[k].push(pid);
        }
    }

    let mut blocks = Vec::with_capacity(n);
    let mut links = Vec::with_capacity(plans.len());
    for b in 0..n {
        let height = cfg.start_height + b as u64;
        let mut txs = vec![gen.coinbase(height)];
        for &pid in &deshield_at[b] {
            let plan = &plans[pid];
            let amount = plan.amount.expect("shield precedes deshield");
            let fee_adj = plan.fee.as_ref().map_or(Amount::ZERO, |f| f.total);
            let fee = gen.next_fee();
            let tx = gen.deshield(amount - fee_adj, fee);
            gen.pending -= amount.as_zat();
            let (shield, shield_height) = plan.shield.expect("shield recorded");
            links.push(PlantedLink {
                kind: plan.kind,
                shield,
                deshield: tx.joinsplits[0].js_ref(),
                shield_height,
                deshield_height: height,
                amount,
                fee: fee_adj,
                fee_parts: plan.fee.as_ref().map(|f| f.parts.clone()).unwrap_or_default(),
                collided: plan.collided,
            });
            txs.push(tx);
        }
        for &pid in &shield_at[b] {
            let mut plan = plans[pid].clone();
            txs.push(gen.planted_shield(&mut plan, height)?);
            plans[pid] = plan;
        }
        for &pid in &collide_at[b] {
            let mut plan = plans[pid].clone();
            if let Some(tx) = gen.collision_shield(&mut plan) {
                txs.push(tx);
            }
            plans[pid] = plan;
        }

        let slots = gen.rng.random_range(cfg.txs_per_block_min..=cfg.txs_per_block_max) as usize;
        let mut is_js: Vec<bool> = if js_enabled[b] {
            (0..slots).map(|_| gen.rng.random_bool(cfg.fraction_tx_with_joinsplit)).collect()
        } else {
            vec![false; slots]
        };
        let planted_here = txs.iter().any(TxRecord::has_joinsplit);
        if js_enabled[b] && cfg.fraction_tx_with_joinsplit > 0.0 && !planted_here && !is_js.contains(&true) {
            match is_js.first_mut() {
                Some(first) => *first = true,
                None => is_js.push(true),
            }
        }
        for js in is_js {
            let tx = if js { Some(gen.decoy_joinsplit()) } else { gen.plain() };
            txs.extend(tx);
        }

        let mut preimage = Vec::with_capacity(16 + 32 * txs.len());
        preimage.extend_from_slice(&height.to_le_bytes());
        preimage.extend_from_slice(&times[b].to_le_bytes());
        for tx in &txs {
            preimage.extend_from_slice(&tx.txid.0);
        }
        blocks.push(BlockRecord { height, hash: Hash256::double_sha256(&preimage), time: times[b], txs });
    }

    links.sort_by_key(|l| (l.shield_height, l.shield));
    let chain_id = blocks.last().map_or(Hash256::ZERO, |b: &BlockRecord| b.hash);
    let mut decoys = gen.decoys;
    decoys.sort();
    Ok(Synthetic {
        batch: IngestBatch { blocks, source: Source::Synthetic },
        truth: GroundTruth { seed: cfg.seed, chain_id, planted_links: links, decoy_refs: decoys },
    })
}

/// Appends a shielding of `amount` to the block at `height`, spending an
/// outpoint from outside the chain. Returns the new JoinSplit's reference.
pub fn inject_duplicate_shield(blocks: &mut [BlockRecord], height: u64, amount: Amount) -> Option<JsRef> {
    let block = blocks.iter_mut().find(|b| b.height == height)?;
    let nonce = u32::MAX - block.txs.len() as u32;
    let mut tx = TxRecord {
        txid: Hash256::ZERO,
        is_coinbase: false,
        inputs: vec![OutPoint { txid: Hash256::double_sha256(format!("injected {height} {nonce}").as_bytes()), vout: 0 }],
        outputs: vec![],
        joinsplits: vec![JoinSplitRecord { txid: Hash256::ZERO, js_index: 0, vpub_old: amount, vpub_new: Amount::ZERO }],
        lock_time: nonce,
    };
    tx.set_txid(compute_txid(&tx, &WireLayoutConfig::default()));
    let js = tx.joinsplits[0].js_ref();
    block.txs.push(tx);
    Some(js)
}
