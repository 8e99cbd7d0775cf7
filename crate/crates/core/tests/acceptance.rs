//! One PASS/FAIL line per acceptance criterion. Runs without the libtest
//! harness so the lines are always printed, in order.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use zlinkage::amount::Amount;
use zlinkage::analytics::{block_participation, pool_series};
use zlinkage::fixtures::{appendix_jsonl, APPENDIX_SAMPLES};
use zlinkage::ingest::playback::{PlaybackServer, RpcFixture};
use zlinkage::ingest::rpc::HttpTransport;
use zlinkage::ingest::wire::write_raw_blocks;
use zlinkage::ingest::{read_jsonl, read_raw_file, RpcClient, WireLayoutConfig};
use zlinkage::rtt::{bucket_by_time, detect, enumerate_fee_sums, find_exact_rtts, DetectConfig, MatchKind, DEFAULT_BASE_FEES};
use zlinkage::store::{Snapshot, Store};
use zlinkage::synth::{generate, inject_duplicate_shield, oracle_exact_rtts, score, RttBehavior, SynthConfig};

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn coins(s: &str) -> Amount {
    Amount::parse_coins(s).unwrap()
}

fn fee_sum_enumeration() -> Outcome {
    let expected: BTreeSet<Amount> = [
        "0.002", "0.0012", "0.0011", "0.00109", "0.00105", "0.0004", "0.0003", "0.00029", "0.00025", "0.00019",
        "0.00018", "0.00015", "0.00014",
    ]
    .into_iter()
    .map(coins)
    .collect();
    let set = enumerate_fee_sums(&DEFAULT_BASE_FEES, 2).unwrap();
    let got: BTreeSet<Amount> = set.totals().into_iter().collect();
    let excluded = !got.contains(&coins("0.0002")) && !got.contains(&coins("0.0001"));
    outcome(got == expected && set.sums.len() == 13 && excluded, format!("{} totals, 0.0002 and 0.0001 excluded: {excluded}", got.len()))
}

fn appendix_replay() -> Outcome {
    let batch = read_jsonl(std::io::Cursor::new(appendix_jsonl())).unwrap();
    let chain = Snapshot::try_from_batch(&batch).unwrap();
    let detection = detect(&chain, &DetectConfig::default()).unwrap();
    let all = detection.all();
    let mut missing = Vec::new();
    for s in &APPENDIX_SAMPLES {
        let hit = all.iter().any(|m| {
            m.shield.js.txid.to_string() == s.shield_txid
                && m.deshield.js.txid.to_string() == s.deshield_txid
                && m.amount == coins(s.vpub_old)
                && m.deshielded_amount() == coins(s.vpub_new)
                && m.fee_adjustment == coins(s.fee)
                && m.kind == s.kind
                && m.delta_minutes == s.delta_minutes
                && zlinkage::rtt::TIME_BUCKET_LABELS[zlinkage::rtt::report::bucket_index(m.delta_minutes)] == s.bucket
        });
        if !hit {
            missing.push(s.shield_txid);
        }
    }
    let exact_buckets: Vec<u64> = bucket_by_time(&detection.exact).iter().map(|r| r.count).collect();
    let pass = missing.is_empty() && all.len() == 6 && exact_buckets == [2, 0, 1, 0, 0, 1, 0];
    outcome(
        pass,
        format!(
            "{} matches ({} exact, {} 1-fee, {} 2-fee), exact buckets {:?}, unmatched samples {:?}",
            all.len(),
            detection.exact.len(),
            detection.fee1.len(),
            detection.fee2.len(),
            exact_buckets,
            missing
        ),
    )
}

fn oracle_equivalence() -> Outcome {
    let (mut max_blocks, mut max_js, mut matches, mut collided) = (0, 0, 0, 0);
    let mut bad = Vec::new();
    for seed in 1..=200 {
        let s = generate(&common::oracle_config(seed)).unwrap();
        max_blocks = max_blocks.max(s.batch.blocks.len());
        max_js = max_js.max(s.batch.joinsplit_count());
        collided += s.truth.planted_links.iter().filter(|l| l.collided).count();
        let oracle = oracle_exact_rtts(&s.batch).unwrap();
        let indexed = find_exact_rtts(&Snapshot::try_from_batch(&s.batch).unwrap());
        matches += indexed.len();
        if oracle != indexed {
            bad.push(seed);
        }
    }
    let pass = bad.is_empty() && max_blocks <= 50 && max_js <= 500;
    outcome(
        pass,
        format!("200 chains (max {max_blocks} blocks, {max_js} JoinSplits, {collided} collided plants), {matches} matches, mismatching seeds {bad:?}"),
    )
}

fn planted_recovery() -> Outcome {
    let (mut tp, mut fp, mut fneg) = (0, 0, 0);
    let mut kinds = std::collections::BTreeMap::<MatchKind, (u64, u64)>::new();
    for seed in 1..=50 {
        let s = generate(&SynthConfig { seed, n_blocks: 400, ..Default::default() }).unwrap();
        let chain = Snapshot::try_from_batch(&s.batch).unwrap();
        let found = detect(&chain, &DetectConfig::default()).unwrap().all();
        let sc = score(&chain, &found, &s.truth).unwrap();
        tp += sc.true_positives;
        fp += sc.false_positives;
        fneg += sc.false_negatives;
        for (k, v) in &sc.by_kind {
            let e = kinds.entry(*k).or_default();
            e.0 += v.true_positives;
            e.1 += v.false_negatives;
        }
    }
    let recall = |k| kinds.get(&k).map_or((0, 0), |&(t, f)| (t, t + f));
    let (e, f1, f2) = (recall(MatchKind::Exact), recall(MatchKind::Fee1), recall(MatchKind::Fee2));
    let pass = fp == 0 && fneg == 0 && tp > 0 && e.1 > 0 && f1.1 > 0 && f2.1 > 0;
    outcome(
        pass,
        format!("50 seeds: tp {tp} fp {fp} fn {fneg}; recovered exact {}/{}, fee1 {}/{}, fee2 {}/{}", e.0, e.1, f1.0, f1.1, f2.0, f2.1),
    )
}

fn uniqueness_destruction() -> Outcome {
    let (mut tested, mut survived) = (0, Vec::new());
    for seed in 1..=10 {
        let cfg = SynthConfig { seed, n_blocks: 150, rtt: RttBehavior { planted_exact_count: 6, planted_fee1_count: 2, planted_fee2_count: 2, ..Default::default() }, ..Default::default() };
        let s = generate(&cfg).unwrap();
        for link in &s.truth.planted_links {
            let mut blocks = s.batch.blocks.clone();
            inject_duplicate_shield(&mut blocks, link.shield_height, link.amount).expect("height exists");
            let chain = Snapshot::from_blocks(blocks);
            let found = detect(&chain, &DetectConfig::default()).unwrap().all();
            tested += 1;
            if found.iter().any(|m| m.deshield.js == link.deshield) {
                survived.push((seed, link.kind.label()));
            }
        }
    }
    outcome(survived.is_empty() && tested > 0, format!("{tested} planted links tested, surviving matches {survived:?}"))
}

fn pool_accounting() -> Outcome {
    let mut chains = 0;
    let mut problems = Vec::new();
    let configs = (1..=30)
        .map(|seed| SynthConfig { seed, n_blocks: 300, ..Default::default() })
        .chain((1..=30).map(common::oracle_config));
    for cfg in configs {
        let s = generate(&cfg).unwrap();
        let chain = Snapshot::try_from_batch(&s.batch).unwrap();
        let series = pool_series(&chain);
        let (mut old, mut new, mut prev) = (0i64, 0i64, 0i64);
        let mut ok = series.points.len() == chain.block_count();
        for (block, point) in chain.blocks().zip(&series.points) {
            let d_old: i64 = block.joinsplits().map(|j| j.vpub_old.as_zat() as i64).sum();
            let d_new: i64 = block.joinsplits().map(|j| j.vpub_new.as_zat() as i64).sum();
            old += d_old;
            new += d_new;
            ok &= point.height == block.height && point.shielded_pool == prev + d_old - d_new && point.shielded_pool >= 0;
            prev = point.shielded_pool;
        }
        ok &= series.points.last().map(|p| p.shielded_pool) == Some(old - new);
        chains += 1;
        if !ok {
            problems.push(cfg.seed);
        }
    }
    outcome(problems.is_empty(), format!("{chains} chains, final pool = Σvpub_old − Σvpub_new, prefix-consistent, non-negative; failing seeds {problems:?}"))
}

fn ingest_equivalence() -> Outcome {
    let s = common::synthetic(33, 200);
    let dir = tempfile::tempdir().unwrap();
    let layout = WireLayoutConfig::default();
    let raw_path = dir.path().join("c.raw");
    std::fs::write(&raw_path, write_raw_blocks(&s.batch.blocks, &layout)).unwrap();
    let raw = read_raw_file(&raw_path, &layout).unwrap();
    let mut jsonl_bytes = Vec::new();
    zlinkage::ingest::write_jsonl(&mut jsonl_bytes, &s.batch.blocks).unwrap();
    let jsonl = read_jsonl(std::io::Cursor::new(jsonl_bytes)).unwrap();
    let server = PlaybackServer::start(RpcFixture::from_blocks(&s.batch.blocks)).unwrap();
    let rpc = RpcClient::new(HttpTransport::new(server.url(), None)).fetch_range(0, 199).unwrap();

    let hashes: Vec<String> = [raw, jsonl, rpc]
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let path = dir.path().join(format!("{i}.store"));
            Store::open(&path).unwrap().append_blocks(b).unwrap();
            Store::load_snapshot(&path).unwrap().content_hash_hex()
        })
        .collect();
    let pass = hashes.iter().all(|h| *h == hashes[0]);
    outcome(pass, format!("raw / jsonl / rpc store hashes {}", hashes.iter().map(|h| &h[..12]).collect::<Vec<_>>().join(" / ")))
}

fn generator_echo() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    for seed in [1, 2, 3] {
        let s = generate(&SynthConfig { seed, n_blocks: 2000, ..Default::default() }).unwrap();
        let chain = Snapshot::try_from_batch(&s.batch).unwrap();
        let free = block_participation(&chain).unwrap().no_joinsplit_block_share().percent_f64();
        let pool = pool_series(&chain).average_share_percent();
        pass &= (free - 40.0).abs() <= 2.0 && (pool - 3.5).abs() <= 2.0;
        lines.push(format!("seed {seed}: {free:.1}% JoinSplit-free, {pool:.2}% mean pool share"));
    }
    outcome(pass, lines.join("; "))
}

fn performance() -> Outcome {
    let t = Instant::now();
    let blocks = common::bulk_chain(1_000_000, 100, 7);
    let chain = Snapshot::from_blocks(blocks);
    let build = t.elapsed();
    let t = Instant::now();
    let matches = find_exact_rtts(&chain);
    let detect_time = t.elapsed();

    let sample = zlinkage::ingest::IngestBatch { blocks: common::bulk_chain(4_000, 100, 7), source: zlinkage::ingest::Source::Synthetic };
    let t = Instant::now();
    oracle_exact_rtts(&sample).unwrap();
    let oracle_small = t.elapsed().as_secs_f64();
    let projected = oracle_small * (1_000_000f64 / 4_000f64).powi(2);
    let optimized = !cfg!(debug_assertions);
    let pass = detect_time < Duration::from_secs(10) && chain.joinsplit_count() == 1_000_000;
    outcome(
        pass,
        format!(
            "{} JoinSplits indexed in {:.1} s, exact detection {:.2} s ({} matches, {} build); oracle {:.3} s at 4,000 JoinSplits, ≈{:.0} s projected at 1,000,000",
            chain.joinsplit_count(),
            build.as_secs_f64(),
            detect_time.as_secs_f64(),
            matches.len(),
            if optimized { "optimized" } else { "debug" },
            oracle_small,
            projected
        ),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("fee-sum enumeration", fee_sum_enumeration),
        ("appendix fixture replay", appendix_replay),
        ("oracle equivalence", oracle_equivalence),
        ("planted-link recovery", planted_recovery),
        ("uniqueness destruction", uniqueness_destruction),
        ("pool accounting", pool_accounting),
        ("ingest equivalence", ingest_equivalence),
        ("generator echo", generator_echo),
        ("performance", performance),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let o = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            outcome(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        if !o.pass {
            failed += 1;
        }
        println!("{} {name} [{:.2} s]: {}", if o.pass { "PASS" } else { "FAIL" }, start.elapsed().as_secs_f64(), o.detail);
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
