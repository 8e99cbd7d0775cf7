//! Subcommand implementations behind the `zlinkage` binary.
//!
//! Each command returns the text to print on success. Errors carry the
//! process exit code: 1 when `verify` finds a problem, 2 for bad input
//! (arguments, config, source data, store state) and 3 for internal
//! failures such as an unwritable output directory.

use std::fmt::Write as _;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analytics::{fee_histogram, AnalyticsError};
use crate::config::{ConfigError, RunConfig};
use crate::ingest::playback::RpcFixture;
use crate::ingest::rpc::{HttpTransport, RpcTransport};
use crate::ingest::wire::write_raw_blocks;
use crate::ingest::{read_jsonl_file, read_raw_file, write_jsonl, IngestBatch, IngestError, RpcClient, Source};
use crate::report::{analytics_bundle, eval_file, rtt_bundle, summary, AddressTags, ReportError, ReportOptions};
use crate::rtt::{build_report, detect, find_exact_rtts, DetectConfig, RttError, RttReport};
use crate::store::{ChainIndex, Snapshot, Store, StoreError};
use crate::synth::{generate, oracle_exact_rtts, score, GroundTruth, SynthConfig, SynthError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error("verification failed:\n{0}")]
    VerifyFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::VerifyFailed(_) => 1,
            CliError::Input(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Io(_) => CliError::Internal(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<RttError> for CliError {
    fn from(e: RttError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<AnalyticsError> for CliError {
    fn from(e: AnalyticsError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::Io(_) => CliError::Internal(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Io(_) => CliError::Internal(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

fn write_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Internal(format!("cannot write {}: {e}", path.display()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IngestSource {
    Raw(PathBuf),
    Jsonl(PathBuf),
    /// Live node at the configured URL.
    Rpc,
    /// Recorded RPC exchanges, replayed offline.
    RpcFixture(PathBuf),
}

#[derive(Debug, Clone)]
pub struct IngestArgs {
    pub source: IngestSource,
    pub from: Option<u64>,
    pub to: Option<u64>,
}

/// Blocks fetched and committed per RPC round, so an interrupted ingest
/// keeps its progress.
const RPC_CHUNK: u64 = 500;

fn filter_range(mut batch: IngestBatch, from: Option<u64>, to: Option<u64>) -> Result<IngestBatch, CliError> {
    if let (Some(f), Some(t)) = (from, to) {
        if f > t {
            return Err(IngestError::InvalidRange { from: f, to: t }.into());
        }
    }
    batch.blocks.retain(|b| from.is_none_or(|f| b.height >= f) && to.is_none_or(|t| b.height <= t));
    Ok(batch)
}

fn ingest_rpc<T: RpcTransport>(
    store: &mut Store,
    client: &RpcClient<T>,
    from: Option<u64>,
    to: Option<u64>,
) -> Result<(usize, usize, usize, usize), CliError> {
    let from = from.unwrap_or_else(|| store.tip_height().map_or(0, |t| t + 1));
    let to = match to {
        Some(t) => t,
        None => client.tip_height().map_err(IngestError::from)?,
    };
    let mut totals = (0, 0, 0, 0);
    if from > to {
        return Ok(totals);
    }
    let mut start = from;
    while start <= to {
        let end = (start + RPC_CHUNK - 1).min(to);
        let batch = client.fetch_range(start, end)?;
        let s = store.append_blocks(&batch)?;
        totals = (totals.0 + s.new_blocks, totals.1 + s.new_txs, totals.2 + s.new_joinsplits, totals.3 + s.skipped_blocks);
        start = end + 1;
    }
    Ok(totals)
}

pub fn cmd_ingest(cfg: &RunConfig, args: &IngestArgs) -> Result<String, CliError> {
    let mut store = Store::open(&cfg.store_path)?;
    let (blocks, txs, js, skipped) = match &args.source {
        IngestSource::Raw(p) => {
            let batch = filter_range(read_raw_file(p, &cfg.wire)?, args.from, args.to)?;
            let s = store.append_blocks(&batch)?;
            (s.new_blocks, s.new_txs, s.new_joinsplits, s.skipped_blocks)
        }
        IngestSource::Jsonl(p) => {
            let batch = filter_range(read_jsonl_file(p)?, args.from, args.to)?;
            let s = store.append_blocks(&batch)?;
            (s.new_blocks, s.new_txs, s.new_joinsplits, s.skipped_blocks)
        }
        IngestSource::RpcFixture(p) => {
            let f = std::fs::File::open(p).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
            let fixture = RpcFixture::read_jsonl(BufReader::new(f))
                .map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
            let mut client = RpcClient::new(fixture);
            client.concurrency = cfg.rpc.concurrency;
            ingest_rpc(&mut store, &client, args.from, args.to)?
        }
        IngestSource::Rpc => {
            let url = cfg.rpc.url.clone().ok_or_else(|| {
                CliError::Input("no RPC URL (use --rpc-url, ZLINKAGE_RPC_URL or [rpc] url)".into())
            })?;
            let mut client = RpcClient::new(HttpTransport::new(url, cfg.rpc.credentials.clone()));
            client.concurrency = cfg.rpc.concurrency;
            ingest_rpc(&mut store, &client, args.from, args.to)?
        }
    };
    let tip = store.tip_height().map_or_else(|| "none".to_owned(), |t| t.to_string());
    Ok(format!("{blocks} blocks, {txs} txs, {js} joinsplits ingested ({skipped} already stored); tip {tip}\n"))
}

fn load(cfg: &RunConfig) -> Result<Snapshot, CliError> {
    if !cfg.store_path.exists() {
        return Err(CliError::Input(format!("store {} does not exist; run ingest first", cfg.store_path.display())));
    }
    Ok(Store::load_snapshot(&cfg.store_path)?)
}

fn report_options(cfg: &RunConfig) -> Result<ReportOptions, CliError> {
    let tags = match &cfg.address_tags {
        Some(p) => AddressTags::load(p).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?,
        None => AddressTags::default(),
    };
    Ok(ReportOptions { exact_coins: cfg.exact_coins, formats: cfg.formats.clone(), tags })
}

/// The detector config, with base fees taken from the chain if requested.
pub fn effective_detect_config(cfg: &RunConfig, chain: &ChainIndex) -> DetectConfig {
    let mut d = cfg.detect.clone();
    if cfg.fees_from_chain {
        let top = fee_histogram(chain).top_fees(5);
        if !top.is_empty() {
            d.base_fees = top.into_iter().filter(|f| !f.is_zero()).collect();
        }
    }
    d
}

fn run_detection(cfg: &RunConfig, chain: &ChainIndex) -> Result<RttReport, CliError> {
    let detection = detect(chain, &effective_detect_config(cfg, chain))?;
    Ok(build_report(chain, &detection, &cfg.top_n)?)
}

pub fn cmd_analyze(cfg: &RunConfig) -> Result<String, CliError> {
    let snap = load(cfg)?;
    if snap.is_empty() {
        return Err(AnalyticsError::EmptyChain.into());
    }
    let opts = report_options(cfg)?;
    let report = run_detection(cfg, &snap)?;
    let mut bundle = analytics_bundle(&snap, &opts)?;
    bundle.insert("summary.md", summary(&snap, Some(&report), &opts));
    bundle.retain_formats(&opts.formats);
    bundle.write_to(&cfg.out_dir).map_err(|e| write_err(&cfg.out_dir, e))?;
    let names: Vec<&str> = bundle.names().collect();
    Ok(format!("wrote {} to {}\n", names.join(", "), cfg.out_dir.display()))
}

pub fn cmd_rtt(cfg: &RunConfig) -> Result<String, CliError> {
    let snap = load(cfg)?;
    let opts = report_options(cfg)?;
    let report = run_detection(cfg, &snap)?;
    let mut bundle = rtt_bundle(&snap, &report, &opts);
    bundle.insert("summary.md", summary(&snap, Some(&report), &opts));
    bundle.retain_formats(&opts.formats);
    bundle.write_to(&cfg.out_dir).map_err(|e| write_err(&cfg.out_dir, e))?;
    Ok(format!(
        "{} exact, {} 1-fee, {} 2-fee matches; {}% of shielded coins; wrote {}\n",
        report.exact_count,
        report.fee1_count,
        report.fee2_count,
        report.matched_coin_share().percent_1dp(),
        cfg.out_dir.display()
    ))
}

#[derive(Debug, Clone, Default)]
pub struct SynthOutputs {
    pub raw: bool,
    pub rpc_fixture: bool,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<String, CliError> {
    std::fs::write(path, bytes).map_err(|e| write_err(path, e))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

pub fn cmd_synth(cfg: &SynthConfig, wire: &crate::ingest::WireLayoutConfig, out_dir: &Path, outputs: &SynthOutputs) -> Result<String, CliError> {
    let s = generate(cfg)?;
    std::fs::create_dir_all(out_dir).map_err(|e| write_err(out_dir, e))?;
    let mut msg = format!(
        "{} blocks, {} txs, {} joinsplits, {} planted links\n",
        s.batch.blocks.len(),
        s.batch.tx_count(),
        s.batch.joinsplit_count(),
        s.truth.planted_links.len()
    );
    let mut chain = Vec::new();
    write_jsonl(&mut chain, &s.batch.blocks).map_err(|e| CliError::Internal(e.to_string()))?;
    let mut truth = Vec::new();
    s.truth.write_jsonl(&mut truth).map_err(|e| CliError::Internal(e.to_string()))?;
    let mut files = vec![("chain.jsonl", chain), ("truth.jsonl", truth)];
    if outputs.raw {
        files.push(("chain.raw", write_raw_blocks(&s.batch.blocks, wire)));
    }
    if outputs.rpc_fixture {
        let mut buf = Vec::new();
        RpcFixture::from_blocks(&s.batch.blocks).write_jsonl(&mut buf).map_err(|e| CliError::Internal(e.to_string()))?;
        files.push(("rpc_fixture.jsonl", buf));
    }
    for (name, bytes) in files {
        let digest = write_file(&out_dir.join(name), &bytes)?;
        let _ = writeln!(msg, "{digest}  {}", out_dir.join(name).display());
    }
    Ok(msg)
}

pub fn cmd_eval(cfg: &RunConfig, truth_path: &Path) -> Result<String, CliError> {
    let snap = load(cfg)?;
    let f = std::fs::File::open(truth_path).map_err(|e| CliError::Input(format!("{}: {e}", truth_path.display())))?;
    let truth = GroundTruth::read_jsonl(BufReader::new(f))?;
    let detection = detect(&snap, &effective_detect_config(cfg, &snap))?;
    let sc = score(&snap, &detection.all(), &truth)?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| write_err(&cfg.out_dir, e))?;
    let path = cfg.out_dir.join("eval.csv");
    std::fs::write(&path, eval_file(&sc)).map_err(|e| write_err(&path, e))?;
    let mut msg = format!(
        "precision={} recall={} (tp={} fp={} fn={})\n",
        sc.precision().decimal_string(3),
        sc.recall().decimal_string(3),
        sc.true_positives,
        sc.false_positives,
        sc.false_negatives
    );
    let _ = writeln!(
        msg,
        "detected coin share {}%, planted coin share {}%",
        sc.detected_coin_share().percent_1dp(),
        sc.planted_coin_share().percent_1dp()
    );
    for (kind, k) in &sc.by_kind {
        let _ = writeln!(
            msg,
            "  {:5} precision={} recall={}",
            kind.label(),
            k.precision().decimal_string(3),
            k.recall().decimal_string(3)
        );
    }
    Ok(msg)
}

/// Store self-checks plus an oracle comparison on a random window of
/// `sample_blocks` consecutive blocks.
pub fn cmd_verify(cfg: &RunConfig, sample_blocks: usize, seed: u64) -> Result<String, CliError> {
    let snap = load(cfg)?;
    let mut out = String::new();
    let mut failures = Vec::new();
    let mut check = |ok: bool, what: String| {
        let _ = writeln!(out, "{} {what}", if ok { "ok  " } else { "FAIL" });
        if !ok {
            failures.push(what);
        }
    };

    check(snap.indexes_consistent(), "incremental indexes match a full rebuild".into());
    let counted: u64 = snap.blocks().map(|b| b.joinsplits().count() as u64).sum();
    check(counted == snap.joinsplit_count(), format!("JoinSplit count {counted}"));
    let bad = snap.blocks().filter(|b| b.validate().is_err()).count();
    check(bad == 0, format!("{} blocks, {bad} failing record checks", snap.block_count()));

    let blocks: Vec<_> = snap.blocks().cloned().collect();
    if !blocks.is_empty() && sample_blocks > 0 {
        let len = sample_blocks.min(blocks.len());
        let start = ChaCha8Rng::seed_from_u64(seed).random_range(0..=blocks.len() - len);
        let window = blocks[start..start + len].to_vec();
        let (lo, hi) = (window[0].height, window[len - 1].height);
        let batch = IngestBatch { blocks: window.clone(), source: Source::Synthetic };
        match oracle_exact_rtts(&batch) {
            Ok(oracle) => {
                let indexed = find_exact_rtts(&Snapshot::from_blocks(window));
                check(
                    oracle == indexed,
                    format!("oracle agrees on heights {lo}..={hi} ({} exact matches)", indexed.len()),
                );
            }
            Err(e) => {
                let _ = writeln!(out, "skip oracle on heights {lo}..={hi}: {e}");
            }
        }
    }
    let _ = writeln!(out, "content hash {}", snap.content_hash_hex());
    if failures.is_empty() {
        Ok(out)
    } else {
        Err(CliError::VerifyFailed(out))
    }
}
