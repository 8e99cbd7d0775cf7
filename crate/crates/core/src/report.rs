//! Rendering of analysis and detection results into report files.
//!
//! Every file starts with a `# zlinkage <version>` line followed by a row
//! naming its columns. CSV files use RFC 4180 quoting; `.dat` files are
//! whitespace-separated columns for plotting tools. Rendering is pure, so
//! the same inputs always give byte-identical files.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::amount::{format_signed_zat, Amount};
use crate::analytics::{block_participation, census, fee_histogram, pool_series, AnalyticsError};
use crate::model::{JoinSplitKind, TxRecord};
use crate::rtt::report::{bucket_index, BucketRow, FeeTableRow};
use crate::rtt::{RttMatch, RttReport, TIME_BUCKET_LABELS};
use crate::store::ChainIndex;
use crate::synth::EvalScore;

pub const TOOL_VERSION: &str = concat!("zlinkage ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error("address tags line {line}: {msg}")]
    Tags { line: u64, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Markdown,
    Plotdata,
}

impl OutputFormat {
    pub const ALL: [OutputFormat; 3] = [OutputFormat::Csv, OutputFormat::Markdown, OutputFormat::Plotdata];

    pub fn for_file(name: &str) -> OutputFormat {
        if name.ends_with(".md") {
            OutputFormat::Markdown
        } else if name.ends_with(".dat") {
            OutputFormat::Plotdata
        } else {
            OutputFormat::Csv
        }
    }
}

/// Labels for transparent scripts, e.g. known mining pool payout addresses.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AddressTags(BTreeMap<Vec<u8>, String>);

impl AddressTags {
    /// Reads a CSV with a `script_id,label` header; script ids are hex.
    pub fn from_csv<R: Read>(r: R) -> Result<AddressTags, ReportError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let mut map = BTreeMap::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i as u64 + 2;
            let rec = rec.map_err(|e| ReportError::Tags { line, msg: e.to_string() })?;
            let (Some(script), Some(label)) = (rec.get(0), rec.get(1)) else {
                return Err(ReportError::Tags { line, msg: "expected script_id,label".into() });
            };
            let script = hex::decode(script).map_err(|e| ReportError::Tags { line, msg: e.to_string() })?;
            map.insert(script, label.to_owned());
        }
        Ok(AddressTags(map))
    }

    pub fn load(path: &Path) -> Result<AddressTags, ReportError> {
        AddressTags::from_csv(std::fs::File::open(path)?)
    }

    pub fn insert(&mut self, script_id: Vec<u8>, label: impl Into<String>) {
        self.0.insert(script_id, label.into());
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn labels<'a>(&self, scripts: impl Iterator<Item = &'a [u8]>) -> String {
        let set: BTreeSet<&str> = scripts.filter_map(|s| self.0.get(s).map(String::as_str)).collect();
        set.into_iter().collect::<Vec<_>>().join(";")
    }
}

#[derive(Debug, Clone)]
pub struct ReportOptions {
    /// Full 8-decimal coin totals instead of whole coins.
    pub exact_coins: bool,
    pub formats: BTreeSet<OutputFormat>,
    pub tags: AddressTags,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions { exact_coins: false, formats: OutputFormat::ALL.into_iter().collect(), tags: AddressTags::default() }
    }
}

impl ReportOptions {
    fn coins(&self, a: Amount) -> String {
        if self.exact_coins {
            a.to_string()
        } else {
            a.whole_coins().to_string()
        }
    }
}

/// Rendered report files, keyed by file name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReportBundle {
    files: BTreeMap<String, String>,
}

impl ReportBundle {
    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.get(name).map(String::as_str)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.keys().map(String::as_str)
    }

    pub fn insert(&mut self, name: &str, body: String) {
        self.files.insert(name.to_owned(), body);
    }

    pub fn extend(&mut self, other: ReportBundle) {
        self.files.extend(other.files);
    }

    /// Keeps only files of the selected formats.
    pub fn retain_formats(&mut self, formats: &BTreeSet<OutputFormat>) {
        self.files.retain(|name, _| formats.contains(&OutputFormat::for_file(name)));
    }

    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, body) in &self.files {
            std::fs::write(dir.join(name), body)?;
        }
        Ok(())
    }
}

fn csv_file(columns: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(columns).expect("write to memory");
    for row in rows {
        w.write_record(&row).expect("write to memory");
    }
    let body = String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv is utf-8");
    format!("# {TOOL_VERSION}\n{body}")
}

fn dat_file(columns: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = format!("# {TOOL_VERSION}\n# {}\n", columns.join(" "));
    for row in rows {
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// `census.csv`, `participation_histogram.dat`, `pool_series.dat` and
/// `fee_table.csv`. Fails on an empty chain.
pub fn analytics_bundle(chain: &ChainIndex, opts: &ReportOptions) -> Result<ReportBundle, ReportError> {
    let participation = block_participation(chain)?;
    let c = census(chain);
    let pool = pool_series(chain);
    let fees = fee_histogram(chain);
    let mut b = ReportBundle::default();

    let row = |metric: &str, value: String, pct: String| vec![metric.to_owned(), value, pct];
    let mut rows = vec![
        row("blocks", participation.blocks.len().to_string(), String::new()),
        row(
            "blocks_without_joinsplit",
            participation.blocks_without_joinsplits.to_string(),
            participation.no_joinsplit_block_share().percent_1dp(),
        ),
        row("transactions", c.tx_count.to_string(), String::new()),
        row("transactions_with_joinsplit", c.txs_with_joinsplit.to_string(), c.tx_with_joinsplit_share().percent_1dp()),
        row("joinsplits", c.joinsplit_count.to_string(), String::new()),
    ];
    for (name, kind) in [
        ("shielding", JoinSplitKind::Shielding),
        ("deshielding", JoinSplitKind::Deshielding),
        ("fully_shielded", JoinSplitKind::FullyShielded),
        ("mixed", JoinSplitKind::Mixed),
    ] {
        rows.push(row(name, c.kind_count(kind).to_string(), c.kind_share(kind).percent_1dp()));
    }
    rows.push(row("with_vpub_old", c.with_shielding().to_string(), c.with_shielding_share().percent_1dp()));
    rows.push(row("with_vpub_new", c.with_deshielding().to_string(), c.with_deshielding_share().percent_1dp()));
    rows.push(row("shielded_inflow_coins", opts.coins(c.total_shielded_inflow), String::new()));
    rows.push(row("deshielded_outflow_coins", opts.coins(c.total_deshielded_outflow), String::new()));
    rows.push(row("final_pool_share", String::new(), pool.final_share().percent_1dp()));
    rows.push(row("mean_pool_share", String::new(), format!("{:.1}", pool.average_share_percent())));
    b.insert("census.csv", csv_file(&["metric", "value", "percent"], rows));

    b.insert(
        "participation_histogram.dat",
        dat_file(
            &["percent_tx_with_joinsplit", "blocks"],
            participation.histogram.iter().enumerate().map(|(i, n)| vec![i.to_string(), n.to_string()]),
        ),
    );
    b.insert(
        "pool_series.dat",
        dat_file(
            &["height", "shielded_pool", "total_supply"],
            pool.points.iter().map(|p| {
                vec![p.height.to_string(), format_signed_zat(p.shielded_pool), p.total_supply.to_string()]
            }),
        ),
    );
    b.insert(
        "fee_table.csv",
        csv_file(
            &["fee", "count", "percent"],
            fees.table().into_iter().map(|r| vec![r.fee.to_string(), r.count.to_string(), r.share.percent_1dp()]),
        ),
    );
    Ok(b)
}

fn fee_parts(parts: &[Amount]) -> String {
    parts.iter().map(Amount::to_string).collect::<Vec<_>>().join("+")
}

fn shield_scripts<'a>(chain: &'a ChainIndex, tx: &'a TxRecord) -> impl Iterator<Item = &'a [u8]> {
    tx.inputs.iter().filter_map(move |op| {
        let (_, prev) = chain.tx(&op.txid)?;
        prev.outputs.get(op.vout as usize).map(|o| o.script_id.as_slice())
    })
}

fn match_row(chain: &ChainIndex, m: &RttMatch, tags: &AddressTags) -> Vec<String> {
    let (shield_tags, deshield_tags) = if tags.is_empty() {
        (String::new(), String::new())
    } else {
        let s = chain.tx(&m.shield.js.txid).map(|(_, tx)| tags.labels(shield_scripts(chain, tx))).unwrap_or_default();
        let d = chain
            .tx(&m.deshield.js.txid)
            .map(|(_, tx)| tags.labels(tx.outputs.iter().map(|o| o.script_id.as_slice())))
            .unwrap_or_default();
        (s, d)
    };
    vec![
        m.kind.label().to_owned(),
        m.shield.js.txid.to_display_hex(),
        m.shield.js.js_index.to_string(),
        m.shield.height.to_string(),
        m.deshield.js.txid.to_display_hex(),
        m.deshield.js.js_index.to_string(),
        m.deshield.height.to_string(),
        m.amount.to_string(),
        m.deshielded_amount().to_string(),
        m.fee_adjustment.to_string(),
        fee_parts(&m.fee_parts),
        m.delta_blocks.to_string(),
        m.delta_minutes.to_string(),
        TIME_BUCKET_LABELS[bucket_index(m.delta_minutes)].to_owned(),
        shield_tags,
        deshield_tags,
    ]
}

pub const MATCH_COLUMNS: [&str; 16] = [
    "kind",
    "shield_txid",
    "shield_js_index",
    "shield_height",
    "deshield_txid",
    "deshield_js_index",
    "deshield_height",
    "vpub_old",
    "vpub_new",
    "fee",
    "fee_parts",
    "delta_blocks",
    "delta_minutes",
    "time_bucket",
    "shield_tags",
    "deshield_tags",
];

/// `rtt_matches.csv`, `rtt_time_buckets.csv`, `rtt_topn.csv`,
/// `fee1_table.csv` and `fee2_table.csv`.
pub fn rtt_bundle(chain: &ChainIndex, report: &RttReport, opts: &ReportOptions) -> ReportBundle {
    let mut b = ReportBundle::default();
    b.insert("rtt_matches.csv", csv_file(&MATCH_COLUMNS, report.matches.iter().map(|m| match_row(chain, m, &opts.tags))));

    let bucket_rows = report
        .time_buckets_exact
        .iter()
        .zip(&report.time_buckets_fee1)
        .zip(&report.time_buckets_fee2)
        .map(|((e, f1), f2): ((&BucketRow, &BucketRow), &BucketRow)| {
            vec![
                e.label(),
                e.count.to_string(),
                opts.coins(e.coins),
                f1.count.to_string(),
                opts.coins(f1.coins),
                f2.count.to_string(),
                opts.coins(f2.coins),
            ]
        });
    b.insert(
        "rtt_time_buckets.csv",
        csv_file(
            &["minutes", "exact_count", "exact_coins", "fee1_count", "fee1_coins", "fee2_count", "fee2_coins"],
            bucket_rows,
        ),
    );
    b.insert(
        "rtt_topn.csv",
        csv_file(
            &["n", "considered", "matched", "matched_coins"],
            report
                .top_n
                .iter()
                .map(|r| vec![r.n.to_string(), r.considered.to_string(), r.matched.to_string(), opts.coins(r.coins)]),
        ),
    );
    let fee_rows = |rows: &[FeeTableRow]| -> Vec<Vec<String>> {
        rows.iter()
            .map(|r| vec![r.fee.to_string(), fee_parts(&r.parts), r.count.to_string(), opts.coins(r.coins)])
            .collect()
    };
    b.insert("fee1_table.csv", csv_file(&["fee", "parts", "count", "coins"], fee_rows(&report.fee1_table)));
    b.insert("fee2_table.csv", csv_file(&["fee", "parts", "count", "coins"], fee_rows(&report.fee2_table)));
    b
}

/// `summary.md`: headline figures for whatever is available.
pub fn summary(chain: &ChainIndex, report: Option<&RttReport>, opts: &ReportOptions) -> String {
    let mut s = format!("<!-- {TOOL_VERSION} -->\n# Chain summary\n\n");
    if chain.is_empty() {
        s.push_str("The store is empty.\n");
        return s;
    }
    let (lo, hi) = (chain.base_height().unwrap_or(0), chain.tip_height().unwrap_or(0));
    let c = census(chain);
    let pool = pool_series(chain);
    let part = block_participation(chain).expect("non-empty chain");
    let fees = fee_histogram(chain);
    let _ = writeln!(s, "| metric | value |\n|---|---|");
    let mut line = |k: &str, v: String| {
        let _ = writeln!(s, "| {k} | {v} |");
    };
    line("heights", format!("{lo}..={hi}"));
    line("blocks", part.blocks.len().to_string());
    line("transactions", c.tx_count.to_string());
    line(
        "transactions with a JoinSplit",
        format!("{} ({}%)", c.txs_with_joinsplit, c.tx_with_joinsplit_share().percent_1dp()),
    );
    line(
        "blocks without a JoinSplit",
        format!("{} ({}%)", part.blocks_without_joinsplits, part.no_joinsplit_block_share().percent_1dp()),
    );
    line("JoinSplits", c.joinsplit_count.to_string());
    line("JoinSplits with vpub_old > 0", format!("{} ({}%)", c.with_shielding(), c.with_shielding_share().percent_1dp()));
    line(
        "JoinSplits with vpub_new > 0",
        format!("{} ({}%)", c.with_deshielding(), c.with_deshielding_share().percent_1dp()),
    );
    line(
        "fully shielded JoinSplits",
        format!("{} ({}%)", c.fully_shielded, c.kind_share(JoinSplitKind::FullyShielded).percent_1dp()),
    );
    line("shielded pool / supply at tip", format!("{}%", pool.final_share().percent_1dp()));
    line("mean shielded pool / supply", format!("{:.1}%", pool.average_share_percent()));
    line("coins shielded", opts.coins(c.total_shielded_inflow));
    line(
        "most common fees",
        fees.table().iter().take(5).map(|r| format!("{} ({})", r.fee, r.count)).collect::<Vec<_>>().join(", "),
    );
    line("transactions with unknown fee", fees.unknown.to_string());

    if let Some(r) = report {
        let _ = writeln!(s, "\n## Round-trip transactions\n\n| metric | value |\n|---|---|");
        let mut line = |k: &str, v: String| {
            let _ = writeln!(s, "| {k} | {v} |");
        };
        line("exact matches", format!("{} ({} coins)", r.exact_count, opts.coins(r.exact_coins)));
        line("1-fee matches", format!("{} ({} coins)", r.fee1_count, opts.coins(r.fee1_coins)));
        line("2-fee matches", format!("{} ({} coins)", r.fee2_count, opts.coins(r.fee2_coins)));
        line(
            "exact-match coins / coins shielded",
            format!(
                "{} / {} ({}%)",
                opts.coins(r.exact_coins),
                opts.coins(r.shielded_inflow_total),
                r.exact_coin_share().percent_1dp()
            ),
        );
        line("all matched coins / coins shielded", format!("{}%", r.matched_coin_share().percent_1dp()));
        line(
            "exact matches within two hours",
            format!("{} ({}%)", r.exact_within_two_hours, r.within_two_hours_share().percent_1dp()),
        );
    }
    s
}

/// `eval.csv`: one row per kind, then the overall row.
pub fn eval_file(score: &EvalScore) -> String {
    let mut rows: Vec<Vec<String>> = score
        .by_kind
        .iter()
        .map(|(kind, k)| {
            vec![
                kind.label().to_owned(),
                k.true_positives.to_string(),
                k.false_positives.to_string(),
                k.false_negatives.to_string(),
                k.precision().decimal_string(3),
                k.recall().decimal_string(3),
            ]
        })
        .collect();
    rows.push(vec![
        "all".into(),
        score.true_positives.to_string(),
        score.false_positives.to_string(),
        score.false_negatives.to_string(),
        score.precision().decimal_string(3),
        score.recall().decimal_string(3),
    ]);
    csv_file(&["kind", "true_positives", "false_positives", "false_negatives", "precision", "recall"], rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::appendix_chain;
    use crate::rtt::{build_report, detect, DetectConfig, DEFAULT_TOP_N};
    use crate::store::Snapshot;

    fn appendix() -> (Snapshot, RttReport) {
        let snap = Snapshot::from_blocks(appendix_chain());
        let d = detect(&snap, &DetectConfig::default()).unwrap();
        let r = build_report(&snap, &d, &DEFAULT_TOP_N).unwrap();
        (snap, r)
    }

    #[test]
    fn every_file_has_version_and_header() {
        let (snap, r) = appendix();
        let opts = ReportOptions::default();
        let mut b = analytics_bundle(&snap, &opts).unwrap();
        b.extend(rtt_bundle(&snap, &r, &opts));
        assert_eq!(b.names().count(), 9);
        for name in b.names() {
            let body = b.get(name).unwrap();
            assert!(body.starts_with(&format!("# {TOOL_VERSION}\n")), "{name}");
            assert!(body.lines().nth(1).is_some(), "{name}");
        }
        let pool = b.get("pool_series.dat").unwrap();
        assert_eq!(pool.lines().count(), 2 + 12);
        assert!(pool.lines().skip(2).all(|l| l.split(' ').count() == 3));
    }

    #[test]
    fn bucket_labels_and_matches() {
        let (snap, r) = appendix();
        let b = rtt_bundle(&snap, &r, &ReportOptions::default());
        let body = b.get("rtt_time_buckets.csv").unwrap();
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(body.as_bytes());
        let buckets: Vec<String> = rdr.records().map(|r| r.unwrap()[0].to_owned()).collect();
        assert_eq!(buckets, TIME_BUCKET_LABELS);
        assert_eq!(b.get("rtt_matches.csv").unwrap().lines().count(), 2 + 6);
    }

    #[test]
    fn whole_and_exact_coin_rendering() {
        let exact = ReportOptions { exact_coins: true, ..Default::default() };
        assert_eq!(exact.coins(Amount::parse_coins("3479.51898254").unwrap()), "3479.51898254");
        assert_eq!(ReportOptions::default().coins(Amount::parse_coins("3479.51898254").unwrap()), "3479");
    }

    #[test]
    fn tags_annotate_deshield_outputs() {
        let (snap, r) = appendix();
        let mut tags = AddressTags::default();
        tags.insert(b"ab3b717b".to_vec(), "pool A");
        let b = rtt_bundle(&snap, &r, &ReportOptions { tags, ..Default::default() });
        assert!(b.get("rtt_matches.csv").unwrap().contains("pool A"));
        let parsed = AddressTags::from_csv(&b"script_id,label\n6162,x\n"[..]).unwrap();
        assert_eq!(parsed.0.get(&b"ab"[..]).map(String::as_str), Some("x"));
        assert!(AddressTags::from_csv(&b"script_id,label\nzz,x\n"[..]).is_err());
    }
}
