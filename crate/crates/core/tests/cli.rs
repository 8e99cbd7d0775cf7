use std::path::Path;
use std::process::{Command, Output};

fn zlinkage(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zlinkage"))
        .current_dir(dir)
        .env_remove("ZLINKAGE_CONFIG")
        .env_remove("ZLINKAGE_STORE")
        .env_remove("ZLINKAGE_OUT_DIR")
        .env_remove("ZLINKAGE_BASE_FEES")
        .env_remove("ZLINKAGE_WINDOW_HOURS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = zlinkage(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn synth_ingest_rtt_eval_verify() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--out", "s", "--seed", "4", "--blocks", "200", "--raw", "--rpc-fixture"]);
    for f in ["chain.jsonl", "truth.jsonl", "chain.raw", "rpc_fixture.jsonl"] {
        assert!(d.join("s").join(f).exists(), "{f}");
    }

    let first = ok(d, &["--store", "a.store", "ingest", "--jsonl", "s/chain.jsonl", "--to", "99"]);
    assert!(first.starts_with("100 blocks"), "{first}");
    let rest = ok(d, &["--store", "a.store", "ingest", "--jsonl", "s/chain.jsonl"]);
    assert!(rest.contains("(100 already stored)"), "{rest}");
    ok(d, &["--store", "b.store", "ingest", "--raw", "s/chain.raw"]);
    ok(d, &["--store", "c.store", "ingest", "--rpc-fixture", "s/rpc_fixture.jsonl"]);

    let hash = |store: &str| ok(d, &["--store", store, "verify"]).lines().last().unwrap().to_owned();
    assert_eq!(hash("a.store"), hash("b.store"));
    assert_eq!(hash("a.store"), hash("c.store"));

    ok(d, &["--store", "a.store", "rtt", "--out", "r"]);
    ok(d, &["--store", "a.store", "analyze", "--out", "r"]);
    for f in ["rtt_matches.csv", "rtt_time_buckets.csv", "rtt_topn.csv", "census.csv", "pool_series.dat", "summary.md"] {
        let body = std::fs::read_to_string(d.join("r").join(f)).unwrap();
        assert!(body.contains("zlinkage "), "{f} lacks the version line");
    }
    let eval = ok(d, &["--store", "a.store", "eval", "--truth", "s/truth.jsonl", "--out", "r"]);
    assert!(eval.starts_with("precision=1.000 recall=1.000"), "{eval}");
}

#[test]
fn reports_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--out", "s", "--seed", "8", "--blocks", "150"]);
    ok(d, &["--store", "x.store", "ingest", "--jsonl", "s/chain.jsonl"]);
    ok(d, &["--store", "x.store", "rtt", "--out", "r1"]);
    ok(d, &["--store", "x.store", "rtt", "--out", "r2"]);
    for f in ["rtt_matches.csv", "summary.md", "fee2_table.csv"] {
        assert_eq!(std::fs::read(d.join("r1").join(f)).unwrap(), std::fs::read(d.join("r2").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn config_file_and_env_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("z.toml"), "store = \"from_file.store\"\nout_dir = \"file_out\"\nformats = [\"csv\"]\n").unwrap();
    std::fs::write(d.join("a.jsonl"), zlinkage::fixtures::appendix_jsonl()).unwrap();
    ok(d, &["--config", "z.toml", "ingest", "--jsonl", "a.jsonl"]);
    assert!(d.join("from_file.store").exists());

    let out = Command::new(env!("CARGO_BIN_EXE_zlinkage"))
        .current_dir(d)
        .env("ZLINKAGE_CONFIG", "z.toml")
        .env("ZLINKAGE_OUT_DIR", "env_out")
        .args(["rtt"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(d.join("env_out/rtt_matches.csv").exists());
    assert!(!d.join("env_out/summary.md").exists(), "markdown filtered out by the config file");
    let matches = std::fs::read_to_string(d.join("env_out/rtt_matches.csv")).unwrap();
    assert_eq!(matches.lines().filter(|l| !l.starts_with('#')).count(), 7);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(zlinkage(d, &["--store", "none.store", "rtt"]).status.code(), Some(2));
    assert_eq!(zlinkage(d, &["ingest", "--jsonl", "missing.jsonl"]).status.code(), Some(2));
    std::fs::write(d.join("bad.jsonl"), "{not json}\n").unwrap();
    let out = zlinkage(d, &["--store", "bad.store", "ingest", "--jsonl", "bad.jsonl"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
    assert_eq!(zlinkage(d, &["ingest"]).status.code(), Some(2));

    std::fs::write(d.join("a.jsonl"), zlinkage::fixtures::appendix_jsonl()).unwrap();
    ok(d, &["--store", "s.store", "ingest", "--jsonl", "a.jsonl"]);
    std::fs::write(d.join("s.store.lock"), "").unwrap();
    assert_eq!(zlinkage(d, &["--store", "s.store", "ingest", "--jsonl", "a.jsonl"]).status.code(), Some(2));
}

#[test]
fn empty_store_rtt_writes_headers_only() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("empty.jsonl"), "").unwrap();
    ok(d, &["--store", "e.store", "ingest", "--jsonl", "empty.jsonl"]);
    ok(d, &["--store", "e.store", "rtt", "--out", "r"]);
    let body = std::fs::read_to_string(d.join("r/rtt_matches.csv")).unwrap();
    assert_eq!(body.lines().count(), 2, "{body}");
    assert_eq!(zlinkage(d, &["--store", "e.store", "analyze", "--out", "r"]).status.code(), Some(2));
}
