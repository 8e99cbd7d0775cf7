mod common;

use std::io::Cursor;

use zlinkage::ingest::playback::{PlaybackServer, RpcFixture};
use zlinkage::ingest::rpc::HttpTransport;
use zlinkage::ingest::wire::write_raw_blocks;
use zlinkage::ingest::{read_jsonl, read_jsonl_file, read_raw_file, write_jsonl, IngestBatch, RpcClient, Source, WireLayoutConfig};
use zlinkage::store::{Snapshot, Store};

#[test]
fn raw_jsonl_and_rpc_give_identical_stores() {
    let synthetic = common::synthetic(17, 150);
    let blocks = &synthetic.batch.blocks;
    let dir = tempfile::tempdir().unwrap();
    let layout = WireLayoutConfig::default();

    let raw_path = dir.path().join("c.raw");
    std::fs::write(&raw_path, write_raw_blocks(blocks, &layout)).unwrap();
    let jsonl_path = dir.path().join("c.jsonl");
    write_jsonl(std::fs::File::create(&jsonl_path).unwrap(), blocks).unwrap();

    let fixture = RpcFixture::from_blocks(blocks);
    let mut fixture_bytes = Vec::new();
    fixture.write_jsonl(&mut fixture_bytes).unwrap();
    let replayed = RpcFixture::read_jsonl(Cursor::new(fixture_bytes)).unwrap();
    let via_fixture = RpcClient::new(replayed).fetch_range(0, 149).unwrap();

    let server = PlaybackServer::start(fixture).unwrap();
    let via_http = RpcClient::new(HttpTransport::new(server.url(), None)).fetch_range(0, 149).unwrap();

    let hashes: Vec<String> = [
        read_raw_file(&raw_path, &layout).unwrap(),
        read_jsonl_file(&jsonl_path).unwrap(),
        via_fixture,
        via_http,
    ]
    .iter()
    .map(|b| {
        let path = dir.path().join(format!("{:?}.store", b.source));
        let _ = std::fs::remove_file(&path);
        let mut store = Store::open(&path).unwrap();
        store.append_blocks(b).unwrap();
        drop(store);
        Store::load_snapshot(&path).unwrap().content_hash_hex()
    })
    .collect();
    assert!(hashes.windows(2).all(|w| w[0] == w[1]), "{hashes:?}");
    assert_eq!(hashes[0], Snapshot::try_from_batch(&synthetic.batch).unwrap().content_hash_hex());
}

#[test]
fn flaky_server_is_retried() {
    let blocks = common::synthetic(2, 30).batch.blocks;
    let server = PlaybackServer::start_flaky(RpcFixture::from_blocks(&blocks), 3).unwrap();
    let batch = RpcClient::new(HttpTransport::new(server.url(), None)).fetch_range(0, 29).unwrap();
    assert_eq!(batch.blocks, blocks);
}

#[test]
fn appendix_file_is_current() {
    let frozen = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/appendix.jsonl")).unwrap();
    assert_eq!(frozen, zlinkage::fixtures::appendix_jsonl());
    let batch = read_jsonl(Cursor::new(frozen)).unwrap();
    assert_eq!(batch.blocks, zlinkage::fixtures::appendix_chain());
}

#[test]
fn resumed_ingest_matches_single_pass() {
    let blocks = common::synthetic(9, 80).batch.blocks;
    let batch = |r: std::ops::Range<usize>| IngestBatch { blocks: blocks[r].to_vec(), source: Source::Synthetic };
    let mut store = Store::in_memory();
    store.append_blocks(&batch(0..50)).unwrap();
    let s = store.append_blocks(&batch(40..80)).unwrap();
    assert_eq!((s.new_blocks, s.skipped_blocks), (30, 10));
    assert_eq!(store.snapshot().content_hash_hex(), Snapshot::from_blocks(blocks).content_hash_hex());
}
