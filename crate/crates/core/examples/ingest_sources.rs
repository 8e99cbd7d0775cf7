//! Loads the same chain from raw wire bytes, JSON lines and a JSON-RPC
//! node (a local replay server here) and checks the content hashes agree.

use zlinkage::ingest::playback::{PlaybackServer, RpcFixture};
use zlinkage::ingest::rpc::HttpTransport;
use zlinkage::ingest::wire::write_raw_blocks;
use zlinkage::ingest::{read_jsonl_file, read_raw_file, write_jsonl, RpcClient, WireLayoutConfig};
use zlinkage::store::Snapshot;
use zlinkage::synth::{generate, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let chain = generate(&SynthConfig { seed: 3, n_blocks: 120, ..Default::default() })?.batch;
    let dir = std::env::temp_dir().join(format!("zlinkage-ingest-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let layout = WireLayoutConfig::default();

    let raw_path = dir.join("chain.raw");
    std::fs::write(&raw_path, write_raw_blocks(&chain.blocks, &layout))?;
    let jsonl_path = dir.join("chain.jsonl");
    write_jsonl(std::fs::File::create(&jsonl_path)?, &chain.blocks)?;

    let raw = read_raw_file(&raw_path, &layout)?;
    let jsonl = read_jsonl_file(&jsonl_path)?;

    let server = PlaybackServer::start(RpcFixture::from_blocks(&chain.blocks))?;
    let client = RpcClient::new(HttpTransport::new(server.url(), None));
    let tip = client.tip_height()?;
    let rpc = client.fetch_range(0, tip)?;
    println!("rpc: {} requests served by {}", server.request_count(), server.url());

    for (name, batch) in [("raw", &raw), ("jsonl", &jsonl), ("rpc", &rpc)] {
        let snap = Snapshot::try_from_batch(batch)?;
        println!("{name:6} {} blocks  {} joinsplits  {}", snap.block_count(), snap.joinsplit_count(), snap.content_hash_hex());
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
