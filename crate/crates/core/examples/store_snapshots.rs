//! Appends blocks to an on-disk store in two batches, shows that a snapshot
//! taken in between is unaffected by the second append, and reloads.

use zlinkage::ingest::{IngestBatch, Source};
use zlinkage::store::Store;
use zlinkage::synth::{generate, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let blocks = generate(&SynthConfig { seed: 11, n_blocks: 200, ..Default::default() })?.batch.blocks;
    let dir = std::env::temp_dir().join(format!("zlinkage-store-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("chain.store");

    let first = IngestBatch { blocks: blocks[..120].to_vec(), source: Source::Synthetic };
    let second = IngestBatch { blocks: blocks[100..].to_vec(), source: Source::Synthetic };
    {
        let mut store = Store::open(&path)?;
        println!("{:?}", store.append_blocks(&first)?);
        let before = store.snapshot();
        println!("{:?}", store.append_blocks(&second)?);
        println!("old snapshot still ends at {:?}, store at {:?}", before.tip_height(), store.tip_height());
        assert!(Store::open(&path).is_err(), "a second writer is refused");
    }
    let reloaded = Store::load_snapshot(&path)?;
    println!("reloaded {} blocks, indexes consistent: {}", reloaded.block_count(), reloaded.indexes_consistent());
    println!("content hash {}", reloaded.content_hash_hex());
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
