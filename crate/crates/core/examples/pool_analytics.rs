//! Chain-wide statistics: JoinSplit participation per block, the
//! transaction census, shielded pool size over time and the fee histogram.

use zlinkage::amount::Amount;
use zlinkage::analytics::{block_participation, census, fee_histogram, pool_series};
use zlinkage::store::Snapshot;
use zlinkage::synth::{generate, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let chain = Snapshot::try_from_batch(&generate(&SynthConfig { n_blocks: 1000, ..Default::default() })?.batch)?;

    let p = block_participation(&chain)?;
    println!("blocks without JoinSplits: {} ({}%)", p.blocks_without_joinsplits, p.no_joinsplit_block_share().percent_1dp());

    let c = census(&chain);
    println!("transactions with a JoinSplit: {} of {} ({}%)", c.txs_with_joinsplit, c.tx_count, c.tx_with_joinsplit_share().percent_1dp());
    println!("shielding {}  deshielding {}  fully shielded {}  mixed {}", c.shielding, c.deshielding, c.fully_shielded, c.mixed);
    println!("coins in {}  coins out {}", c.total_shielded_inflow, c.total_deshielded_outflow);

    let series = pool_series(&chain);
    let last = series.points.last().expect("non-empty chain");
    println!(
        "pool at tip: {} of {} coins; mean share {:.2}%",
        Amount::zat(last.shielded_pool.max(0) as u64),
        last.total_supply,
        series.average_share_percent()
    );

    let fees = fee_histogram(&chain);
    for row in fees.table().into_iter().take(5) {
        println!("fee {:>12}  {:6}  {}%", row.fee, row.count, row.share.percent_1dp());
    }
    Ok(())
}
