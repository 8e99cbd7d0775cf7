use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use zlinkage::cli::{self, CliError, IngestArgs, IngestSource, SynthOutputs};
use zlinkage::config::{FileConfig, Overrides, RunConfig, ENV_CONFIG};
use zlinkage::report::OutputFormat;

#[derive(Parser)]
#[command(name = "zlinkage", version, about = "Shielded-pool analytics and round-trip transaction detection")]
struct Cli {
    /// TOML config file (also ZLINKAGE_CONFIG).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Chain store path (also ZLINKAGE_STORE).
    #[arg(long, global = true)]
    store: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Markdown,
    Plotdata,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Markdown => OutputFormat::Markdown,
            Format::Plotdata => OutputFormat::Plotdata,
        }
    }
}

#[derive(Args, Default)]
struct ReportFlags {
    /// Output directory (also ZLINKAGE_OUT_DIR).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base fees in coins, comma separated (also ZLINKAGE_BASE_FEES).
    #[arg(long, value_delimiter = ',')]
    fees: Option<Vec<String>>,
    /// Use the chain's five most common fees as base fees.
    #[arg(long)]
    fees_from_chain: bool,
    /// Fee-adjusted match window in hours (also ZLINKAGE_WINDOW_HOURS).
    #[arg(long)]
    window_hours: Option<u64>,
    /// Let fee-adjusted passes reuse JoinSplits matched by earlier passes.
    #[arg(long)]
    no_exclude_consumed: bool,
    #[arg(long, value_delimiter = ',')]
    top_n: Option<Vec<usize>>,
    #[arg(long, value_enum, value_delimiter = ',')]
    formats: Option<Vec<Format>>,
    /// CSV of `script_id,label` used to annotate matches.
    #[arg(long)]
    address_tags: Option<PathBuf>,
    /// Print amounts to the zatoshi instead of whole coins.
    #[arg(long)]
    exact: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Append blocks to the store.
    Ingest {
        #[arg(long, conflicts_with_all = ["jsonl", "rpc", "rpc_fixture"])]
        raw: Option<PathBuf>,
        #[arg(long, conflicts_with_all = ["rpc", "rpc_fixture"])]
        jsonl: Option<PathBuf>,
        /// Fetch from a node; the URL comes from --rpc-url, env or config.
        #[arg(long, conflicts_with = "rpc_fixture")]
        rpc: bool,
        /// Replay recorded RPC responses from a JSON-lines file.
        #[arg(long)]
        rpc_fixture: Option<PathBuf>,
        #[arg(long)]
        rpc_url: Option<String>,
        #[arg(long)]
        from: Option<u64>,
        #[arg(long)]
        to: Option<u64>,
    },
    /// Participation, census, pool series and fee tables.
    Analyze(ReportFlags),
    /// Round-trip transaction detection.
    Rtt(ReportFlags),
    /// Generate a synthetic chain with planted round trips.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        blocks: Option<u64>,
        /// Also write the chain in raw wire format.
        #[arg(long)]
        raw: bool,
        /// Also write an RPC replay fixture.
        #[arg(long)]
        rpc_fixture: bool,
    },
    /// Score detection against a ground-truth file.
    Eval {
        #[arg(long)]
        truth: PathBuf,
        #[command(flatten)]
        report: ReportFlags,
    },
    /// Check store integrity and compare the detector with the reference scan.
    Verify {
        /// Blocks in the oracle spot-check window.
        #[arg(long, default_value_t = 200)]
        sample_blocks: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn overrides(store: Option<PathBuf>, r: &ReportFlags) -> Overrides {
    Overrides {
        store,
        out_dir: r.out.clone(),
        base_fees: r.fees.clone(),
        fees_from_chain: r.fees_from_chain.then_some(true),
        window_hours: r.window_hours,
        exclude_consumed: r.no_exclude_consumed.then_some(false),
        top_n: r.top_n.clone(),
        formats: r.formats.as_ref().map(|v| v.iter().map(|&f| f.into()).collect()),
        address_tags: r.address_tags.clone(),
        exact: r.exact.then_some(true),
        rpc_url: None,
    }
}

fn run(cli: Cli) -> Result<String, CliError> {
    let file = match cli.config.or_else(|| std::env::var_os(ENV_CONFIG).map(PathBuf::from)) {
        Some(p) => FileConfig::load(&p)?,
        None => FileConfig::default(),
    };
    let resolve = |o: Overrides| RunConfig::resolve(&o, |k| std::env::var(k).ok(), &file);
    match cli.command {
        Command::Ingest { raw, jsonl, rpc, rpc_fixture, rpc_url, from, to } => {
            let source = match (raw, jsonl, rpc_fixture, rpc) {
                (Some(p), ..) => IngestSource::Raw(p),
                (_, Some(p), ..) => IngestSource::Jsonl(p),
                (_, _, Some(p), _) => IngestSource::RpcFixture(p),
                (.., true) => IngestSource::Rpc,
                _ => return Err(CliError::Input("choose one of --raw, --jsonl, --rpc, --rpc-fixture".into())),
            };
            let cfg = resolve(Overrides { store: cli.store, rpc_url, ..Default::default() })?;
            cli::cmd_ingest(&cfg, &IngestArgs { source, from, to })
        }
        Command::Analyze(r) => cli::cmd_analyze(&resolve(overrides(cli.store, &r))?),
        Command::Rtt(r) => cli::cmd_rtt(&resolve(overrides(cli.store, &r))?),
        Command::Eval { truth, report } => cli::cmd_eval(&resolve(overrides(cli.store, &report))?, &truth),
        Command::Verify { sample_blocks, seed } => {
            cli::cmd_verify(&resolve(Overrides { store: cli.store, ..Default::default() })?, sample_blocks, seed)
        }
        Command::Synth { out, seed, blocks, raw, rpc_fixture } => {
            let cfg = resolve(Overrides::default())?;
            let mut synth = cfg.synth.clone();
            if let Some(s) = seed {
                synth.seed = s;
            }
            if let Some(n) = blocks {
                synth.n_blocks = n;
            }
            cli::cmd_synth(&synth, &cfg.wire, &out, &SynthOutputs { raw, rpc_fixture })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
