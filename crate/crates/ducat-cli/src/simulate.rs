use std::fs;
use std::path::{Path, PathBuf};

use clap::Args as ClapArgs;
use ducat_core::sim::{run_simulation_full, SimConfig, SimError};
use ducat_core::Metrics;

use crate::CliError;

#[derive(ClapArgs)]
pub struct Args {
    /// Simulation config (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Override the config's seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for summary.json and rounds.csv
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Also write peers.json and blocks.jsonl for `inspect`/`scores`
    #[arg(long)]
    dump_state: bool,
    /// Run this many consecutive seeds starting at the base seed, writing
    /// summary-<seed>.json and rounds-<seed>.csv per seed
    #[arg(long)]
    sweep: Option<u64>,
}

fn load_config(args: &Args) -> Result<SimConfig, CliError> {
    let text = fs::read_to_string(&args.config).map_err(|e| {
        CliError::bad_input(format!("cannot read config {}: {e}", args.config.display()))
    })?;
    let mut config = SimConfig::from_json(&text).map_err(CliError::bad_input)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn write_out(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, contents)
        .map_err(|e| CliError::unwritable(format!("cannot write {}: {e}", path.display())))
}

fn sim_error(e: SimError) -> CliError {
    match e {
        SimError::InvalidConfig(_) => CliError::bad_input(e),
        other => CliError::internal(other),
    }
}

fn one_line(metrics: &Metrics) -> String {
    format!(
        "seed {}: {} rounds, {} transactions, {} detections, {} bytes, surplus {}¢",
        metrics.seed,
        metrics.rounds,
        metrics.transactions_total,
        metrics.detections_total(),
        metrics.bytes_total,
        metrics.created_surplus
    )
}

pub fn run(args: Args) -> Result<(), CliError> {
    let config = load_config(&args)?;
    fs::create_dir_all(&args.out).map_err(|e| {
        CliError::unwritable(format!("cannot create out dir {}: {e}", args.out.display()))
    })?;

    match args.sweep {
        None => {
            let artifacts = run_simulation_full(&config).map_err(sim_error)?;
            write_out(&args.out, "summary.json", &artifacts.metrics.summary_json())?;
            write_out(&args.out, "rounds.csv", &artifacts.metrics.rounds_csv())?;
            if args.dump_state {
                let peers = serde_json::to_string_pretty(&artifacts.peers)
                    .expect("peer dumps serialize infallibly");
                write_out(&args.out, "peers.json", &format!("{peers}\n"))?;
                write_out(&args.out, "blocks.jsonl", &artifacts.blocks_jsonl)?;
            }
            println!("{}", one_line(&artifacts.metrics));
        }
        Some(n) => {
            let end = config
                .seed
                .checked_add(n)
                .ok_or_else(|| CliError::bad_input("sweep range overflows the seed space"))?;
            let seeds: Vec<u64> = (config.seed..end).collect();
            let results = ducat_core::run_sweep(&config, &seeds).map_err(sim_error)?;
            for metrics in &results {
                write_out(
                    &args.out,
                    &format!("summary-{}.json", metrics.seed),
                    &metrics.summary_json(),
                )?;
                write_out(
                    &args.out,
                    &format!("rounds-{}.csv", metrics.seed),
                    &metrics.rounds_csv(),
                )?;
                println!("{}", one_line(metrics));
            }
        }
    }
    Ok(())
}
