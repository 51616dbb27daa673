use std::fs;
use std::path::PathBuf;

use clap::Args as ClapArgs;
use ducat_core::{PeerDump, PublicKey, TrustBand, TrustStore};

use crate::CliError;

#[derive(ClapArgs)]
pub struct Args {
    /// peers.json from `simulate --dump-state`
    #[arg(long)]
    peers: PathBuf,
    /// Whose store to show (148-hex key); defaults to the first peer
    #[arg(long)]
    key: Option<String>,
    /// Disable color (same as setting NO_COLOR)
    #[arg(long)]
    no_color: bool,
}

fn paint(band: TrustBand, colored: bool) -> String {
    let label = match band {
        TrustBand::NoInfo => "no-info",
        TrustBand::Low => "low",
        TrustBand::Medium => "medium",
        TrustBand::High => "high",
        TrustBand::Flagged => "FLAGGED",
    };
    if !colored {
        return label.to_string();
    }
    let code = match band {
        TrustBand::NoInfo => "90",
        TrustBand::Low => "33",
        TrustBand::Medium => "36",
        TrustBand::High => "32",
        TrustBand::Flagged => "31",
    };
    format!("\x1b[{code}m{label}\x1b[0m")
}

pub fn run(args: Args) -> Result<(), CliError> {
    let colored = !args.no_color && std::env::var_os("NO_COLOR").is_none();

    let text = fs::read_to_string(&args.peers)
        .map_err(|e| CliError::bad_input(format!("cannot read {}: {e}", args.peers.display())))?;
    let dumps: Vec<PeerDump> = serde_json::from_str(&text)
        .map_err(|e| CliError::bad_input(format!("bad peers file: {e}")))?;

    let dump = match &args.key {
        None => dumps
            .first()
            .ok_or_else(|| CliError::bad_input("peers file is empty"))?,
        Some(hex) => {
            let wanted = PublicKey::from_hex(hex).map_err(CliError::bad_input)?;
            dumps
                .iter()
                .find(|d| d.key == wanted.to_hex())
                .ok_or_else(|| CliError::bad_input("no peer matches the requested key"))?
        }
    };

    let owner = PublicKey::from_hex(&dump.key).map_err(CliError::bad_input)?;
    let store = TrustStore::from_csv(owner, &dump.store_csv)
        .map_err(|e| CliError::bad_input(format!("bad embedded store: {e}")))?;
    // Classify with the thresholds the wallet itself displays with.
    let thresholds = dump.thresholds;

    crate::emitln!("store of {}… ({} keys)", &dump.key[..16], store.len());
    for (key, entry) in store.iter() {
        let band = thresholds.classify(entry.score, entry.flagged);
        crate::emitln!(
            "{}…  score {:>3}  {}",
            &key.to_hex()[..16],
            entry.score.value(),
            paint(band, colored)
        );
    }
    Ok(())
}
