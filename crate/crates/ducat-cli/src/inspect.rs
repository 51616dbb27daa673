use std::fs;
use std::path::PathBuf;

use clap::Args as ClapArgs;
use ducat_core::{Block, PeerDump, PublicKey, TrustStore};

use crate::CliError;

#[derive(ClapArgs)]
pub struct Args {
    /// peers.json from `simulate --dump-state`
    #[arg(long, required_unless_present = "blocks")]
    peers: Option<PathBuf>,
    /// blocks.jsonl from `simulate --dump-state`
    #[arg(long)]
    blocks: Option<PathBuf>,
    /// Only show the peer with this 148-hex key
    #[arg(long)]
    key: Option<String>,
}

pub fn run(args: Args) -> Result<(), CliError> {
    if let Some(path) = &args.peers {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::bad_input(format!("cannot read {}: {e}", path.display())))?;
        let dumps: Vec<PeerDump> = serde_json::from_str(&text)
            .map_err(|e| CliError::bad_input(format!("bad peers file: {e}")))?;
        let filter = match &args.key {
            Some(hex) => Some(PublicKey::from_hex(hex).map_err(CliError::bad_input)?),
            None => None,
        };
        let mut shown = 0;
        for dump in &dumps {
            if let Some(wanted) = &filter {
                if dump.key != wanted.to_hex() {
                    continue;
                }
            }
            shown += 1;
            let owner = PublicKey::from_hex(&dump.key).map_err(CliError::bad_input)?;
            let store = TrustStore::from_csv(owner, &dump.store_csv)
                .map_err(|e| CliError::bad_input(format!("bad embedded store: {e}")))?;
            let flagged = store.iter().filter(|(_, e)| e.flagged).count();
            crate::emitln!(
                "peer {}…  balance {}¢  chain {} blocks  knows {} keys ({} flagged)",
                &dump.key[..16],
                dump.balance,
                dump.chain_length,
                store.len(),
                flagged
            );
        }
        if shown == 0 {
            return Err(CliError::bad_input("no peer matches the requested key"));
        }
    }

    if let Some(path) = &args.blocks {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::bad_input(format!("cannot read {}: {e}", path.display())))?;
        let mut total = 0usize;
        let mut proposals = 0usize;
        for (index, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let block: Block = serde_json::from_str(line)
                .map_err(|e| CliError::bad_input(format!("blocks line {}: {e}", index + 1)))?;
            if !block.verify_signature() {
                return Err(CliError::bad_input(format!(
                    "blocks line {}: signature does not verify",
                    index + 1
                )));
            }
            total += 1;
            if block.kind == ducat_core::BlockKind::Proposal {
                proposals += 1;
            }
        }
        crate::emitln!(
            "{total} blocks ({proposals} proposals, {} agreements), all signatures verify",
            total - proposals
        );
    }
    Ok(())
}
