use std::fs;
use std::path::PathBuf;

use clap::Subcommand;
use ducat_core::{decode_contact_payload, encode_contact_payload, ContactList, PublicKey};

use crate::CliError;

#[derive(Subcommand)]
pub enum Args {
    /// Read newline-separated 148-hex keys, write the binary payload, and
    /// print its byte length
    Encode {
        /// Key file, one 148-character hex key per line
        #[arg(long)]
        keys: PathBuf,
        /// Payload output file
        #[arg(long)]
        out: PathBuf,
    },
    /// Read a binary payload and print (or write) the keys as hex lines
    Decode {
        /// Payload input file
        #[arg(long)]
        payload: PathBuf,
        /// Write hex lines here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

pub fn run(args: Args) -> Result<(), CliError> {
    match args {
        Args::Encode { keys, out } => encode(keys, out),
        Args::Decode { payload, out } => decode(payload, out),
    }
}

fn encode(keys_path: PathBuf, out: PathBuf) -> Result<(), CliError> {
    let text = fs::read_to_string(&keys_path).map_err(|e| {
        CliError::bad_input(format!("cannot read keys {}: {e}", keys_path.display()))
    })?;
    let mut keys = Vec::new();
    for (index, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let key = PublicKey::from_hex(line)
            .map_err(|e| CliError::bad_input(format!("line {}: {e}", index + 1)))?;
        keys.push(key);
    }
    let list = ContactList::new(keys).map_err(CliError::bad_input)?;
    let body = encode_contact_payload(&list);
    fs::write(&out, &body)
        .map_err(|e| CliError::unwritable(format!("cannot write {}: {e}", out.display())))?;
    println!("{}", body.len());
    Ok(())
}

fn decode(payload_path: PathBuf, out: Option<PathBuf>) -> Result<(), CliError> {
    let body = fs::read(&payload_path).map_err(|e| {
        CliError::bad_input(format!(
            "cannot read payload {}: {e}",
            payload_path.display()
        ))
    })?;
    let list = decode_contact_payload(&body).map_err(CliError::bad_input)?;
    let mut text = String::new();
    for key in list.keys() {
        text.push_str(&key.to_hex());
        text.push('\n');
    }
    match out {
        Some(path) => fs::write(&path, &text)
            .map_err(|e| CliError::unwritable(format!("cannot write {}: {e}", path.display())))?,
        None => {
            use std::io::Write;
            let _ = std::io::stdout().write_all(text.as_bytes());
        }
    }
    Ok(())
}
