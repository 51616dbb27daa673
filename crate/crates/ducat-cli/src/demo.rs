use clap::Args as ClapArgs;
use ducat_core::identity::cipher::ToyCipher;
use ducat_core::sim::rng::{stream_rng, STREAM_CHANNEL};
use ducat_core::wire::{ideal_rounds, Packet, PacketKind, Receiver, Sender};
use ducat_core::{
    open_message, seal_message, ChannelConfig, Identity, LossyChannel, MessageId, PacketChannel,
    TransferParams,
};
use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(ClapArgs)]
pub struct Args {
    /// Payload size in octets
    #[arg(long, default_value_t = 3700)]
    size: usize,
    /// Per-packet drop probability
    #[arg(long, default_value_t = 0.0)]
    drop: f64,
    /// Per-packet duplication probability
    #[arg(long, default_value_t = 0.0)]
    dup: f64,
    /// Shuffle packet order within a round
    #[arg(long)]
    reorder: bool,
    /// Channel and payload seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Retransmissions allowed per chunk
    #[arg(long, default_value_t = 8)]
    retry_budget: u32,
}

fn describe(packets: &[Packet]) -> String {
    if packets.is_empty() {
        return "-".into();
    }
    packets
        .iter()
        .map(|p| match p.kind {
            PacketKind::Data => format!("DATA#{}({}B)", p.chunk_index, p.chunk.len()),
            PacketKind::Ack => format!("ACK→{}", p.ack_value().unwrap_or(0)),
            PacketKind::Fin => "FIN".into(),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn short_digest(bytes: &[u8]) -> String {
    let digest: [u8; 32] = Sha256::digest(bytes).into();
    hex::encode(&digest[..8])
}

pub fn run(args: Args) -> Result<(), CliError> {
    let channel_config = ChannelConfig {
        drop_probability: args.drop,
        duplicate_probability: args.dup,
        reorder: args.reorder,
    };
    if !channel_config.is_valid() {
        return Err(CliError::bad_input("probabilities must be within [0, 1]"));
    }
    if args.size == 0 {
        return Err(CliError::bad_input("size must be at least 1 octet"));
    }

    let mut payload = vec![0u8; args.size];
    ChaCha8Rng::seed_from_u64(args.seed).fill_bytes(&mut payload);

    let recipient = Identity::from_seed(&[0x44; 32]).expect("fixed 32-octet seed");
    let message_id = MessageId::from_bytes(args.seed.to_be_bytes());
    let sealed = seal_message(&ToyCipher, recipient.public(), message_id, &payload);

    let params = TransferParams {
        retry_budget: args.retry_budget,
        ..TransferParams::default()
    };
    let mut channel = LossyChannel::new(channel_config, stream_rng(args.seed, STREAM_CHANNEL));

    println!(
        "sealing {} octets (payload sha256 {}…) → {} sealed octets, drop {}, dup {}, reorder {}",
        args.size,
        short_digest(&payload),
        sealed.len(),
        args.drop,
        args.dup,
        args.reorder
    );

    let (mut sender, first) =
        Sender::start(sealed.clone(), message_id, params).map_err(CliError::bad_input)?;
    let mut receiver = Receiver::new(params);
    println!("round 0 | sender sends: {}", describe(&first));

    let mut packets_sent = first.len() as u64;
    let mut bytes_on_wire: u64 = first.iter().map(|p| p.encoded_len() as u64).sum();
    let mut to_receiver = channel.transmit(first);
    let mut to_sender: Vec<Packet> = Vec::new();
    let mut delivered: Option<Vec<u8>> = None;
    let mut rounds: u64 = 0;

    loop {
        rounds += 1;
        let mut acks = Vec::new();
        for packet in &to_receiver {
            let output = receiver.on_packet(packet);
            acks.extend(output.ack);
            if output.completed.is_some() {
                delivered = output.completed;
            }
        }

        let mut outgoing = Vec::new();
        for packet in &to_sender {
            outgoing.extend(sender.on_ack(packet));
        }
        outgoing.extend(sender.tick());

        println!(
            "round {rounds} | receiver got: {} | receiver sends: {} | sender sends: {}",
            describe(&to_receiver),
            describe(&acks),
            describe(&outgoing)
        );

        if sender.is_failed() {
            return Err(CliError::transfer_failed(format!(
                "chunk {} exhausted its {} retries after {} rounds ({} packets, {} octets on the wire)",
                sender.failed_chunk().unwrap_or(0),
                args.retry_budget,
                rounds,
                packets_sent,
                bytes_on_wire
            )));
        }

        packets_sent += (acks.len() + outgoing.len()) as u64;
        bytes_on_wire += acks
            .iter()
            .chain(&outgoing)
            .map(|p| p.encoded_len() as u64)
            .sum::<u64>();
        to_sender = channel.transmit(acks);
        to_receiver = channel.transmit(outgoing);

        if delivered.is_some() && sender.is_done() {
            break;
        }
        if rounds > 100_000 {
            return Err(CliError::transfer_failed(format!(
                "no completion after {rounds} rounds"
            )));
        }
    }

    let received_sealed = delivered.expect("loop exits only once delivered");
    let (got_id, got_payload) = open_message(&ToyCipher, &recipient, &received_sealed)
        .map_err(|e| CliError::transfer_failed(format!("delivered bytes failed to open: {e}")))?;

    let sent_digest = short_digest(&payload);
    let got_digest = short_digest(&got_payload);
    let verdict = got_id == message_id && got_digest == sent_digest;
    println!(
        "completed in {rounds} rounds (ideal {}), {} packets, {} octets on the wire",
        ideal_rounds(sealed.len(), params),
        packets_sent,
        bytes_on_wire
    );
    println!(
        "digest sent {sent_digest}… received {got_digest}… → {}",
        if verdict { "MATCH" } else { "MISMATCH" }
    );
    if !verdict {
        return Err(CliError::internal("delivered payload does not match"));
    }
    Ok(())
}
