//! Windowed, acknowledged transfer of one sealed message over an unreliable
//! datagram channel.
//!
//! Both endpoints are pure state machines: given the same event sequence
//! they produce the same outputs and end in the same state, byte for byte.
//! The sender keeps at most `window` chunks in flight, the receiver answers
//! every DATA with a cumulative ACK (the next chunk index it expects), and
//! the sender retransmits the lowest missing chunk once its timer expires.
//! A chunk that exhausts its retry budget fails the transfer.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::packet::{Packet, PacketKind, MAX_CHUNK};
use super::{MessageId, WireError};

/// Transfer discipline knobs. Defaults fit a full 50-key contact payload in
/// four chunks and one window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransferParams {
    /// DATA chunk payload size in octets.
    pub chunk_size: usize,
    /// Maximum chunks in flight.
    pub window: usize,
    /// Retransmissions allowed per chunk before the transfer fails.
    pub retry_budget: u32,
    /// Rounds a chunk may stay unacknowledged before retransmission.
    pub timeout_rounds: u32,
}

impl Default for TransferParams {
    fn default() -> Self {
        TransferParams {
            chunk_size: 1200,
            window: 4,
            retry_budget: 8,
            timeout_rounds: 2,
        }
    }
}

impl TransferParams {
    pub fn validate(&self) -> Result<(), WireError> {
        if self.chunk_size == 0 || self.chunk_size > MAX_CHUNK {
            return Err(WireError::BadTransferParams("chunk_size out of range"));
        }
        if self.window == 0 {
            return Err(WireError::BadTransferParams("window must be at least 1"));
        }
        if self.timeout_rounds == 0 {
            return Err(WireError::BadTransferParams("timeout must be at least 1"));
        }
        Ok(())
    }

    fn chunk_count(&self, total_len: usize) -> u32 {
        total_len.div_ceil(self.chunk_size) as u32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferPhase {
    Idle,
    /// Unsent chunks remain.
    Sending,
    /// Everything sent at least once; waiting for acknowledgements.
    Awaiting,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct InFlight {
    sent_at: u64,
    retries: u32,
}

/// Sending side of one transfer.
#[derive(Debug, Clone, PartialEq)]
pub struct Sender {
    params: TransferParams,
    message_id: MessageId,
    sealed: Vec<u8>,
    n_chunks: u32,
    clock: u64,
    /// Next chunk index the receiver expects, per its cumulative ACKs.
    acked_up_to: u32,
    next_unsent: u32,
    in_flight: BTreeMap<u32, InFlight>,
    phase: TransferPhase,
    /// Index of the chunk that exhausted its budget, when failed.
    failed_chunk: Option<u32>,
}

impl Sender {
    /// Starts a transfer; returns the sender and the first window of DATA.
    pub fn start(
        sealed: Vec<u8>,
        message_id: MessageId,
        params: TransferParams,
    ) -> Result<(Self, Vec<Packet>), WireError> {
        params.validate()?;
        if sealed.is_empty() {
            return Err(WireError::EmptyTransfer);
        }
        let n_chunks = params.chunk_count(sealed.len());
        let mut sender = Sender {
            params,
            message_id,
            sealed,
            n_chunks,
            clock: 0,
            acked_up_to: 0,
            next_unsent: 0,
            in_flight: BTreeMap::new(),
            phase: TransferPhase::Idle,
            failed_chunk: None,
        };
        let first = sender.fill_window();
        Ok((sender, first))
    }

    pub fn phase(&self) -> TransferPhase {
        self.phase
    }

    pub fn is_done(&self) -> bool {
        self.phase == TransferPhase::Done
    }

    pub fn is_failed(&self) -> bool {
        self.phase == TransferPhase::Failed
    }

    pub fn failed_chunk(&self) -> Option<u32> {
        self.failed_chunk
    }

    fn chunk_packet(&self, index: u32) -> Packet {
        let start = index as usize * self.params.chunk_size;
        let end = (start + self.params.chunk_size).min(self.sealed.len());
        Packet::data(
            self.message_id,
            self.sealed.len() as u32,
            index,
            self.sealed[start..end].to_vec(),
        )
    }

    fn fill_window(&mut self) -> Vec<Packet> {
        let mut out = Vec::new();
        while self.in_flight.len() < self.params.window && self.next_unsent < self.n_chunks {
            let index = self.next_unsent;
            self.next_unsent += 1;
            self.in_flight.insert(
                index,
                InFlight {
                    sent_at: self.clock,
                    retries: 0,
                },
            );
            out.push(self.chunk_packet(index));
        }
        self.phase = if self.next_unsent < self.n_chunks {
            TransferPhase::Sending
        } else {
            TransferPhase::Awaiting
        };
        out
    }

    /// Handles a cumulative ACK. Foreign or non-ACK packets are ignored.
    /// Returns follow-up DATA, or the FIN once everything is acknowledged.
    pub fn on_ack(&mut self, packet: &Packet) -> Vec<Packet> {
        if packet.message_id != self.message_id
            || packet.kind != PacketKind::Ack
            || matches!(self.phase, TransferPhase::Done | TransferPhase::Failed)
        {
            return Vec::new();
        }
        let Some(ack) = packet.ack_value() else {
            return Vec::new();
        };
        if ack > self.acked_up_to {
            self.acked_up_to = ack.min(self.n_chunks);
            self.in_flight = self.in_flight.split_off(&self.acked_up_to);
        }
        if self.acked_up_to >= self.n_chunks {
            self.phase = TransferPhase::Done;
            return vec![Packet::fin(self.message_id, self.sealed.len() as u32)];
        }
        self.fill_window()
    }

    /// Retransmits one timed-out chunk, charging its retry budget. The
    /// transfer fails once a chunk exceeds the budget.
    pub fn on_timeout(&mut self, chunk_index: u32) -> Vec<Packet> {
        if matches!(self.phase, TransferPhase::Done | TransferPhase::Failed) {
            return Vec::new();
        }
        let Some(meta) = self.in_flight.get_mut(&chunk_index) else {
            return Vec::new();
        };
        meta.retries += 1;
        if meta.retries > self.params.retry_budget {
            self.phase = TransferPhase::Failed;
            self.failed_chunk = Some(chunk_index);
            return Vec::new();
        }
        meta.sent_at = self.clock;
        vec![self.chunk_packet(chunk_index)]
    }

    /// Advances the sender's clock by one round and fires the timer of the
    /// lowest missing chunk if it expired. Higher chunks wait their turn;
    /// they retransmit once they become the lowest missing.
    pub fn tick(&mut self) -> Vec<Packet> {
        if matches!(self.phase, TransferPhase::Done | TransferPhase::Failed) {
            return Vec::new();
        }
        self.clock += 1;
        let expired = self
            .in_flight
            .iter()
            .next()
            .filter(|(_, meta)| self.clock - meta.sent_at >= self.params.timeout_rounds as u64)
            .map(|(index, _)| *index);
        match expired {
            Some(index) => self.on_timeout(index),
            None => Vec::new(),
        }
    }
}

/// What the receiver produced for one incoming packet.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverOutput {
    pub ack: Option<Packet>,
    /// The reassembled sealed message, emitted exactly once on completion.
    pub completed: Option<Vec<u8>>,
}

impl ReceiverOutput {
    const NONE: ReceiverOutput = ReceiverOutput {
        ack: None,
        completed: None,
    };
}

/// Receiving side of one transfer. Locks onto the first DATA packet's
/// message id; packets with any other id never alter state.
#[derive(Debug, Clone, PartialEq)]
pub struct Receiver {
    params: TransferParams,
    message_id: Option<MessageId>,
    total_len: Option<u32>,
    chunks: BTreeMap<u32, Vec<u8>>,
    /// Chunks received contiguously from index 0: the cumulative ACK value.
    contiguous: u32,
    assembled: Option<Vec<u8>>,
    phase: TransferPhase,
}

impl Receiver {
    pub fn new(params: TransferParams) -> Self {
        Receiver {
            params,
            message_id: None,
            total_len: None,
            chunks: BTreeMap::new(),
            contiguous: 0,
            assembled: None,
            phase: TransferPhase::Idle,
        }
    }

    pub fn phase(&self) -> TransferPhase {
        self.phase
    }

    pub fn is_done(&self) -> bool {
        self.phase == TransferPhase::Done
    }

    /// The completed message, once done.
    pub fn assembled(&self) -> Option<&[u8]> {
        self.assembled.as_deref()
    }

    pub fn on_packet(&mut self, packet: &Packet) -> ReceiverOutput {
        match packet.kind {
            PacketKind::Data => self.on_data(packet),
            // ACKs flow the other way; FIN is a courtesy close.
            PacketKind::Ack | PacketKind::Fin => ReceiverOutput::NONE,
        }
    }

    fn on_data(&mut self, packet: &Packet) -> ReceiverOutput {
        match self.message_id {
            None => {
                self.message_id = Some(packet.message_id);
                self.total_len = Some(packet.total_len);
                self.phase = TransferPhase::Awaiting;
            }
            Some(id) if id != packet.message_id => return ReceiverOutput::NONE,
            Some(_) => {}
        }
        let total_len = self.total_len.expect("set on first DATA");
        if packet.total_len != total_len {
            return ReceiverOutput::NONE;
        }
        let n_chunks = self.params.chunk_count(total_len as usize);
        if packet.chunk_index >= n_chunks || packet.chunk.len() != self.expected_chunk_len(packet) {
            return ReceiverOutput::NONE;
        }

        self.chunks
            .entry(packet.chunk_index)
            .or_insert_with(|| packet.chunk.clone());
        while self.chunks.contains_key(&self.contiguous) {
            self.contiguous += 1;
        }

        let completed = if self.contiguous == n_chunks && self.assembled.is_none() {
            let mut bytes = Vec::with_capacity(total_len as usize);
            for chunk in self.chunks.values() {
                bytes.extend_from_slice(chunk);
            }
            self.assembled = Some(bytes.clone());
            self.phase = TransferPhase::Done;
            Some(bytes)
        } else {
            None
        };

        ReceiverOutput {
            ack: Some(Packet::ack(packet.message_id, total_len, self.contiguous)),
            completed,
        }
    }

    fn expected_chunk_len(&self, packet: &Packet) -> usize {
        let total = packet.total_len as usize;
        let start = packet.chunk_index as usize * self.params.chunk_size;
        (total - start).min(self.params.chunk_size)
    }
}

/// Delivery abstraction between the endpoints: takes the packets handed
/// over this round, returns what comes out the far end next round.
pub trait PacketChannel {
    fn transmit(&mut self, packets: Vec<Packet>) -> Vec<Packet>;
}

/// Loss-free, order-preserving channel with one round of latency.
#[derive(Debug, Clone, Copy, Default)]
pub struct PerfectChannel;

impl PacketChannel for PerfectChannel {
    fn transmit(&mut self, packets: Vec<Packet>) -> Vec<Packet> {
        packets
    }
}

/// Outcome of a completed transfer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransferReport {
    /// Reassembled sealed message, byte-identical to what was sent.
    pub bytes: Vec<u8>,
    /// Protocol rounds until both endpoints finished.
    pub rounds: u64,
    /// Packets handed to the channel by both endpoints.
    pub packets_sent: u64,
    /// Encoded octets handed to the channel by both endpoints.
    pub bytes_on_wire: u64,
}

/// Drives one sealed message from sender to receiver through `channel`,
/// alternating rounds until completion, failure, or the `max_rounds` cap.
pub fn run_transfer(
    sealed: &[u8],
    message_id: MessageId,
    params: TransferParams,
    channel: &mut dyn PacketChannel,
    max_rounds: u64,
) -> Result<TransferReport, WireError> {
    let (mut sender, first) = Sender::start(sealed.to_vec(), message_id, params)?;
    let mut receiver = Receiver::new(params);

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

        if sender.is_failed() {
            return Err(WireError::TransferFailed {
                rounds,
                chunk: sender.failed_chunk().unwrap_or(0),
            });
        }

        packets_sent += (acks.len() + outgoing.len()) as u64;
        bytes_on_wire += acks
            .iter()
            .chain(&outgoing)
            .map(|p| p.encoded_len() as u64)
            .sum::<u64>();

        to_sender = channel.transmit(acks);
        to_receiver = channel.transmit(outgoing);

        if let Some(bytes) = &delivered {
            if sender.is_done() {
                return Ok(TransferReport {
                    bytes: bytes.clone(),
                    rounds,
                    packets_sent,
                    bytes_on_wire,
                });
            }
        }
        if rounds >= max_rounds {
            return Err(WireError::TransferTimedOut { rounds });
        }
    }
}

/// Rounds a transfer of `sealed_len` octets needs over a loss-free channel.
pub fn ideal_rounds(sealed_len: usize, params: TransferParams) -> u64 {
    run_transfer(
        &vec![0u8; sealed_len],
        MessageId::from_bytes([0; 8]),
        params,
        &mut PerfectChannel,
        1_000_000,
    )
    .expect("loss-free transfer cannot fail")
    .rounds
}
