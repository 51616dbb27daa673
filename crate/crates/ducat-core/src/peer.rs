//! One wallet and the pairwise encounter workflow: trust check, payment as a
//! proposal/agreement block pair, one-directional contact-list transfer from
//! payer to payee, score application, and evidence-segment exchange for
//! retroactive double-spend detection.
//!
//! Evidence segments are exchanged at the start of an encounter (the chain
//! verification phase), both directions, and carry each party's recent own
//! blocks plus the counterparty half of each included transaction — the
//! foreign halves are what let two victims of the same fork assemble a
//! conflict proof when they later meet. Detection never blocks anyone:
//! a proven double-spender is flagged and zeroed, not banned, and payment
//! proceeds unless the policy explicitly scripts refusal.

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::identity::cipher::Cipher;
use crate::identity::{Identity, PublicKey};
use crate::ledger::{
    Block, BlockCheck, BlockKind, Chain, ConflictProof, LedgerError, SigCache, BLOCK_LEN,
};
use crate::trust::{
    recent_counterparties, BandThresholds, ContactList, TrustBand, TrustError, TrustStore,
    CONTACT_LIST_MAX,
};
use crate::wire::{
    decode_contact_payload, encode_contact_payload, open_message, run_transfer, seal_message,
    MessageId, PacketChannel, TransferParams, WireError,
};

/// Hard cap on transfer driver rounds inside an encounter; the retry budget
/// fails a stuck transfer long before this.
const TRANSFER_ROUND_CAP: u64 = 10_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PeerError {
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Trust(#[from] TrustError),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error("a double-spend needs two distinct victims")]
    DuplicateVictims,
}

/// Per-wallet configuration of the protocol's open knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PeerPolicy {
    /// Exchange evidence segments during encounters (both directions).
    pub segment_exchange: bool,
    /// Own blocks per evidence segment.
    pub segment_length: usize,
    /// Also credit the counterparty +1 for the transaction itself, not just
    /// for received lists.
    pub direct_increment: bool,
    /// Abort the payment when the proactive phase implicates the payer.
    pub refuse_on_conflict: bool,
    /// Reset a flagged key's score to 0 (in addition to flagging).
    pub penalty_reset_score: bool,
    /// Starting balance in euro-cents.
    pub initial_balance: u64,
    /// Per-round score decay for unflagged keys; 0 disables.
    pub score_decay_per_round: u8,
    pub thresholds: BandThresholds,
    pub transfer: TransferParams,
}

impl Default for PeerPolicy {
    fn default() -> Self {
        PeerPolicy {
            segment_exchange: true,
            segment_length: 20,
            direct_increment: false,
            refuse_on_conflict: false,
            penalty_reset_score: true,
            initial_balance: 10_000,
            score_decay_per_round: 0,
            thresholds: BandThresholds::default(),
            transfer: TransferParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Sent,
    Received,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HistoryEntry {
    pub round: u64,
    pub counterparty: PublicKey,
    pub direction: Direction,
    pub amount: u64,
}

/// A peer newly flagging an offender.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlagEvent {
    pub detector: PublicKey,
    pub offender: PublicKey,
}

/// Telemetry for one encounter.
#[derive(Debug, Clone, Default)]
pub struct EncounterOutcome {
    pub paid: bool,
    pub amount: u64,
    /// Band the payer saw for the payee before paying.
    pub proactive_band: TrustBand,
    pub conflicts_found: Vec<ConflictProof>,
    /// New (detector, offender) flags raised during this encounter.
    pub flag_events: Vec<FlagEvent>,
    /// Octets handed to the channel plus evidence-segment octets.
    pub bytes_transferred: u64,
    /// Whether the contact list reached the payee and was applied.
    pub list_applied: bool,
}

/// JSON-serializable dump of one peer's externally visible state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeerDump {
    pub key: String,
    pub balance: u64,
    pub chain_length: usize,
    pub store_csv: String,
    /// Band boundaries this wallet displays with, so tooling can classify
    /// the embedded store the way the wallet itself would.
    #[serde(default)]
    pub thresholds: BandThresholds,
}

/// One wallet: identity, own chain, trust store, transaction history.
#[derive(Debug, Clone)]
pub struct Peer {
    identity: Identity,
    chain: Chain,
    store: TrustStore,
    history: Vec<HistoryEntry>,
    policy: PeerPolicy,
    sig_cache: SigCache,
}

impl Peer {
    pub fn new(identity: Identity, policy: PeerPolicy) -> Self {
        Self::with_sig_cache(identity, policy, SigCache::new())
    }

    /// As [`Peer::new`], sharing a signature-verification memo with other
    /// peers of the same single-threaded simulation run.
    pub fn with_sig_cache(identity: Identity, policy: PeerPolicy, sig_cache: SigCache) -> Self {
        let key = *identity.public();
        Peer {
            identity,
            chain: Chain::new(key, policy.initial_balance),
            store: TrustStore::new(key),
            history: Vec::new(),
            policy,
            sig_cache,
        }
    }

    pub fn key(&self) -> &PublicKey {
        self.identity.public()
    }

    pub fn chain(&self) -> &Chain {
        &self.chain
    }

    pub fn store(&self) -> &TrustStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut TrustStore {
        &mut self.store
    }

    pub fn history(&self) -> &[HistoryEntry] {
        &self.history
    }

    pub fn policy(&self) -> &PeerPolicy {
        &self.policy
    }

    pub fn balance(&self) -> u64 {
        self.chain.balance()
    }

    /// Band displayed for a counterparty under this peer's thresholds.
    pub fn band_for(&self, key: &PublicKey) -> TrustBand {
        self.store.band(key, &self.policy.thresholds)
    }

    /// The contact list this peer would send right now.
    pub fn contact_list(&self) -> ContactList {
        recent_counterparties(
            self.history.iter().map(|h| &h.counterparty),
            self.key(),
            CONTACT_LIST_MAX,
        )
    }

    /// Evidence this peer presents during an encounter, when its policy has
    /// segment exchange on.
    pub fn presented_evidence(&self) -> Vec<Block> {
        if self.policy.segment_exchange {
            self.chain.evidence_segment(self.policy.segment_length)
        } else {
            Vec::new()
        }
    }

    pub fn dump(&self) -> PeerDump {
        PeerDump {
            key: self.key().to_hex(),
            balance: self.balance(),
            chain_length: self.chain.len(),
            store_csv: self.store.to_csv(),
            thresholds: self.policy.thresholds,
        }
    }

    /// Chain-verification phase: validates a counterparty's presented blocks
    /// against local knowledge, penalizes any proven double-spender, then
    /// classifies the counterparty. Malformed blocks are skipped, never
    /// raised.
    pub fn proactive_check(
        &mut self,
        counterparty: &PublicKey,
        presented: &[Block],
        round: u64,
    ) -> (TrustBand, Vec<ConflictProof>) {
        let (conflicts, _) = self.absorb_blocks(presented, round);
        (self.band_for(counterparty), conflicts)
    }

    /// Validates and records a batch of gossiped blocks. Returns the
    /// conflict proofs found and any new flags raised.
    fn absorb_blocks(
        &mut self,
        blocks: &[Block],
        round: u64,
    ) -> (Vec<ConflictProof>, Vec<FlagEvent>) {
        let mut conflicts = Vec::new();
        let mut flags = Vec::new();
        for block in blocks {
            // Own blocks carry no news, and a wallet does not score itself.
            if block.signer == *self.key() {
                continue;
            }
            match self.chain.validate_block_cached(block, &self.sig_cache) {
                Ok(BlockCheck::Clean) => self.chain.record_foreign(block),
                Ok(BlockCheck::AlreadyKnown) => {}
                Ok(BlockCheck::Conflict(proof)) => {
                    self.chain.record_foreign(block);
                    let offender = *proof.offender();
                    let newly = !self.store.is_flagged(&offender);
                    if self
                        .store
                        .apply_penalty(&offender, &proof, self.policy.penalty_reset_score, round)
                        .is_ok()
                        && newly
                    {
                        flags.push(FlagEvent {
                            detector: *self.key(),
                            offender,
                        });
                    }
                    conflicts.push(*proof);
                }
                Err(_) => {} // malformed gossip: reported by omission
            }
        }
        (conflicts, flags)
    }

    fn push_history(
        &mut self,
        round: u64,
        counterparty: PublicKey,
        direction: Direction,
        amount: u64,
    ) {
        self.history.push(HistoryEntry {
            round,
            counterparty,
            direction,
            amount,
        });
    }
}

fn derive_message_id(sender: &PublicKey, round: u64, sequence: u64) -> MessageId {
    let mut hasher = Sha256::new();
    hasher.update(b"ducat.message-id");
    hasher.update(sender.as_bytes());
    hasher.update(round.to_be_bytes());
    hasher.update(sequence.to_be_bytes());
    let digest: [u8; 32] = hasher.finalize().into();
    MessageId::from_bytes(digest[..8].try_into().unwrap())
}

/// Exchanges evidence segments (when enabled) and runs the chain
/// verification on both sides, folding detections into the outcome.
fn proactive_phase(
    sender: &mut Peer,
    receiver: &mut Peer,
    round: u64,
    outcome: &mut EncounterOutcome,
) {
    let sender_evidence = sender.presented_evidence();
    let receiver_evidence = receiver.presented_evidence();
    outcome.bytes_transferred +=
        ((sender_evidence.len() + receiver_evidence.len()) * BLOCK_LEN) as u64;

    let (conflicts, flags) = sender.absorb_blocks(&receiver_evidence, round);
    outcome.conflicts_found.extend(conflicts);
    outcome.flag_events.extend(flags);
    outcome.proactive_band = sender.band_for(receiver.key());

    let (conflicts, flags) = receiver.absorb_blocks(&sender_evidence, round);
    outcome.conflicts_found.extend(conflicts);
    outcome.flag_events.extend(flags);
}

/// Completes a payment for an already-signed proposal: the payee verifies,
/// agrees, and records; then the payer's contact list flows payer → payee
/// and is applied. No list ever flows the other way. A failed list transfer
/// leaves the payment valid.
fn settle_payment(
    sender: &mut Peer,
    receiver: &mut Peer,
    proposal: &Block,
    round: u64,
    channel: &mut dyn PacketChannel,
    cipher: &dyn Cipher,
    outcome: &mut EncounterOutcome,
) -> Result<(), PeerError> {
    // The payee's own chain-verification of the incoming payment block. A
    // conflict here is proactive detection firing mid-encounter: warn (flag)
    // and proceed, since the protocol never blocks anyone.
    match receiver
        .chain
        .validate_block_cached(proposal, &receiver.sig_cache)?
    {
        BlockCheck::Conflict(proof) => {
            let offender = *proof.offender();
            let newly = !receiver.store.is_flagged(&offender);
            receiver.store.apply_penalty(
                &offender,
                &proof,
                receiver.policy.penalty_reset_score,
                round,
            )?;
            if newly {
                outcome.flag_events.push(FlagEvent {
                    detector: *receiver.key(),
                    offender,
                });
            }
            outcome.conflicts_found.push(*proof);
        }
        BlockCheck::Clean | BlockCheck::AlreadyKnown => {}
    }

    let agreement = receiver
        .chain
        .create_agreement(&receiver.identity, proposal)?;
    receiver
        .chain
        .record_counterpart(agreement.sequence, proposal);
    sender
        .chain
        .record_counterpart(proposal.sequence, &agreement);

    sender.push_history(round, *receiver.key(), Direction::Sent, proposal.amount);
    receiver.push_history(round, *sender.key(), Direction::Received, proposal.amount);
    outcome.paid = true;
    outcome.amount = proposal.amount;

    if receiver.policy.direct_increment {
        let single = ContactList::new(vec![*sender.key()])?;
        receiver.store.apply_contact_list(&single, round);
    }
    if sender.policy.direct_increment {
        let single = ContactList::new(vec![*receiver.key()])?;
        sender.store.apply_contact_list(&single, round);
    }

    // Post-payment list transfer, payer → payee.
    let list = sender.contact_list();
    let payload = encode_contact_payload(&list);
    let message_id = derive_message_id(sender.key(), round, proposal.sequence);
    let sealed = seal_message(cipher, receiver.key(), message_id, &payload);
    match run_transfer(
        &sealed,
        message_id,
        sender.policy.transfer,
        channel,
        TRANSFER_ROUND_CAP,
    ) {
        Ok(report) => {
            outcome.bytes_transferred += report.bytes_on_wire;
            let (_, body) = open_message(cipher, &receiver.identity, &report.bytes)?;
            let received = decode_contact_payload(&body)?;
            receiver.store.apply_contact_list(&received, round);
            outcome.list_applied = true;
        }
        Err(WireError::TransferFailed { .. }) | Err(WireError::TransferTimedOut { .. }) => {
            outcome.list_applied = false;
        }
        Err(other) => return Err(other.into()),
    }
    Ok(())
}

/// One full offline encounter in which `sender` pays `receiver` `amount`
/// euro-cents. Insufficient balance or a zero amount aborts before any block
/// is written (and before any gossip moves).
pub fn transact(
    sender: &mut Peer,
    receiver: &mut Peer,
    amount: u64,
    round: u64,
    channel: &mut dyn PacketChannel,
    cipher: &dyn Cipher,
) -> Result<EncounterOutcome, PeerError> {
    if amount == 0 {
        return Err(LedgerError::ZeroAmount.into());
    }
    let balance = sender.balance();
    if balance < amount {
        return Err(LedgerError::InsufficientBalance { balance, amount }.into());
    }

    let mut outcome = EncounterOutcome::default();
    proactive_phase(sender, receiver, round, &mut outcome);

    let sender_implicated = outcome
        .conflicts_found
        .iter()
        .any(|p| p.offender() == sender.key())
        || receiver.store.is_flagged(sender.key());
    if receiver.policy.refuse_on_conflict && sender_implicated {
        return Ok(outcome); // paid = false; detection already recorded
    }

    let proposal = sender
        .chain
        .create_proposal(&sender.identity, receiver.key(), amount)?;
    settle_payment(
        sender,
        receiver,
        &proposal,
        round,
        channel,
        cipher,
        &mut outcome,
    )?;
    Ok(outcome)
}

/// Everything produced by one double-spend: the two forked proposals and the
/// two victim-side encounter outcomes.
#[derive(Debug, Clone)]
pub struct DoubleSpend {
    pub first: Block,
    pub second: Block,
    pub outcomes: (EncounterOutcome, EncounterOutcome),
    /// Euro-cents conjured by the fork: the second leg credits its victim
    /// without any matching debit.
    pub surplus: u64,
}

/// Spends the same sequence number twice: a normal payment to `victim_b`,
/// then an off-chain forked proposal with the identical sequence toward
/// `victim_c`. Neither leg presents the adversary's segment, so each victim
/// individually accepts; the fork surfaces only when their evidence meets.
pub fn adversary_double_spend(
    adversary: &mut Peer,
    victim_b: &mut Peer,
    victim_c: &mut Peer,
    amount: u64,
    round: u64,
    channel: &mut dyn PacketChannel,
    cipher: &dyn Cipher,
) -> Result<DoubleSpend, PeerError> {
    if victim_b.key() == victim_c.key() {
        return Err(PeerError::DuplicateVictims);
    }
    if amount == 0 {
        return Err(LedgerError::ZeroAmount.into());
    }
    let balance = adversary.balance();
    if balance < amount {
        return Err(LedgerError::InsufficientBalance { balance, amount }.into());
    }

    // Leg one: an ordinary payment, minus the adversary's own gossip.
    let mut outcome_b = EncounterOutcome::default();
    let first = adversary
        .chain
        .create_proposal(&adversary.identity, victim_b.key(), amount)?;
    settle_payment(
        adversary,
        victim_b,
        &first,
        round,
        channel,
        cipher,
        &mut outcome_b,
    )?;

    // Leg two: a forked sibling of `first` — same sequence, same previous
    // hash, different payee — signed off-chain so the real chain keeps
    // only one of the two.
    let mut second = Block {
        signer: *adversary.key(),
        sequence: first.sequence,
        link_key: *victim_c.key(),
        link_sequence: 0,
        previous_hash: first.previous_hash,
        kind: BlockKind::Proposal,
        amount,
        signature: first.signature, // placeholder, replaced below
    };
    second.signature = adversary.identity.sign(&second.signed_bytes());

    let mut outcome_c = EncounterOutcome::default();
    settle_payment(
        adversary,
        victim_c,
        &second,
        round,
        channel,
        cipher,
        &mut outcome_c,
    )?;

    Ok(DoubleSpend {
        first,
        second,
        outcomes: (outcome_b, outcome_c),
        surplus: amount,
    })
}

/// Score-boost collusion: the pair transacts `k` times alternately
/// (`a` pays first). Each transaction carries the usual one-directional
/// contact list, so each accomplice's list keeps recommending the other.
pub fn cycle_boost(
    a: &mut Peer,
    b: &mut Peer,
    k: usize,
    amount: u64,
    round: u64,
    channel: &mut dyn PacketChannel,
    cipher: &dyn Cipher,
) -> Result<Vec<EncounterOutcome>, PeerError> {
    let mut outcomes = Vec::with_capacity(k);
    for i in 0..k {
        let outcome = if i % 2 == 0 {
            transact(a, b, amount, round, channel, cipher)?
        } else {
            transact(b, a, amount, round, channel, cipher)?
        };
        outcomes.push(outcome);
    }
    Ok(outcomes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identity::cipher::ToyCipher;
    use crate::identity::SEED_LEN;
    use crate::ledger::find_double_spends;
    use crate::wire::PerfectChannel;

    fn peer(n: u8) -> Peer {
        let identity = Identity::from_seed(&[n; SEED_LEN]).unwrap();
        Peer::new(identity, PeerPolicy::default())
    }

    fn pay(a: &mut Peer, b: &mut Peer, cents: u64, round: u64) -> EncounterOutcome {
        transact(a, b, cents, round, &mut PerfectChannel, &ToyCipher).unwrap()
    }

    #[test]
    fn fresh_pair_payment_moves_money_not_scores() {
        let mut a = peer(1);
        let mut b = peer(2);
        let outcome = pay(&mut a, &mut b, 100, 0);
        assert!(outcome.paid);
        assert_eq!(outcome.proactive_band, TrustBand::NoInfo);
        assert_eq!(a.balance(), 9_900);
        assert_eq!(b.balance(), 10_100);
        // A had no prior counterparties; B learns nothing about third
        // parties and skips its own key, and nothing flows back to A.
        assert!(b.store().is_empty());
        assert!(a.store().is_empty());
        assert!(outcome.list_applied);
        // History mirrors the own chain, entry for entry.
        for peer in [&a, &b] {
            assert_eq!(peer.history().len(), peer.chain().len());
        }
        assert_eq!(a.history()[0].direction, Direction::Sent);
        assert_eq!(b.history()[0].direction, Direction::Received);
        assert_eq!(a.history()[0].counterparty, *b.key());
    }

    #[test]
    fn receiver_learns_senders_prior_counterparties() {
        let mut a = peer(1);
        for n in [3u8, 4, 5] {
            let mut other = peer(n);
            pay(&mut a, &mut other, 10, 0);
        }
        let mut b = peer(2);
        pay(&mut a, &mut b, 10, 1);
        for n in [3u8, 4, 5] {
            let key = *peer(n).key();
            assert_eq!(b.store().lookup(&key).value(), 1, "missing key {n}");
        }
        assert!(b.store().entry(b.key()).is_none());
        // One-directional: A's store is untouched by the list step.
        assert!(a.store().is_empty());
    }

    #[test]
    fn insufficient_balance_aborts_cleanly() {
        let mut a = peer(1);
        let mut b = peer(2);
        let err = transact(&mut a, &mut b, 20_000, 0, &mut PerfectChannel, &ToyCipher).unwrap_err();
        assert_eq!(
            err,
            PeerError::Ledger(LedgerError::InsufficientBalance {
                balance: 10_000,
                amount: 20_000
            })
        );
        assert_eq!(a.chain().len(), 0);
        assert_eq!(b.chain().len(), 0);
    }

    #[test]
    fn proactive_check_on_unknown_is_no_info() {
        let mut a = peer(1);
        let stranger = *peer(9).key();
        let (band, conflicts) = a.proactive_check(&stranger, &[], 0);
        assert_eq!(band, TrustBand::NoInfo);
        assert!(conflicts.is_empty());
    }

    #[test]
    fn proactive_check_reads_the_stored_band() {
        let mut a = peer(1);
        let counterparty = *peer(9).key();
        let listed = ContactList::new(vec![counterparty]).unwrap();
        for _ in 0..80 {
            a.store_mut().apply_contact_list(&listed, 0);
        }
        let (band, conflicts) = a.proactive_check(&counterparty, &[], 1);
        assert_eq!(band, TrustBand::High);
        assert!(conflicts.is_empty());
    }

    #[test]
    fn proactive_check_flags_a_forked_presenter() {
        // The victim holds one half of a fork; the counterparty's presented
        // segment carries the other. The check must penalize before it
        // classifies.
        let forker = Identity::from_seed(&[7; SEED_LEN]).unwrap();
        let mut main = crate::ledger::Chain::new(*forker.public(), 1_000);
        let mut shadow = crate::ledger::Chain::new(*forker.public(), 1_000);
        let held = main.create_proposal(&forker, peer(2).key(), 10).unwrap();
        let presented = shadow.create_proposal(&forker, peer(3).key(), 10).unwrap();

        let mut victim = peer(2);
        let (band, conflicts) = victim.proactive_check(forker.public(), &[held], 4);
        assert_eq!(band, TrustBand::NoInfo);
        assert!(conflicts.is_empty());

        let (band, conflicts) = victim.proactive_check(forker.public(), &[presented], 5);
        assert_eq!(band, TrustBand::Flagged);
        assert_eq!(conflicts.len(), 1);
        assert!(conflicts[0].verify());
        assert_eq!(conflicts[0].offender(), forker.public());
    }

    #[test]
    fn transfer_failure_leaves_payment_valid_and_list_unapplied() {
        struct BlackHole;
        impl crate::wire::PacketChannel for BlackHole {
            fn transmit(&mut self, _packets: Vec<crate::wire::Packet>) -> Vec<crate::wire::Packet> {
                Vec::new()
            }
        }

        let mut a = peer(1);
        for n in [3u8, 4] {
            let mut other = peer(n);
            pay(&mut a, &mut other, 10, 0);
        }
        let mut b = peer(2);
        let outcome = transact(&mut a, &mut b, 70, 1, &mut BlackHole, &ToyCipher).unwrap();
        assert!(outcome.paid, "payment settles in person");
        assert!(!outcome.list_applied, "the list never arrived");
        assert_eq!(a.balance(), 10_000 - 20 - 70);
        assert_eq!(b.balance(), 10_070);
        assert_eq!(b.chain().len(), 1);
        assert!(b.store().is_empty(), "no list, no scores");
    }

    #[test]
    fn double_spend_is_invisible_until_victims_meet() {
        let mut adv = peer(1);
        let mut b = peer(2);
        let mut c = peer(3);

        let spend = adversary_double_spend(
            &mut adv,
            &mut b,
            &mut c,
            500,
            0,
            &mut PerfectChannel,
            &ToyCipher,
        )
        .unwrap();

        // Both victims accepted; no one has seen a conflict yet.
        assert!(spend.outcomes.0.paid && spend.outcomes.1.paid);
        assert!(spend.outcomes.0.conflicts_found.is_empty());
        assert!(spend.outcomes.1.conflicts_found.is_empty());
        assert_eq!(b.balance(), 10_500);
        assert_eq!(c.balance(), 10_500);
        assert_eq!(spend.surplus, 500);

        // The pair of forked proposals is exactly one conflict group.
        let blocks = vec![spend.first.clone(), spend.second.clone()];
        assert_eq!(find_double_spends(&blocks).len(), 1);

        // First victim-to-victim encounter: both sides assemble the proof
        // from the exchanged evidence and flag the offender.
        let outcome = pay(&mut b, &mut c, 10, 1);
        assert!(!outcome.conflicts_found.is_empty());
        assert!(b.store().is_flagged(adv.key()));
        assert!(c.store().is_flagged(adv.key()));
        assert_eq!(b.band_for(adv.key()), TrustBand::Flagged);
        assert_eq!(c.band_for(adv.key()), TrustBand::Flagged);
        let detectors: Vec<PublicKey> = outcome.flag_events.iter().map(|f| f.detector).collect();
        assert!(detectors.contains(b.key()) && detectors.contains(c.key()));
    }

    #[test]
    fn isolated_victim_never_detects() {
        let mut adv = peer(1);
        let mut b = peer(2);
        let mut c = peer(3);
        adversary_double_spend(
            &mut adv,
            &mut b,
            &mut c,
            500,
            0,
            &mut PerfectChannel,
            &ToyCipher,
        )
        .unwrap();
        // B only ever meets a fourth party that carries no evidence.
        let mut d = peer(4);
        let outcome = pay(&mut b, &mut d, 10, 1);
        assert!(outcome.conflicts_found.is_empty());
        assert!(!b.store().is_flagged(adv.key()));
        assert!(!d.store().is_flagged(adv.key()));
    }

    #[test]
    fn evidence_travels_through_intermediaries() {
        let mut adv = peer(1);
        let mut b = peer(2);
        let mut c = peer(3);
        adversary_double_spend(
            &mut adv,
            &mut b,
            &mut c,
            500,
            0,
            &mut PerfectChannel,
            &ToyCipher,
        )
        .unwrap();

        // B's evidence (including the adversary's first fork) reaches D,
        // which alone proves nothing.
        let mut d = peer(4);
        pay(&mut b, &mut d, 10, 1);
        assert!(!d.store().is_flagged(adv.key()));

        // D meeting C pairs the carried fork with C's half: the proof forms
        // at D, the evidence carrier.
        let outcome = pay(&mut d, &mut c, 10, 2);
        assert!(!outcome.conflicts_found.is_empty());
        assert!(d.store().is_flagged(adv.key()));
        assert!(!c.store().is_flagged(adv.key()));

        // D now knows the conflicting pair and gossips it whole; the next
        // encounter convicts the offender at C too.
        pay(&mut d, &mut c, 10, 3);
        assert!(c.store().is_flagged(adv.key()));

        // And strangers D meets learn the pair directly.
        let mut e = peer(5);
        let outcome = pay(&mut d, &mut e, 10, 4);
        assert!(!outcome.conflicts_found.is_empty());
        assert!(e.store().is_flagged(adv.key()));
    }

    #[test]
    fn segment_exchange_off_blinds_the_victims() {
        let policy = PeerPolicy {
            segment_exchange: false,
            ..PeerPolicy::default()
        };
        let mut adv = Peer::new(Identity::from_seed(&[1; SEED_LEN]).unwrap(), policy);
        let mut b = Peer::new(Identity::from_seed(&[2; SEED_LEN]).unwrap(), policy);
        let mut c = Peer::new(Identity::from_seed(&[3; SEED_LEN]).unwrap(), policy);
        adversary_double_spend(
            &mut adv,
            &mut b,
            &mut c,
            500,
            0,
            &mut PerfectChannel,
            &ToyCipher,
        )
        .unwrap();
        let outcome = transact(&mut b, &mut c, 10, 1, &mut PerfectChannel, &ToyCipher).unwrap();
        assert!(outcome.conflicts_found.is_empty());
        assert!(!b.store().is_flagged(adv.key()));
        assert!(!c.store().is_flagged(adv.key()));
    }

    #[test]
    fn adversary_reusing_sequence_against_same_victim_is_caught_proactively() {
        // With segments off, detection can still fire when the payment block
        // itself conflicts with something the victim already holds.
        let policy = PeerPolicy {
            segment_exchange: false,
            ..PeerPolicy::default()
        };
        let mut adv = Peer::new(Identity::from_seed(&[1; SEED_LEN]).unwrap(), policy);
        let mut b = Peer::new(Identity::from_seed(&[2; SEED_LEN]).unwrap(), policy);
        let mut c = Peer::new(Identity::from_seed(&[3; SEED_LEN]).unwrap(), policy);
        let spend = adversary_double_spend(
            &mut adv,
            &mut b,
            &mut c,
            500,
            0,
            &mut PerfectChannel,
            &ToyCipher,
        )
        .unwrap();

        // The adversary tries the same fork trick on B, who holds leg one.
        let mut third = spend.first.clone();
        third.link_key = *b.key();
        third.amount = 400;
        third.signature = Identity::from_seed(&[1; SEED_LEN])
            .unwrap()
            .sign(&third.signed_bytes());
        let mut outcome = EncounterOutcome::default();
        settle_payment(
            &mut adv,
            &mut b,
            &third,
            1,
            &mut PerfectChannel,
            &ToyCipher,
            &mut outcome,
        )
        .unwrap();
        assert!(!outcome.conflicts_found.is_empty());
        assert!(b.store().is_flagged(adv.key()));
    }

    #[test]
    fn cycle_boost_scores_match_hand_trace() {
        let cipher = ToyCipher;
        let mut a = peer(1);
        let mut b = peer(2);
        let mut target = peer(3);

        // k = 0: A never met B, so T learns nothing about B.
        pay(&mut a, &mut target, 10, 0);
        assert_eq!(target.store().lookup(b.key()).value(), 0);

        // Boost k times, then A pays T once: T sees B exactly once in the
        // received list, regardless of k.
        cycle_boost(&mut a, &mut b, 6, 10, 1, &mut PerfectChannel, &cipher).unwrap();
        pay(&mut a, &mut target, 10, 2);
        assert_eq!(target.store().lookup(b.key()).value(), 1);

        // m further paid visits → m further applied lists containing B.
        for m in 1..=3u64 {
            pay(&mut a, &mut target, 10, 2 + m);
            assert_eq!(target.store().lookup(b.key()).value(), 1 + m as u8);
        }
    }

    #[test]
    fn refuse_on_conflict_scripts_payment_refusal() {
        let strict = PeerPolicy {
            refuse_on_conflict: true,
            ..PeerPolicy::default()
        };
        let mut adv = Peer::new(
            Identity::from_seed(&[1; SEED_LEN]).unwrap(),
            PeerPolicy::default(),
        );
        let mut b = Peer::new(
            Identity::from_seed(&[2; SEED_LEN]).unwrap(),
            PeerPolicy::default(),
        );
        let mut c = Peer::new(Identity::from_seed(&[3; SEED_LEN]).unwrap(), strict);
        adversary_double_spend(
            &mut adv,
            &mut b,
            &mut c,
            500,
            0,
            &mut PerfectChannel,
            &ToyCipher,
        )
        .unwrap();
        // B gossips the evidence to C, who flags the adversary.
        pay(&mut b, &mut c, 10, 1);
        assert!(c.store().is_flagged(adv.key()));

        // C now refuses the flagged payer; the chains stay untouched.
        let before = c.chain().len();
        let outcome = transact(&mut adv, &mut c, 10, 2, &mut PerfectChannel, &ToyCipher).unwrap();
        assert!(!outcome.paid);
        assert_eq!(c.chain().len(), before);

        // An unimplicated payer still goes through: warn, never block, is
        // the default; refusal is an explicit scenario script.
        let outcome = pay(&mut b, &mut c, 10, 3);
        assert!(outcome.paid);
    }

    #[test]
    fn direct_increment_credits_the_transaction_itself() {
        let policy = PeerPolicy {
            direct_increment: true,
            ..PeerPolicy::default()
        };
        let mut a = Peer::new(Identity::from_seed(&[1; SEED_LEN]).unwrap(), policy);
        let mut b = Peer::new(Identity::from_seed(&[2; SEED_LEN]).unwrap(), policy);
        pay(&mut a, &mut b, 10, 0);
        assert_eq!(a.store().lookup(b.key()).value(), 1);
        assert_eq!(b.store().lookup(a.key()).value(), 1);
    }

    #[test]
    fn peer_dump_embeds_store_csv() {
        let mut a = peer(1);
        let mut b = peer(2);
        pay(&mut a, &mut b, 10, 0);
        let dump = b.dump();
        assert_eq!(dump.key, b.key().to_hex());
        assert_eq!(dump.balance, 10_010);
        assert_eq!(dump.chain_length, 1);
        assert!(dump
            .store_csv
            .starts_with("hex_key,score,flagged,last_updated"));
        let json = serde_json::to_string(&dump).unwrap();
        let back: PeerDump = serde_json::from_str(&json).unwrap();
        assert_eq!(back.key, dump.key);
        assert_eq!(back.thresholds, b.policy().thresholds);
    }
}
