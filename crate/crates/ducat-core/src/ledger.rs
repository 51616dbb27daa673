//! Pairwise sequence-numbered payment chains and double-spend detection.
//!
//! Every wallet appends its half of each transaction to its own signed chain:
//! the payer writes a *proposal*, the payee a linked *agreement*. Per-signer
//! sequence numbers make forks the double-spend signal: two distinct validly
//! signed blocks from one signer with the same sequence number are
//! self-contained proof of fraud, checkable by anyone.
//!
//! Canonical block layout (big-endian, fixed offsets):
//!
//! | offset | len | field                                 |
//! |--------|-----|---------------------------------------|
//! | 0      | 74  | signer public key                     |
//! | 74     | 8   | sequence (u64)                        |
//! | 82     | 74  | link key (counterparty)               |
//! | 156    | 8   | link sequence (u64, 0 for proposals)  |
//! | 164    | 32  | previous block digest (zero at seq 1) |
//! | 196    | 1   | kind (1 = proposal, 2 = agreement)    |
//! | 197    | 8   | amount in euro-cents (u64)            |
//! | 205    | 64  | signature over bytes 0..205           |
//!
//! A block digest is SHA-256 over all 269 bytes.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashSet};
use std::rc::Rc;

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::identity::{Identity, PublicKey, Signature, KEY_LEN, SIGNATURE_LEN};

/// SHA-256 digest of a canonical block.
pub type BlockDigest = [u8; 32];

/// Serialized block size in octets.
pub const BLOCK_LEN: usize = SIGNED_LEN + SIGNATURE_LEN;
const SIGNED_LEN: usize = KEY_LEN + 8 + KEY_LEN + 8 + 32 + 1 + 8;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LedgerError {
    #[error("payment amount must be positive")]
    ZeroAmount,
    #[error("insufficient balance: have {balance} cents, need {amount}")]
    InsufficientBalance { balance: u64, amount: u64 },
    #[error("operation requires the chain owner's identity")]
    SignerMismatch,
    #[error("block is not a proposal")]
    NotAProposal,
    #[error("proposal is addressed to {addressed}, not to this chain's owner")]
    MislinkedProposal { addressed: PublicKey },
    #[error("block signature does not verify")]
    BadSignature,
    #[error("sequence number 0 is invalid; sequences start at 1")]
    ZeroSequence,
    #[error("block {sequence} has an inconsistent previous-hash link")]
    BrokenHashLink { sequence: u64 },
    #[error("proposal amount must be positive")]
    ZeroProposalAmount,
    #[error("blocks do not form a fork (need same signer and sequence, distinct content)")]
    NotAFork,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    Proposal,
    Agreement,
}

impl BlockKind {
    fn wire_byte(self) -> u8 {
        match self {
            BlockKind::Proposal => 1,
            BlockKind::Agreement => 2,
        }
    }
}

/// One half-block of a pairwise transaction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub signer: PublicKey,
    pub sequence: u64,
    pub link_key: PublicKey,
    pub link_sequence: u64,
    #[serde(with = "digest_hex")]
    pub previous_hash: BlockDigest,
    pub kind: BlockKind,
    pub amount: u64,
    pub signature: Signature,
}

impl Block {
    /// The signed prefix: every field before the signature, in layout order.
    pub fn signed_bytes(&self) -> [u8; SIGNED_LEN] {
        let mut out = [0u8; SIGNED_LEN];
        let mut at = 0;
        for part in [
            &self.signer.as_bytes()[..],
            &self.sequence.to_be_bytes(),
            &self.link_key.as_bytes()[..],
            &self.link_sequence.to_be_bytes(),
            &self.previous_hash,
            &[self.kind.wire_byte()],
            &self.amount.to_be_bytes(),
        ] {
            out[at..at + part.len()].copy_from_slice(part);
            at += part.len();
        }
        out
    }

    /// Full canonical serialization, signature included.
    pub fn canonical_bytes(&self) -> [u8; BLOCK_LEN] {
        let mut out = [0u8; BLOCK_LEN];
        out[..SIGNED_LEN].copy_from_slice(&self.signed_bytes());
        out[SIGNED_LEN..].copy_from_slice(self.signature.as_bytes());
        out
    }

    pub fn digest(&self) -> BlockDigest {
        Sha256::digest(self.canonical_bytes()).into()
    }

    pub fn verify_signature(&self) -> bool {
        self.signer.verify(&self.signed_bytes(), &self.signature)
    }

    /// Internal consistency: sequence ≥ 1, genesis hash rule, positive
    /// proposal amount. Does not check the signature.
    pub fn check_structure(&self) -> Result<(), LedgerError> {
        if self.sequence == 0 {
            return Err(LedgerError::ZeroSequence);
        }
        let genesis = self.previous_hash == [0u8; 32];
        if genesis != (self.sequence == 1) {
            return Err(LedgerError::BrokenHashLink {
                sequence: self.sequence,
            });
        }
        if self.kind == BlockKind::Proposal && self.amount == 0 {
            return Err(LedgerError::ZeroProposalAmount);
        }
        Ok(())
    }
}

/// Two validly signed blocks from one signer sharing a sequence number:
/// self-contained evidence of a double-spend. Normalized so that
/// `digest(a) < digest(b)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConflictProof {
    a: Block,
    b: Block,
}

impl ConflictProof {
    pub fn new(a: Block, b: Block) -> Result<Self, LedgerError> {
        if a.signer != b.signer || a.sequence != b.sequence {
            return Err(LedgerError::NotAFork);
        }
        a.check_structure()?;
        b.check_structure()?;
        let (da, db) = (a.digest(), b.digest());
        if da == db {
            return Err(LedgerError::NotAFork);
        }
        if !a.verify_signature() || !b.verify_signature() {
            return Err(LedgerError::BadSignature);
        }
        let (a, b) = if da < db { (a, b) } else { (b, a) };
        Ok(ConflictProof { a, b })
    }

    pub fn offender(&self) -> &PublicKey {
        &self.a.signer
    }

    pub fn sequence(&self) -> u64 {
        self.a.sequence
    }

    pub fn blocks(&self) -> (&Block, &Block) {
        (&self.a, &self.b)
    }

    /// Re-checks everything `new` established; used on received proofs.
    pub fn verify(&self) -> bool {
        ConflictProof::new(self.a.clone(), self.b.clone()).is_ok()
    }
}

/// Outcome of checking a single incoming block against local knowledge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BlockCheck {
    /// Internally valid and not previously seen.
    Clean,
    /// Byte-identical to a block already held (idempotent re-receipt).
    AlreadyKnown,
    /// Forks a block already held at the same (signer, sequence). Boxed to
    /// keep the common variants register-sized.
    Conflict(Box<ConflictProof>),
}

/// One wallet's own chain plus every foreign block it has observed.
#[derive(Debug, Clone)]
pub struct Chain {
    owner: PublicKey,
    initial_balance: u64,
    blocks: Vec<Block>,
    /// Observed foreign blocks, deduplicated by digest, keyed by slot.
    foreign: BTreeMap<(PublicKey, u64), Vec<Block>>,
    /// Counterparty half-blocks of our own transactions, keyed by our own
    /// sequence number. These travel with evidence segments so that conflict
    /// proofs can form at third parties.
    counterparts: BTreeMap<u64, Block>,
}

impl Chain {
    pub fn new(owner: PublicKey, initial_balance: u64) -> Self {
        Chain {
            owner,
            initial_balance,
            blocks: Vec::new(),
            foreign: BTreeMap::new(),
            counterparts: BTreeMap::new(),
        }
    }

    pub fn owner(&self) -> &PublicKey {
        &self.owner
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn foreign_blocks(&self) -> impl Iterator<Item = &Block> {
        self.foreign.values().flatten()
    }

    /// Spendable balance in euro-cents: initial balance, plus received
    /// agreements, minus sent proposals, over the own chain.
    pub fn balance(&self) -> u64 {
        let mut cents = self.initial_balance as i128;
        for block in &self.blocks {
            match block.kind {
                BlockKind::Proposal => cents -= block.amount as i128,
                BlockKind::Agreement => cents += block.amount as i128,
            }
        }
        debug_assert!(cents >= 0, "chain invariant: balance went negative");
        cents.max(0) as u64
    }

    fn tip_digest(&self) -> BlockDigest {
        self.blocks.last().map(Block::digest).unwrap_or([0u8; 32])
    }

    fn next_sequence(&self) -> u64 {
        self.blocks.len() as u64 + 1
    }

    fn append_signed(
        &mut self,
        identity: &Identity,
        link_key: PublicKey,
        link_sequence: u64,
        kind: BlockKind,
        amount: u64,
    ) -> Block {
        let mut block = Block {
            signer: self.owner,
            sequence: self.next_sequence(),
            link_key,
            link_sequence,
            previous_hash: self.tip_digest(),
            kind,
            amount,
            signature: Signature::from_bytes(&[0u8; SIGNATURE_LEN]).unwrap(),
        };
        block.signature = identity.sign(&block.signed_bytes());
        self.blocks.push(block.clone());
        block
    }

    /// Appends a signed payment proposal toward `counterparty`.
    pub fn create_proposal(
        &mut self,
        identity: &Identity,
        counterparty: &PublicKey,
        amount: u64,
    ) -> Result<Block, LedgerError> {
        if identity.public() != &self.owner {
            return Err(LedgerError::SignerMismatch);
        }
        if amount == 0 {
            return Err(LedgerError::ZeroAmount);
        }
        let balance = self.balance();
        if balance < amount {
            return Err(LedgerError::InsufficientBalance { balance, amount });
        }
        Ok(self.append_signed(identity, *counterparty, 0, BlockKind::Proposal, amount))
    }

    /// Verifies an incoming proposal addressed to this chain's owner and
    /// appends the matching agreement.
    pub fn create_agreement(
        &mut self,
        identity: &Identity,
        proposal: &Block,
    ) -> Result<Block, LedgerError> {
        if identity.public() != &self.owner {
            return Err(LedgerError::SignerMismatch);
        }
        if proposal.kind != BlockKind::Proposal {
            return Err(LedgerError::NotAProposal);
        }
        if proposal.link_key != self.owner {
            return Err(LedgerError::MislinkedProposal {
                addressed: proposal.link_key,
            });
        }
        proposal.check_structure()?;
        if !proposal.verify_signature() {
            return Err(LedgerError::BadSignature);
        }
        Ok(self.append_signed(
            identity,
            proposal.signer,
            proposal.sequence,
            BlockKind::Agreement,
            proposal.amount,
        ))
    }

    /// Checks one block against everything this chain already holds. Returns
    /// a [`ConflictProof`] when the block forks a known one; errors on
    /// malformed or incorrectly signed blocks.
    pub fn validate_block(&self, block: &Block) -> Result<BlockCheck, LedgerError> {
        self.validate_block_inner(block, &mut Block::verify_signature)
    }

    /// As [`Chain::validate_block`], with signature checks memoized in
    /// `cache`. Verification is a pure function of the block bytes, so the
    /// cache never changes an outcome, only the cost.
    pub fn validate_block_cached(
        &self,
        block: &Block,
        cache: &SigCache,
    ) -> Result<BlockCheck, LedgerError> {
        self.validate_block_inner(block, &mut |b| cache.verify(b))
    }

    fn validate_block_inner(
        &self,
        block: &Block,
        verify: &mut dyn FnMut(&Block) -> bool,
    ) -> Result<BlockCheck, LedgerError> {
        block.check_structure()?;

        let local: Option<&Block> = if block.signer == self.owner {
            // A block claiming to be ours: compare against our own chain.
            self.blocks.get(block.sequence as usize - 1)
        } else {
            self.foreign
                .get(&(block.signer, block.sequence))
                .and_then(|slot| slot.first())
        };

        match local {
            None => {
                if !verify(block) {
                    return Err(LedgerError::BadSignature);
                }
                Ok(BlockCheck::Clean)
            }
            Some(known) if known.digest() == block.digest() => Ok(BlockCheck::AlreadyKnown),
            Some(known) => {
                if !verify(block) {
                    return Err(LedgerError::BadSignature);
                }
                let proof = ConflictProof::new(known.clone(), block.clone())?;
                Ok(BlockCheck::Conflict(Box::new(proof)))
            }
        }
    }

    /// Admits a foreign block into local knowledge. Call after validation;
    /// duplicates are ignored.
    pub fn record_foreign(&mut self, block: &Block) {
        if block.signer == self.owner {
            return;
        }
        let slot = self
            .foreign
            .entry((block.signer, block.sequence))
            .or_default();
        if slot.iter().all(|b| b.digest() != block.digest()) {
            slot.push(block.clone());
        }
    }

    /// Remembers the counterparty half-block paired with our own block at
    /// `own_sequence`, so evidence segments can carry it.
    pub fn record_counterpart(&mut self, own_sequence: u64, block: &Block) {
        self.record_foreign(block);
        self.counterparts.insert(own_sequence, block.clone());
    }

    /// The last `n` own blocks, oldest first.
    pub fn chain_segment(&self, n: usize) -> Vec<Block> {
        let start = self.blocks.len().saturating_sub(n);
        self.blocks[start..].to_vec()
    }

    /// Every foreign block that sits in a conflicted slot: the fork evidence
    /// this chain's owner can prove to anyone.
    pub fn conflict_evidence(&self) -> Vec<Block> {
        let mut out = Vec::new();
        for slot in self.foreign.values() {
            if slot.len() < 2 {
                continue;
            }
            let mut pair: Vec<Block> = slot.clone();
            pair.sort_by_key(Block::digest);
            out.extend(pair);
        }
        out
    }

    /// [`Chain::chain_segment`] plus the counterparty half of each included
    /// transaction, plus every known conflicting pair. The foreign halves
    /// let a third party pair two forked blocks into a [`ConflictProof`];
    /// the conflict pairs spread a discovered fork epidemically.
    pub fn evidence_segment(&self, n: usize) -> Vec<Block> {
        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(2 * n);
        for own in self.chain_segment(n) {
            let counterpart = self.counterparts.get(&own.sequence).cloned();
            if seen.insert(own.digest()) {
                out.push(own);
            }
            if let Some(block) = counterpart {
                if seen.insert(block.digest()) {
                    out.push(block);
                }
            }
        }
        for block in self.conflict_evidence() {
            if seen.insert(block.digest()) {
                out.push(block);
            }
        }
        out
    }
}

/// Scans a set of blocks for forks. Blocks that fail structural checks or
/// signature verification are ignored — a forgery is not evidence. For each
/// conflicting (signer, sequence) group the single proof with the
/// lexicographically smallest digest pair is reported; output is ordered by
/// (signer, sequence).
///
/// Signatures are only checked inside candidate conflict groups: a block
/// alone in its slot can never appear in a proof, so its validity cannot
/// change the output.
pub fn find_double_spends<'a, I>(blocks: I) -> Vec<ConflictProof>
where
    I: IntoIterator<Item = &'a Block>,
{
    let mut groups: BTreeMap<(PublicKey, u64), BTreeMap<BlockDigest, &Block>> = BTreeMap::new();
    for block in blocks {
        if block.check_structure().is_err() {
            continue;
        }
        groups
            .entry((block.signer, block.sequence))
            .or_default()
            .insert(block.digest(), block);
    }

    let mut proofs = Vec::new();
    for variants in groups.into_values() {
        if variants.len() < 2 {
            continue;
        }
        // Digest order is the tie-break order; take the two smallest that
        // actually verify.
        let mut valid = variants.into_values().filter(|b| b.verify_signature());
        let (Some(a), Some(b)) = (valid.next(), valid.next()) else {
            continue;
        };
        let proof = ConflictProof::new(a.clone(), b.clone())
            .expect("grouped blocks share signer and sequence with distinct digests");
        proofs.push(proof);
    }
    proofs
}

/// Serializes blocks as JSON lines, one block per line.
pub fn blocks_to_jsonl<'a, I>(blocks: I) -> String
where
    I: IntoIterator<Item = &'a Block>,
{
    let mut out = String::new();
    for block in blocks {
        out.push_str(&serde_json::to_string(block).expect("block serialization is infallible"));
        out.push('\n');
    }
    out
}

/// Process-local memo of block digests whose signatures verified. Signature
/// verification is pure, so memoizing it is behaviorally transparent; it
/// turns the per-observer cost of re-checking gossiped blocks into a
/// once-per-block cost. Clones share the same cache. Single-threaded by
/// design — simulation runs own one each.
#[derive(Debug, Clone, Default)]
pub struct SigCache {
    verified: Rc<RefCell<HashSet<BlockDigest>>>,
}

impl SigCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn verify(&self, block: &Block) -> bool {
        let digest = block.digest();
        if self.verified.borrow().contains(&digest) {
            return true;
        }
        let ok = block.verify_signature();
        if ok {
            self.verified.borrow_mut().insert(digest);
        }
        ok
    }
}

mod digest_hex {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(digest: &[u8; 32], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(digest))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; 32], D::Error> {
        let text = String::deserialize(d)?;
        let bytes = hex::decode(&text).map_err(serde::de::Error::custom)?;
        bytes
            .try_into()
            .map_err(|_| serde::de::Error::custom("digest must be 32 octets"))
    }
}
