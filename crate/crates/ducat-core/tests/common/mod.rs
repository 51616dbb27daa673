//! Shared test helpers: deterministic identities, random ledger generation
//! with injected forks, and the independent all-pairs double-spend oracle
//! the grouped implementation is checked against.

use std::sync::OnceLock;

use ducat_core::ledger::{Block, BlockDigest, BlockKind, Chain};
use ducat_core::{Identity, PublicKey, SEED_LEN};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A deterministic identity per small index, shared across tests.
pub fn identity(n: u16) -> &'static Identity {
    static POOL: OnceLock<Vec<Identity>> = OnceLock::new();
    let pool = POOL.get_or_init(|| {
        (0..64u16)
            .map(|i| {
                let mut seed = [0u8; SEED_LEN];
                seed[..2].copy_from_slice(&i.to_be_bytes());
                seed[31] = 0xA5;
                Identity::from_seed(&seed).unwrap()
            })
            .collect()
    });
    &pool[n as usize]
}

pub fn key(n: u16) -> PublicKey {
    *identity(n).public()
}

/// Signs a forked sibling of `template`: same signer, sequence, and previous
/// hash, different payee and amount, valid signature.
pub fn forked_sibling(signer: &Identity, template: &Block, payee: PublicKey, amount: u64) -> Block {
    let mut block = Block {
        signer: template.signer,
        sequence: template.sequence,
        link_key: payee,
        link_sequence: 0,
        previous_hash: template.previous_hash,
        kind: BlockKind::Proposal,
        amount,
        signature: template.signature,
    };
    block.signature = signer.sign(&block.signed_bytes());
    block
}

/// What `random_block_set` built, for assertions about ground truth.
pub struct GeneratedSet {
    pub blocks: Vec<Block>,
    pub forked_slots: usize,
}

/// Builds a random multi-signer block set: honest chains of random length,
/// an optional handful of injected forks (probability ½ per set), duplicated
/// entries, and a shuffled order.
pub fn random_block_set(seed: u64, max_signers: u16, max_blocks: usize) -> GeneratedSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_signers = rng.random_range(1..=max_signers);
    let mut blocks: Vec<Block> = Vec::new();

    for s in 0..n_signers {
        let signer = identity(s);
        let mut chain = Chain::new(*signer.public(), 1_000_000);
        let length = rng.random_range(0..=(max_blocks / n_signers as usize).max(1));
        for _ in 0..length {
            if blocks.len() >= max_blocks {
                break;
            }
            let payee = key((s + 1 + rng.random_range(0..4)) % 64);
            let amount = rng.random_range(1..=500);
            blocks.push(chain.create_proposal(signer, &payee, amount).unwrap());
        }
    }

    let mut forked_slots = 0;
    if rng.random::<f64>() < 0.5 && !blocks.is_empty() {
        for _ in 0..rng.random_range(1..=3usize) {
            let victim = rng.random_range(0..blocks.len());
            let template = blocks[victim].clone();
            let signer_index = (0..64u16)
                .find(|i| key(*i) == template.signer)
                .expect("template signed by pool identity");
            let sibling = forked_sibling(
                identity(signer_index),
                &template,
                key(rng.random_range(0..64)),
                template.amount + 1 + rng.random_range(0..100),
            );
            blocks.push(sibling);
            forked_slots += 1;
        }
    }

    // Duplicates exercise digest-level dedup.
    if !blocks.is_empty() {
        for _ in 0..rng.random_range(0..3usize) {
            let index = rng.random_range(0..blocks.len());
            blocks.push(blocks[index].clone());
        }
        // Tampered siblings (bad signature, same slot) exercise the
        // forgery filter: they must never appear in any proof.
        for _ in 0..rng.random_range(0..2usize) {
            let index = rng.random_range(0..blocks.len());
            let mut fake = blocks[index].clone();
            fake.amount += 7_777;
            blocks.push(fake);
        }
    }

    // Shuffle by sorting on a random key, deterministically from the rng.
    let mut keyed: Vec<(u64, Block)> = blocks.into_iter().map(|b| (rng.random(), b)).collect();
    keyed.sort_by_key(|(k, _)| *k);
    GeneratedSet {
        blocks: keyed.into_iter().map(|(_, b)| b).collect(),
        forked_slots,
    }
}

/// The conflict fingerprint of a proof: slot plus the ordered digest pair.
pub type ConflictKey = (PublicKey, u64, BlockDigest, BlockDigest);

/// Independent O(n²) oracle: compares every pair of blocks directly and
/// keeps, per conflicting (signer, sequence) slot, the lexicographically
/// smallest digest pair. Mirrors the stated tie-break rule, not the implementation. Digests
/// are precomputed once per block; the pair scan stays quadratic.
pub fn oracle_double_spends(blocks: &[Block]) -> Vec<ConflictKey> {
    let usable: Vec<(&Block, BlockDigest)> = blocks
        .iter()
        .filter(|b| b.check_structure().is_ok() && b.verify_signature())
        .map(|b| (b, b.digest()))
        .collect();

    let mut found: Vec<ConflictKey> = Vec::new();
    for i in 0..usable.len() {
        for j in (i + 1)..usable.len() {
            let (a, da) = (usable[i].0, usable[i].1);
            let (b, db) = (usable[j].0, usable[j].1);
            if a.signer != b.signer || a.sequence != b.sequence {
                continue;
            }
            if da == db {
                continue;
            }
            let pair = if da < db { (da, db) } else { (db, da) };
            let candidate = (a.signer, a.sequence, pair.0, pair.1);
            match found
                .iter_mut()
                .find(|(s, q, _, _)| *s == a.signer && *q == a.sequence)
            {
                None => found.push(candidate),
                Some(existing) => {
                    if (candidate.2, candidate.3) < (existing.2, existing.3) {
                        *existing = candidate;
                    }
                }
            }
        }
    }
    found.sort();
    found
}

/// Projects implementation proofs onto oracle fingerprints.
pub fn proof_keys(proofs: &[ducat_core::ConflictProof]) -> Vec<ConflictKey> {
    let mut keys: Vec<ConflictKey> = proofs
        .iter()
        .map(|p| {
            let (a, b) = p.blocks();
            (*p.offender(), p.sequence(), a.digest(), b.digest())
        })
        .collect();
    keys.sort();
    keys
}
