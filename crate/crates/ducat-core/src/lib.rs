//! Ducat: an offline peer-to-peer payment protocol with a gossiped
//! web-of-trust, plus a deterministic network simulator for studying it.
//!
//! Wallets exchange money over pairwise sequence-numbered chains while
//! disconnected from any backbone. After every payment the payer sends the
//! payee a list of its 50 most recent counterparties; each received list
//! bumps the listed keys' trust scores by one point, growing a decentralized
//! picture of who transacts broadly. Double-spending — signing two payments
//! with one sequence number toward two victims — is detected proactively
//! during chain verification and retroactively once gossiped evidence lets
//! any node pair the two forked blocks into a self-contained proof.
//!
//! Module map:
//!
//! - [`identity`] — 74-octet keys, 148-char hex codec, signing, packet cipher
//! - [`ledger`] — half-block chains, balances, fork detection
//! - [`trust`] — score store, +1 list rule, band classification
//! - [`wire`] — contact-payload codec, packet layout, windowed transfer
//! - [`peer`] — the per-wallet encounter workflow and adversary moves
//! - [`sim`] — deterministic round-based simulator, metrics, seed sweeps

pub mod identity;
pub mod ledger;
pub mod peer;
pub mod sim;
pub mod trust;
pub mod wire;

pub use identity::cipher::{Cipher, CipherError, ToyCipher, TOY_CIPHER_OVERHEAD};
pub use identity::{Identity, IdentityError, PublicKey, Signature, KEY_HEX_LEN, KEY_LEN, SEED_LEN};
pub use ledger::{
    find_double_spends, Block, BlockCheck, BlockKind, Chain, ConflictProof, LedgerError, SigCache,
};
pub use peer::{
    adversary_double_spend, cycle_boost, transact, EncounterOutcome, Peer, PeerDump, PeerError,
    PeerPolicy,
};
pub use sim::channel::{ChannelConfig, LossyChannel};
pub use sim::metrics::Metrics;
pub use sim::{
    run_simulation, run_simulation_full, run_sweep, run_sweep_sequential, AdversarySpec,
    AmountDistribution, SimArtifacts, SimConfig, SimError,
};
pub use trust::{
    BandThresholds, ContactList, TrustBand, TrustError, TrustScore, TrustStore, CONTACT_LIST_MAX,
};
pub use wire::{
    decode_contact_payload, encode_contact_payload, open_message, run_transfer, seal_message,
    MessageId, Packet, PacketChannel, PacketKind, PerfectChannel, TransferParams, WireError,
    CONTACT_PAYLOAD_MAX,
};
