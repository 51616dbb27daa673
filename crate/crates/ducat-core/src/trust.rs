//! Web-of-trust state: per-node score database, the +1 rule for received
//! contact lists, recency-ordered counterparty extraction, and threshold
//! classification for display.
//!
//! Scores live in [0, 100]; an absent key means 0 ("no information"). A key
//! listed in a received contact list gains one point per application; a key
//! never seen before enters at 1, since it arrived with exactly one
//! recommendation. Nothing in this module can make a key untransactable —
//! a penalty changes only the score and the flag.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::identity::PublicKey;
use crate::ledger::ConflictProof;

/// Maximum trust score.
pub const MAX_SCORE: u8 = 100;
/// Maximum number of keys in a contact list.
pub const CONTACT_LIST_MAX: usize = 50;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TrustError {
    #[error("contact list holds {got} keys, maximum is {CONTACT_LIST_MAX}")]
    OversizeList { got: usize },
    #[error("duplicate key at list index {index}")]
    DuplicateKey { index: usize },
    #[error("trust score {got} outside 0..=100")]
    ScoreRange { got: u64 },
    #[error("conflict proof does not verify")]
    InvalidProof,
    #[error("proof names offender {proven}, not the penalized key")]
    ProofSignerMismatch { proven: PublicKey },
    #[error("store csv line {line}: {reason}")]
    Csv { line: usize, reason: String },
    #[error("store csv contains the owner's own key at line {line}")]
    CsvOwnKey { line: usize },
    #[error("a store never holds an entry for its own key")]
    OwnKey,
}

/// A trust score in [0, 100].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TrustScore(u8);

impl TrustScore {
    pub fn new(value: u8) -> Result<Self, TrustError> {
        if value > MAX_SCORE {
            return Err(TrustError::ScoreRange { got: value as u64 });
        }
        Ok(TrustScore(value))
    }

    pub const ZERO: TrustScore = TrustScore(0);
    pub const MAX: TrustScore = TrustScore(MAX_SCORE);

    pub fn value(self) -> u8 {
        self.0
    }

    fn bump(self) -> Self {
        TrustScore(self.0.saturating_add(1).min(MAX_SCORE))
    }
}

impl fmt::Display for TrustScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Display classification of a score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrustBand {
    #[default]
    NoInfo,
    Low,
    Medium,
    High,
    Flagged,
}

/// Band boundaries. Defaults: 0 is NoInfo, 1–29 Low, 30–69 Medium,
/// 70–100 High; a flagged key is Flagged regardless of score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BandThresholds {
    pub low_min: u8,
    pub medium_min: u8,
    pub high_min: u8,
}

impl Default for BandThresholds {
    fn default() -> Self {
        BandThresholds {
            low_min: 1,
            medium_min: 30,
            high_min: 70,
        }
    }
}

impl BandThresholds {
    pub fn validate(&self) -> Result<(), TrustError> {
        if self.low_min == 0
            || self.low_min > self.medium_min
            || self.medium_min > self.high_min
            || self.high_min > MAX_SCORE
        {
            return Err(TrustError::ScoreRange {
                got: self.high_min as u64,
            });
        }
        Ok(())
    }

    pub fn classify(&self, score: TrustScore, flagged: bool) -> TrustBand {
        if flagged {
            TrustBand::Flagged
        } else if score.value() >= self.high_min {
            TrustBand::High
        } else if score.value() >= self.medium_min {
            TrustBand::Medium
        } else if score.value() >= self.low_min {
            TrustBand::Low
        } else {
            TrustBand::NoInfo
        }
    }
}

/// Up to 50 distinct counterparty keys, most recent first, never containing
/// the sender's own key.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ContactList(Vec<PublicKey>);

impl ContactList {
    pub fn new(keys: Vec<PublicKey>) -> Result<Self, TrustError> {
        if keys.len() > CONTACT_LIST_MAX {
            return Err(TrustError::OversizeList { got: keys.len() });
        }
        let mut seen = std::collections::HashSet::with_capacity(keys.len());
        for (index, key) in keys.iter().enumerate() {
            if !seen.insert(*key) {
                return Err(TrustError::DuplicateKey { index });
            }
        }
        Ok(ContactList(keys))
    }

    pub fn keys(&self) -> &[PublicKey] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Extracts the sender's recent counterparties from its transaction history
/// (oldest first). Each counterparty appears once, at its most recent
/// position; the owner is excluded; the result holds at most `limit` keys,
/// most recent first.
pub fn recent_counterparties<'a, I>(history: I, owner: &PublicKey, limit: usize) -> ContactList
where
    I: IntoIterator<Item = &'a PublicKey>,
    I::IntoIter: DoubleEndedIterator,
{
    let limit = limit.min(CONTACT_LIST_MAX);
    let mut seen = std::collections::HashSet::new();
    let mut keys = Vec::with_capacity(limit);
    for key in history.into_iter().rev() {
        if keys.len() >= limit {
            break;
        }
        if key == owner || !seen.insert(*key) {
            continue;
        }
        keys.push(*key);
    }
    ContactList(keys)
}

/// What one contact-list application changed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct UpdateSummary {
    pub incremented: usize,
    pub inserted: usize,
}

/// One stored opinion about a key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrustEntry {
    pub score: TrustScore,
    pub flagged: bool,
    pub last_updated: u64,
}

/// A wallet's trust database: public key → score, flag, last-update round.
/// Never contains the owner's own key.
#[derive(Debug, Clone)]
pub struct TrustStore {
    owner: PublicKey,
    entries: BTreeMap<PublicKey, TrustEntry>,
}

impl TrustStore {
    pub fn new(owner: PublicKey) -> Self {
        TrustStore {
            owner,
            entries: BTreeMap::new(),
        }
    }

    pub fn owner(&self) -> &PublicKey {
        &self.owner
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Deterministic (key-ordered) iteration.
    pub fn iter(&self) -> impl Iterator<Item = (&PublicKey, &TrustEntry)> {
        self.entries.iter()
    }

    /// Stored score, or 0 for an unknown key.
    pub fn lookup(&self, key: &PublicKey) -> TrustScore {
        self.entries.get(key).map(|e| e.score).unwrap_or_default()
    }

    pub fn entry(&self, key: &PublicKey) -> Option<&TrustEntry> {
        self.entries.get(key)
    }

    pub fn is_flagged(&self, key: &PublicKey) -> bool {
        self.entries.get(key).map(|e| e.flagged).unwrap_or(false)
    }

    pub fn band(&self, key: &PublicKey, thresholds: &BandThresholds) -> TrustBand {
        thresholds.classify(self.lookup(key), self.is_flagged(key))
    }

    /// Applies a received contact list: every listed known key gains one
    /// point (clamped at 100), every unknown key is inserted at 1. The
    /// owner's own key is skipped if present. Flagged entries gain points
    /// but stay flagged.
    pub fn apply_contact_list(&mut self, list: &ContactList, round: u64) -> UpdateSummary {
        let mut summary = UpdateSummary::default();
        for key in list.keys() {
            if *key == self.owner {
                continue;
            }
            match self.entries.get_mut(key) {
                Some(entry) => {
                    entry.score = entry.score.bump();
                    entry.last_updated = round;
                    summary.incremented += 1;
                }
                None => {
                    self.entries.insert(
                        *key,
                        TrustEntry {
                            score: TrustScore(1),
                            flagged: false,
                            last_updated: round,
                        },
                    );
                    summary.inserted += 1;
                }
            }
        }
        summary
    }

    /// Flags a proven double-spender. With `reset_score` (the default
    /// policy) the score also drops to 0. The key stays transactable — only
    /// its displayed band changes. Idempotent.
    pub fn apply_penalty(
        &mut self,
        key: &PublicKey,
        proof: &ConflictProof,
        reset_score: bool,
        round: u64,
    ) -> Result<&TrustEntry, TrustError> {
        if *key == self.owner {
            return Err(TrustError::OwnKey);
        }
        if !proof.verify() {
            return Err(TrustError::InvalidProof);
        }
        if proof.offender() != key {
            return Err(TrustError::ProofSignerMismatch {
                proven: *proof.offender(),
            });
        }
        let entry = self.entries.entry(*key).or_insert(TrustEntry {
            score: TrustScore::ZERO,
            flagged: false,
            last_updated: round,
        });
        entry.flagged = true;
        if reset_score {
            entry.score = TrustScore::ZERO;
        }
        entry.last_updated = round;
        Ok(entry)
    }

    /// Optional decay hook; scores of unflagged keys drop by `amount`,
    /// saturating at 0. Off by default in every policy.
    pub fn apply_decay(&mut self, amount: u8, round: u64) {
        if amount == 0 {
            return;
        }
        for entry in self.entries.values_mut() {
            if !entry.flagged && entry.score.value() > 0 {
                entry.score = TrustScore(entry.score.value().saturating_sub(amount));
                entry.last_updated = round;
            }
        }
    }

    /// CSV export: `hex_key,score,flagged,last_updated`, header row, rows in
    /// key order, canonical lowercase hex.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("hex_key,score,flagged,last_updated\n");
        for (key, entry) in &self.entries {
            out.push_str(&format!(
                "{},{},{},{}\n",
                key.to_hex(),
                entry.score,
                entry.flagged,
                entry.last_updated
            ));
        }
        out
    }

    /// Parses a CSV export produced by [`TrustStore::to_csv`].
    pub fn from_csv(owner: PublicKey, text: &str) -> Result<Self, TrustError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim() == "hex_key,score,flagged,last_updated" => {}
            _ => {
                return Err(TrustError::Csv {
                    line: 1,
                    reason: "missing header row".into(),
                })
            }
        }
        let mut store = TrustStore::new(owner);
        for (index, line) in lines {
            let line_no = index + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(TrustError::Csv {
                    line: line_no,
                    reason: format!("expected 4 fields, got {}", fields.len()),
                });
            }
            let key = PublicKey::from_hex(fields[0]).map_err(|e| TrustError::Csv {
                line: line_no,
                reason: e.to_string(),
            })?;
            if key == owner {
                return Err(TrustError::CsvOwnKey { line: line_no });
            }
            let raw_score: u64 = fields[1].parse().map_err(|_| TrustError::Csv {
                line: line_no,
                reason: format!("bad score {:?}", fields[1]),
            })?;
            if raw_score > MAX_SCORE as u64 {
                return Err(TrustError::ScoreRange { got: raw_score });
            }
            let flagged = match fields[2] {
                "true" => true,
                "false" => false,
                other => {
                    return Err(TrustError::Csv {
                        line: line_no,
                        reason: format!("bad flag {other:?}"),
                    })
                }
            };
            let last_updated: u64 = fields[3].parse().map_err(|_| TrustError::Csv {
                line: line_no,
                reason: format!("bad round {:?}", fields[3]),
            })?;
            store.entries.insert(
                key,
                TrustEntry {
                    score: TrustScore(raw_score as u8),
                    flagged,
                    last_updated,
                },
            );
        }
        Ok(store)
    }
}
