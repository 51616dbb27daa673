//! Deterministic round-based encounter simulator: a population of honest
//! peers plus configured adversaries, a lossy channel feeding the wire state
//! machines, and metric collection. Interaction happens only during pairwise
//! encounters; there is no global coordinator and no shared ledger.
//!
//! A run is a pure function of its [`SimConfig`], seed included. Each
//! subsystem draws from its own RNG stream (see [`rng`]), peers are mutated
//! one encounter at a time, and every output collection iterates in a fixed
//! order, so two runs of the same config produce byte-identical output.

pub mod channel;
pub mod metrics;
pub mod rng;
mod sweep;

pub use sweep::{run_sweep, run_sweep_sequential};

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::identity::cipher::ToyCipher;
use crate::identity::{Identity, PublicKey};
use crate::ledger::{blocks_to_jsonl, Block, LedgerError, SigCache};
use crate::peer::{
    adversary_double_spend, transact, EncounterOutcome, Peer, PeerDump, PeerError, PeerPolicy,
};
use channel::{ChannelConfig, LossyChannel};
use metrics::{DetectionEvent, DoubleSpendEvent, Metrics, RoundRow};
use rng::{stream_rng, STREAM_ADVERSARY, STREAM_AMOUNTS, STREAM_CHANNEL, STREAM_ENCOUNTERS};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Peer(#[from] PeerError),
    #[error("conservation violated at round {round}: expected {expected} cents, found {found}")]
    ConservationViolated {
        round: u64,
        expected: u64,
        found: u64,
    },
}

/// Payment amount model, in euro-cents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AmountDistribution {
    Fixed { cents: u64 },
    Uniform { lo: u64, hi: u64 },
}

impl Default for AmountDistribution {
    fn default() -> Self {
        AmountDistribution::Fixed { cents: 50 }
    }
}

impl AmountDistribution {
    fn sample(&self, rng: &mut ChaCha8Rng) -> u64 {
        match *self {
            AmountDistribution::Fixed { cents } => cents,
            AmountDistribution::Uniform { lo, hi } => rng.random_range(lo..=hi),
        }
    }

    fn validate(&self) -> Result<(), SimError> {
        match *self {
            AmountDistribution::Fixed { cents: 0 } => Err(SimError::InvalidConfig(
                "fixed amount must be at least 1 cent".into(),
            )),
            AmountDistribution::Uniform { lo, hi } if lo == 0 || lo > hi => Err(
                SimError::InvalidConfig("uniform amounts need 1 <= lo <= hi".into()),
            ),
            _ => Ok(()),
        }
    }
}

/// Adversary strategies the simulator can schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdversarySpec {
    /// Pays two honest victims with the same sequence number at `fork_round`,
    /// behaving honestly otherwise.
    DoubleSpender {
        fork_round: u64,
        #[serde(default = "default_fork_amount")]
        amount: u64,
    },
    /// A colluding wallet pair that transacts with itself every round to
    /// inflate its presence in contact lists.
    CycleBooster {
        #[serde(default = "default_boosts")]
        boosts_per_round: usize,
    },
}

fn default_fork_amount() -> u64 {
    500
}

fn default_boosts() -> usize {
    1
}

impl AdversarySpec {
    /// Wallets this adversary controls.
    fn wallet_count(&self) -> usize {
        match self {
            AdversarySpec::DoubleSpender { .. } => 1,
            AdversarySpec::CycleBooster { .. } => 2,
        }
    }
}

/// Experiment parameters. A config plus its seed fully determines a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_honest: usize,
    #[serde(default)]
    pub adversaries: Vec<AdversarySpec>,
    pub rounds: u64,
    pub encounters_per_round: usize,
    #[serde(default = "default_probability")]
    pub transaction_probability: f64,
    #[serde(default)]
    pub amount_distribution: AmountDistribution,
    #[serde(default)]
    pub channel: ChannelConfig,
    pub seed: u64,
    #[serde(default)]
    pub policy: PeerPolicy,
}

fn default_probability() -> f64 {
    1.0
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let config: SimConfig =
            serde_json::from_str(text).map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn population(&self) -> usize {
        self.n_honest
            + self
                .adversaries
                .iter()
                .map(AdversarySpec::wallet_count)
                .sum::<usize>()
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(0.0..=1.0).contains(&self.transaction_probability) {
            return Err(SimError::InvalidConfig(
                "transaction_probability outside [0, 1]".into(),
            ));
        }
        if !self.channel.is_valid() {
            return Err(SimError::InvalidConfig(
                "channel probabilities outside [0, 1]".into(),
            ));
        }
        self.amount_distribution.validate()?;
        self.policy
            .thresholds
            .validate()
            .map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        self.policy
            .transfer
            .validate()
            .map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        if self.rounds > 0 && self.encounters_per_round > 0 && self.population() < 2 {
            return Err(SimError::InvalidConfig(
                "encounters need a population of at least 2".into(),
            ));
        }
        if self
            .adversaries
            .iter()
            .any(|a| matches!(a, AdversarySpec::DoubleSpender { .. }))
            && self.n_honest < 2
        {
            return Err(SimError::InvalidConfig(
                "a double-spender needs at least 2 honest victims".into(),
            ));
        }
        // Desk-scale bounds; reject absurd sizes before any allocation.
        if self.population() > 10_000 {
            return Err(SimError::InvalidConfig(
                "population is capped at 10000 wallets".into(),
            ));
        }
        if self.rounds > 10_000_000 {
            return Err(SimError::InvalidConfig(
                "rounds are capped at 10 million".into(),
            ));
        }
        if self.encounters_per_round > 1_000_000 {
            return Err(SimError::InvalidConfig(
                "encounters_per_round is capped at 1 million".into(),
            ));
        }
        Ok(())
    }
}

/// Draws `m` ordered (sender, receiver) pairs, uniform over distinct pairs.
pub fn sample_encounters(
    rng: &mut ChaCha8Rng,
    n_peers: usize,
    m: usize,
) -> Result<Vec<(usize, usize)>, SimError> {
    if n_peers < 2 {
        return Err(SimError::InvalidConfig(
            "encounters need at least 2 peers".into(),
        ));
    }
    let mut pairs = Vec::with_capacity(m);
    for _ in 0..m {
        let sender = rng.random_range(0..n_peers);
        let mut receiver = rng.random_range(0..n_peers - 1);
        if receiver >= sender {
            receiver += 1;
        }
        pairs.push((sender, receiver));
    }
    Ok(pairs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NodeClass {
    Honest,
    Adversary,
}

/// Deterministic per-wallet identity seed.
fn identity_for(run_seed: u64, index: u64) -> Identity {
    let mut hasher = Sha256::new();
    hasher.update(b"ducat.identity");
    hasher.update(run_seed.to_be_bytes());
    hasher.update(index.to_be_bytes());
    let seed: [u8; 32] = hasher.finalize().into();
    Identity::from_seed(&seed).expect("seed is exactly 32 octets")
}

enum ScheduledAdversary {
    DoubleSpender {
        wallet: usize,
        fork_round: u64,
        amount: u64,
        executed: bool,
    },
    CycleBooster {
        wallet_a: usize,
        wallet_b: usize,
        boosts_per_round: usize,
    },
}

struct RoundTally {
    detections: u64,
    bytes: u64,
    transactions: u64,
}

/// Everything a run leaves behind: metrics plus the final peer states and
/// the full block universe, for `inspect`-style tooling.
#[derive(Debug, Clone)]
pub struct SimArtifacts {
    pub metrics: Metrics,
    pub peers: Vec<PeerDump>,
    /// One JSON line per distinct block anyone holds, ordered by
    /// (signer, sequence, digest).
    pub blocks_jsonl: String,
}

/// Runs one experiment. Deterministic: the same config (seed included)
/// always returns the same [`Metrics`], byte for byte once serialized.
pub fn run_simulation(config: &SimConfig) -> Result<Metrics, SimError> {
    run_simulation_full(config).map(|artifacts| artifacts.metrics)
}

/// As [`run_simulation`], also returning peer dumps and the block export.
pub fn run_simulation_full(config: &SimConfig) -> Result<SimArtifacts, SimError> {
    config.validate()?;

    let population = config.population();
    let sig_cache = SigCache::new();
    let mut peers: Vec<Peer> = Vec::with_capacity(population);
    let mut classes: Vec<NodeClass> = Vec::with_capacity(population);
    for index in 0..config.n_honest {
        peers.push(Peer::with_sig_cache(
            identity_for(config.seed, index as u64),
            config.policy,
            sig_cache.clone(),
        ));
        classes.push(NodeClass::Honest);
    }
    let mut scheduled: Vec<ScheduledAdversary> = Vec::new();
    for spec in &config.adversaries {
        match *spec {
            AdversarySpec::DoubleSpender { fork_round, amount } => {
                let wallet = peers.len();
                peers.push(Peer::with_sig_cache(
                    identity_for(config.seed, wallet as u64),
                    config.policy,
                    sig_cache.clone(),
                ));
                classes.push(NodeClass::Adversary);
                scheduled.push(ScheduledAdversary::DoubleSpender {
                    wallet,
                    fork_round,
                    amount,
                    executed: false,
                });
            }
            AdversarySpec::CycleBooster { boosts_per_round } => {
                let wallet_a = peers.len();
                for _ in 0..2 {
                    peers.push(Peer::with_sig_cache(
                        identity_for(config.seed, peers.len() as u64),
                        config.policy,
                        sig_cache.clone(),
                    ));
                    classes.push(NodeClass::Adversary);
                }
                scheduled.push(ScheduledAdversary::CycleBooster {
                    wallet_a,
                    wallet_b: wallet_a + 1,
                    boosts_per_round,
                });
            }
        }
    }

    let class_of: BTreeMap<PublicKey, NodeClass> = peers
        .iter()
        .zip(&classes)
        .map(|(peer, class)| (*peer.key(), *class))
        .collect();

    let mut encounter_rng = stream_rng(config.seed, STREAM_ENCOUNTERS);
    let mut amount_rng = stream_rng(config.seed, STREAM_AMOUNTS);
    let mut adversary_rng = stream_rng(config.seed, STREAM_ADVERSARY);
    let mut lossy = LossyChannel::new(config.channel, stream_rng(config.seed, STREAM_CHANNEL));
    let cipher = ToyCipher;

    let initial_balance_total = config.policy.initial_balance * population as u64;
    let conservation_mode = if config.adversaries.is_empty() {
        "strict"
    } else {
        "audit"
    };

    // Offenders are the double-spender wallets; their awareness curves run
    // over the whole horizon.
    let offender_keys: Vec<PublicKey> = scheduled
        .iter()
        .filter_map(|s| match s {
            ScheduledAdversary::DoubleSpender { wallet, .. } => Some(*peers[*wallet].key()),
            _ => None,
        })
        .collect();

    let mut metrics = Metrics {
        seed: config.seed,
        rounds: config.rounds,
        transactions_total: 0,
        payments_skipped: 0,
        transfer_failures: 0,
        bytes_total: 0,
        detections: Vec::new(),
        double_spends: Vec::new(),
        aware_curves: offender_keys
            .iter()
            .map(|k| (k.to_hex(), Vec::with_capacity(config.rounds as usize)))
            .collect(),
        score_histograms: BTreeMap::new(),
        initial_balance_total,
        final_balance_total: initial_balance_total,
        created_surplus: 0,
        conservation_mode: conservation_mode.into(),
        per_round: Vec::with_capacity(config.rounds as usize),
    };

    for round in 0..config.rounds {
        let mut tally = RoundTally {
            detections: 0,
            bytes: 0,
            transactions: 0,
        };

        // Scheduled adversary behavior, in declaration order.
        for entry in &mut scheduled {
            match entry {
                ScheduledAdversary::DoubleSpender {
                    wallet,
                    fork_round,
                    amount,
                    executed,
                } if *fork_round == round && !*executed => {
                    *executed = true;
                    let victim_b = adversary_rng.random_range(0..config.n_honest);
                    let mut victim_c = adversary_rng.random_range(0..config.n_honest - 1);
                    if victim_c >= victim_b {
                        victim_c += 1;
                    }
                    let (adv, b, c) = three_mut(&mut peers, *wallet, victim_b, victim_c);
                    match adversary_double_spend(adv, b, c, *amount, round, &mut lossy, &cipher) {
                        Ok(spend) => {
                            metrics.created_surplus += spend.surplus;
                            metrics.double_spends.push(DoubleSpendEvent {
                                round,
                                offender: adv.key().to_hex(),
                                first_detection_round: None,
                                latency_rounds: None,
                            });
                            fold_outcome(&mut metrics, &mut tally, round, &spend.outcomes.0);
                            fold_outcome(&mut metrics, &mut tally, round, &spend.outcomes.1);
                        }
                        // An adversary that already spent itself dry forks
                        // nothing this run.
                        Err(PeerError::Ledger(LedgerError::InsufficientBalance { .. })) => {
                            metrics.payments_skipped += 1;
                        }
                        Err(e) => return Err(e.into()),
                    }
                }
                ScheduledAdversary::CycleBooster {
                    wallet_a,
                    wallet_b,
                    boosts_per_round,
                } => {
                    for i in 0..*boosts_per_round {
                        let forward = (round as usize + i).is_multiple_of(2);
                        let (from, to) = if forward {
                            (*wallet_a, *wallet_b)
                        } else {
                            (*wallet_b, *wallet_a)
                        };
                        let amount = config.amount_distribution.sample(&mut amount_rng);
                        let (s, r) = two_mut(&mut peers, from, to);
                        match transact(s, r, amount, round, &mut lossy, &cipher) {
                            Ok(outcome) => fold_outcome(&mut metrics, &mut tally, round, &outcome),
                            Err(PeerError::Ledger(LedgerError::InsufficientBalance { .. })) => {
                                metrics.payments_skipped += 1
                            }
                            Err(e) => return Err(e.into()),
                        }
                    }
                }
                _ => {}
            }
        }

        // Uniformly sampled pairwise encounters.
        let pairs = if config.encounters_per_round > 0 {
            sample_encounters(&mut encounter_rng, population, config.encounters_per_round)?
        } else {
            Vec::new()
        };
        for (sender, receiver) in pairs {
            if encounter_rng.random::<f64>() >= config.transaction_probability {
                continue;
            }
            let amount = config.amount_distribution.sample(&mut amount_rng);
            let (s, r) = two_mut(&mut peers, sender, receiver);
            match transact(s, r, amount, round, &mut lossy, &cipher) {
                Ok(outcome) => fold_outcome(&mut metrics, &mut tally, round, &outcome),
                Err(PeerError::Ledger(LedgerError::InsufficientBalance { .. })) => {
                    metrics.payments_skipped += 1
                }
                Err(e) => return Err(e.into()),
            }
        }

        if config.policy.score_decay_per_round > 0 {
            for peer in &mut peers {
                peer.store_mut()
                    .apply_decay(config.policy.score_decay_per_round, round);
            }
        }

        // Money conservation, every round. Honest configs must hold the sum
        // exactly; adversarial configs must match the audited surplus.
        let total: u64 = peers.iter().map(Peer::balance).sum();
        let expected = initial_balance_total + metrics.created_surplus;
        if total != expected {
            return Err(SimError::ConservationViolated {
                round,
                expected,
                found: total,
            });
        }

        let mut aware_sum = 0.0;
        for key in &offender_keys {
            let aware = peers
                .iter()
                .zip(&classes)
                .filter(|(p, class)| **class == NodeClass::Honest && p.store().is_flagged(key))
                .count();
            let fraction = aware as f64 / config.n_honest as f64;
            metrics
                .aware_curves
                .get_mut(&key.to_hex())
                .expect("curve preallocated per offender")
                .push(fraction);
            aware_sum += fraction;
        }
        let aware_fraction = if offender_keys.is_empty() {
            0.0
        } else {
            aware_sum / offender_keys.len() as f64
        };

        metrics.per_round.push(RoundRow {
            round,
            detections: tally.detections,
            aware_fraction,
            bytes: tally.bytes,
            transactions: tally.transactions,
        });
    }

    // Detection latency per executed double-spend.
    for spend in &mut metrics.double_spends {
        let first = metrics
            .detections
            .iter()
            .filter(|d| d.offender == spend.offender && d.round >= spend.round)
            .map(|d| d.round)
            .min();
        spend.first_detection_round = first;
        spend.latency_rounds = first.map(|r| r - spend.round);
    }

    // Score histograms: how honest observers rate each node class.
    let mut histograms: BTreeMap<String, Vec<u64>> = BTreeMap::new();
    histograms.insert("honest".into(), vec![0; 101]);
    if !config.adversaries.is_empty() {
        histograms.insert("adversary".into(), vec![0; 101]);
    }
    for (peer, class) in peers.iter().zip(&classes) {
        if *class != NodeClass::Honest {
            continue;
        }
        for (key, entry) in peer.store().iter() {
            let label = match class_of.get(key) {
                Some(NodeClass::Honest) => "honest",
                Some(NodeClass::Adversary) => "adversary",
                None => continue,
            };
            histograms.get_mut(label).expect("preallocated")[entry.score.value() as usize] += 1;
        }
    }
    metrics.score_histograms = histograms;
    metrics.final_balance_total = peers.iter().map(Peer::balance).sum();

    // Block universe: every distinct block anyone holds, own or observed.
    let mut universe: BTreeMap<(PublicKey, u64, [u8; 32]), Block> = BTreeMap::new();
    for peer in &peers {
        for block in peer
            .chain()
            .blocks()
            .iter()
            .chain(peer.chain().foreign_blocks())
        {
            universe.insert(
                (block.signer, block.sequence, block.digest()),
                block.clone(),
            );
        }
    }
    let blocks_jsonl = blocks_to_jsonl(universe.values());

    Ok(SimArtifacts {
        metrics,
        peers: peers.iter().map(Peer::dump).collect(),
        blocks_jsonl,
    })
}

fn fold_outcome(
    metrics: &mut Metrics,
    tally: &mut RoundTally,
    round: u64,
    outcome: &EncounterOutcome,
) {
    if outcome.paid {
        metrics.transactions_total += 1;
        tally.transactions += 1;
        if !outcome.list_applied {
            metrics.transfer_failures += 1;
        }
    }
    metrics.bytes_total += outcome.bytes_transferred;
    tally.bytes += outcome.bytes_transferred;
    for flag in &outcome.flag_events {
        tally.detections += 1;
        metrics.detections.push(DetectionEvent {
            round,
            detector: flag.detector.to_hex(),
            offender: flag.offender.to_hex(),
        });
    }
}

fn two_mut<T>(items: &mut [T], i: usize, j: usize) -> (&mut T, &mut T) {
    assert_ne!(i, j);
    if i < j {
        let (head, tail) = items.split_at_mut(j);
        (&mut head[i], &mut tail[0])
    } else {
        let (head, tail) = items.split_at_mut(i);
        (&mut tail[0], &mut head[j])
    }
}

fn three_mut<T>(items: &mut [T], i: usize, j: usize, k: usize) -> (&mut T, &mut T, &mut T) {
    assert!(i != j && j != k && i != k);
    let mut order = [(i, 0usize), (j, 1), (k, 2)];
    order.sort_unstable_by_key(|&(index, _)| index);
    let (lo, mid, hi) = (order[0].0, order[1].0, order[2].0);

    let (head, rest) = items.split_at_mut(mid);
    let (mid_part, tail) = rest.split_at_mut(hi - mid);
    let refs = [&mut head[lo], &mut mid_part[0], &mut tail[0]];

    let mut out: [Option<&mut T>; 3] = [None, None, None];
    for (sorted_pos, reference) in refs.into_iter().enumerate() {
        out[order[sorted_pos].1] = Some(reference);
    }
    let [a, b, c] = out;
    (a.unwrap(), b.unwrap(), c.unwrap())
}
