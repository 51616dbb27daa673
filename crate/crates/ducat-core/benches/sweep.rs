//! Compares the rayon-parallel paths against their sequential fallbacks for
//! the two embarrassingly parallel workloads: seed sweeps and batch fork
//! scans. Built with `--no-default-features`, the "parallel" arms fall back
//! to the sequential code, turning the comparison into a sanity check.

use criterion::{criterion_group, criterion_main, Criterion};
use ducat_core::sim::channel::ChannelConfig;
use ducat_core::*;

fn sweep_config() -> SimConfig {
    SimConfig {
        n_honest: 8,
        adversaries: vec![AdversarySpec::DoubleSpender {
            fork_round: 4,
            amount: 100,
        }],
        rounds: 20,
        encounters_per_round: 4,
        transaction_probability: 1.0,
        amount_distribution: AmountDistribution::Fixed { cents: 20 },
        channel: ChannelConfig::default(),
        seed: 0,
        policy: PeerPolicy::default(),
    }
}

fn bench_seed_sweep(c: &mut Criterion) {
    let config = sweep_config();
    let seeds: Vec<u64> = (0..8).collect();

    let mut group = c.benchmark_group("seed_sweep");
    group.sample_size(10);
    group.bench_function("parallel", |b| {
        b.iter(|| run_sweep(&config, &seeds).unwrap())
    });
    group.bench_function("sequential", |b| {
        b.iter(|| run_sweep_sequential(&config, &seeds).unwrap())
    });
    group.finish();
}

/// One self-contained block set with a sprinkling of forks.
fn fork_set(set_seed: u8) -> Vec<Block> {
    let identities: Vec<Identity> = (0..4u8)
        .map(|n| Identity::from_seed(&[n.wrapping_add(set_seed.wrapping_mul(4)); 32]).unwrap())
        .collect();
    let mut blocks = Vec::new();
    for (i, signer) in identities.iter().enumerate() {
        let mut chain = Chain::new(*signer.public(), 1_000_000);
        let payee = *identities[(i + 1) % identities.len()].public();
        for seq in 0..50u64 {
            let block = chain.create_proposal(signer, &payee, 1 + seq).unwrap();
            blocks.push(block.clone());
            if seq % 17 == 0 {
                let mut fork = block.clone();
                fork.link_key = *identities[(i + 2) % identities.len()].public();
                fork.amount += 1;
                fork.signature = signer.sign(&fork.signed_bytes());
                blocks.push(fork);
            }
        }
    }
    blocks
}

fn bench_fork_scan_batch(c: &mut Criterion) {
    let sets: Vec<Vec<Block>> = (0..32u8).map(fork_set).collect();

    let mut group = c.benchmark_group("fork_scan_batch");
    group.sample_size(10);

    #[cfg(feature = "parallel")]
    group.bench_function("parallel", |b| {
        use rayon::prelude::*;
        b.iter(|| -> usize {
            sets.par_iter()
                .map(|set| find_double_spends(set).len())
                .sum()
        })
    });

    group.bench_function("sequential", |b| {
        b.iter(|| -> usize { sets.iter().map(|set| find_double_spends(set).len()).sum() })
    });
    group.finish();
}

criterion_group!(benches, bench_seed_sweep, bench_fork_scan_batch);
criterion_main!(benches);
