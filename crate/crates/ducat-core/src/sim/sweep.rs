//! Seed sweeps: the same experiment across many seeds. Runs share nothing,
//! so with the `parallel` feature they fan out across threads via rayon;
//! without it the sweep degrades to a plain sequential loop with identical
//! results.

use super::metrics::Metrics;
use super::{run_simulation, SimConfig, SimError};

/// `base` with its seed replaced.
pub fn with_seed(base: &SimConfig, seed: u64) -> SimConfig {
    let mut config = base.clone();
    config.seed = seed;
    config
}

/// Runs `base` once per seed. Results are ordered like `seeds` regardless of
/// execution order.
#[cfg(feature = "parallel")]
pub fn run_sweep(base: &SimConfig, seeds: &[u64]) -> Result<Vec<Metrics>, SimError> {
    use rayon::prelude::*;
    seeds
        .par_iter()
        .map(|&seed| run_simulation(&with_seed(base, seed)))
        .collect()
}

/// Runs `base` once per seed. Results are ordered like `seeds`.
#[cfg(not(feature = "parallel"))]
pub fn run_sweep(base: &SimConfig, seeds: &[u64]) -> Result<Vec<Metrics>, SimError> {
    run_sweep_sequential(base, seeds)
}

/// Single-threaded sweep, always available; the baseline the parallel path
/// is benchmarked against.
pub fn run_sweep_sequential(base: &SimConfig, seeds: &[u64]) -> Result<Vec<Metrics>, SimError> {
    seeds
        .iter()
        .map(|&seed| run_simulation(&with_seed(base, seed)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::peer::PeerPolicy;
    use crate::sim::channel::ChannelConfig;
    use crate::sim::AmountDistribution;

    fn base() -> SimConfig {
        SimConfig {
            n_honest: 4,
            adversaries: Vec::new(),
            rounds: 5,
            encounters_per_round: 3,
            transaction_probability: 1.0,
            amount_distribution: AmountDistribution::Fixed { cents: 10 },
            channel: ChannelConfig::default(),
            seed: 0,
            policy: PeerPolicy::default(),
        }
    }

    #[test]
    fn sweep_matches_sequential() {
        let seeds: Vec<u64> = (0..6).collect();
        let config = base();
        let parallel = run_sweep(&config, &seeds).unwrap();
        let sequential = run_sweep_sequential(&config, &seeds).unwrap();
        assert_eq!(parallel, sequential);
        for (seed, metrics) in seeds.iter().zip(&parallel) {
            assert_eq!(metrics.seed, *seed);
        }
    }
}
