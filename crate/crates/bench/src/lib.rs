//! Shared fixtures for the benchmarks.

use mppsi_core::orchestrator::{PartyConfig, SessionConfig, Transport};

/// A feasible session over `universe_size` elements with `parties` parties of
/// `databases` replicas each. Party `i` holds every element not divisible by
/// `i + 1`, so the sets overlap but differ.
pub fn synthetic(universe_size: u32, parties: u32, databases: u32, seed: u64) -> SessionConfig {
    SessionConfig {
        universe_size,
        parties: (1..=parties)
            .map(|id| PartyConfig {
                id,
                databases,
                set: (1..=universe_size).filter(|e| e % (id + 1) != 0).collect(),
            })
            .collect(),
        leader: None,
        seed,
        transport: Transport::Memory,
        listen: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_configs_are_valid() {
        for k in [4, 16, 64] {
            for p in 2..6 {
                synthetic(k, p, 3, 0).validate().unwrap();
            }
        }
    }
}
