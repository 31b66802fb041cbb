//! Shared fixtures for the criterion benchmarks.

use hyperdiffuse::synthetic::{planted_partition, PlantedConfig, PlantedInstance};

/// Planted two-block instance with `n` vertices and about `2n` hyperedges.
pub fn fixture(n: usize, feature_dim: usize) -> PlantedInstance {
    let block_size = n / 2;
    planted_partition(&PlantedConfig {
        blocks: 2,
        block_size,
        intra_edges_per_block: block_size * 2,
        inter_edges: n / 10,
        feature_dim,
        noise: 1.0,
        train_fraction: 0.2,
        seed: 7,
    })
    .expect("valid fixture")
}
