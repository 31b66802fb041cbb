//! Planted-partition hypergraphs with noisy cluster-indicator features.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::hypergraph::{FeatureMatrix, Hypergraph, Labels};
use crate::io;
use crate::model::Split;

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedConfig {
    pub blocks: usize,
    pub block_size: usize,
    /// Random 3-vertex hyperedges drawn inside each block.
    pub intra_edges_per_block: usize,
    /// 3-vertex hyperedges spanning two blocks (two members from one, one from another).
    pub inter_edges: usize,
    pub feature_dim: usize,
    /// Standard deviation of the Gaussian noise added to every feature.
    pub noise: f64,
    /// Per-block share of vertices put in the training split.
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self {
            blocks: 2,
            block_size: 50,
            intra_edges_per_block: 150,
            inter_edges: 4,
            feature_dim: 8,
            noise: 0.8,
            train_fraction: 0.2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedInstance {
    pub hypergraph: Hypergraph,
    pub features: FeatureMatrix,
    pub labels: Labels,
    pub split: Split,
}

/// Vertices `b * block_size .. (b + 1) * block_size` form block `b` and carry
/// label `b`. Features are the block indicator (in the first `blocks`
/// columns) plus noise.
pub fn planted_partition(cfg: &PlantedConfig) -> Result<PlantedInstance> {
    if cfg.blocks < 2 || cfg.block_size < 3 || cfg.feature_dim < cfg.blocks {
        return Err(Error::InvalidParameter(
            "need >= 2 blocks of >= 3 vertices and feature_dim >= blocks".into(),
        ));
    }
    let noise =
        Normal::new(0.0, cfg.noise).map_err(|e| Error::InvalidParameter(format!("noise: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.blocks * cfg.block_size;
    let block_of = |v: usize| v / cfg.block_size;

    let mut sets = Vec::new();
    for b in 0..cfg.blocks {
        let base = b * cfg.block_size;
        for _ in 0..cfg.intra_edges_per_block {
            let members = index::sample(&mut rng, cfg.block_size, 3);
            sets.push(members.iter().map(|i| base + i).collect::<Vec<_>>());
        }
    }
    for _ in 0..cfg.inter_edges {
        let a = rng.random_range(0..cfg.blocks);
        let mut b = rng.random_range(0..cfg.blocks - 1);
        if b >= a {
            b += 1;
        }
        let pair = index::sample(&mut rng, cfg.block_size, 2);
        let mut edge: Vec<usize> = pair.iter().map(|i| a * cfg.block_size + i).collect();
        edge.push(b * cfg.block_size + rng.random_range(0..cfg.block_size));
        sets.push(edge);
    }
    let hypergraph = Hypergraph::from_vertex_sets(n, &sets)?;

    let x = DMatrix::from_fn(n, cfg.feature_dim, |v, j| {
        let signal = if j == block_of(v) { 1.0 } else { 0.0 };
        signal + noise.sample(&mut rng)
    });
    let features = FeatureMatrix::new(x)?;
    let labels = Labels::new((0..n).map(|v| block_of(v) as i64).collect())?;

    let per_block = ((cfg.train_fraction * cfg.block_size as f64).round() as usize).max(1);
    let mut train = Vec::new();
    for b in 0..cfg.blocks {
        let mut members: Vec<usize> = (b * cfg.block_size..(b + 1) * cfg.block_size).collect();
        members.shuffle(&mut rng);
        train.extend_from_slice(&members[..per_block]);
    }
    train.sort_unstable();
    let split = Split::from_train(train, &labels);

    Ok(PlantedInstance {
        hypergraph,
        features,
        labels,
        split,
    })
}

/// `count` train splits with `per_class` random vertices of every class.
pub fn stratified_splits(
    labels: &Labels,
    per_class: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<Split>> {
    let mut by_class = vec![Vec::new(); labels.num_classes()];
    for v in labels.labeled() {
        by_class[labels.get(v).expect("labeled")].push(v);
    }
    if let Some(c) = by_class.iter().position(|m| m.len() < per_class) {
        return Err(Error::InvalidParameter(format!(
            "class {c} has fewer than {per_class} labeled vertices"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| {
            let mut train: Vec<usize> = by_class
                .iter_mut()
                .flat_map(|members| {
                    members.shuffle(&mut rng);
                    members[..per_class].to_vec()
                })
                .collect();
            train.sort_unstable();
            Split::from_train(train, labels)
        })
        .collect())
}

/// Writes `hypergraph.txt`, `features.csv`, `labels.csv` and
/// `splits/split_<i>.txt` under `dir`.
pub fn write_dataset(dir: &Path, inst: &PlantedInstance, splits: &[Split]) -> Result<()> {
    let split_dir = dir.join("splits");
    fs::create_dir_all(&split_dir).map_err(|e| Error::io(&split_dir, e))?;
    io::write_hypergraph(dir.join("hypergraph.txt"), &inst.hypergraph)?;
    io::write_features(dir.join("features.csv"), &inst.features)?;
    io::write_labels(dir.join("labels.csv"), &inst.labels)?;
    for (i, split) in splits.iter().enumerate() {
        io::write_split(split_dir.join(format!("split_{i}.txt")), split)?;
    }
    Ok(())
}
