//! Hypergraph data model: weighted hyperedges with edge-dependent vertex
//! weights, node features, labels, and kNN construction from features.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Sentinel label for vertices without a class.
pub const UNLABELED: i64 = -1;

/// Pair count above which the mean pairwise distance is estimated from a
/// fixed-seed sample instead of the full enumeration.
const MEAN_DISTANCE_PAIR_CAP: usize = 1_000_000;
const MEAN_DISTANCE_SEED: u64 = 0x5eed_d15c;

/// One hyperedge: its member vertices with their edge-dependent weights `Q(v, e)`.
pub type Hyperedge = Vec<(usize, f64)>;

/// A hypergraph with edge-dependent vertex weights `Q` and prior hyperedge
/// weights `w`. Immutable once constructed; every instance satisfies the
/// structural invariants checked by [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Hypergraph {
    num_vertices: usize,
    hyperedges: Vec<Hyperedge>,
    edge_weights: Vec<f64>,
}

/// Structural statistics of a hypergraph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HypergraphStats {
    /// Largest hyperedge cardinality `E`.
    pub max_edge_size: usize,
    /// Largest number of hyperedges incident to one vertex `D`.
    pub max_vertex_degree: usize,
    /// Vertices incident to no hyperedge, ascending.
    pub isolated: Vec<usize>,
}

/// Checks the hypergraph invariants and returns its structural statistics.
pub fn validate(
    num_vertices: usize,
    hyperedges: &[Hyperedge],
    edge_weights: &[f64],
) -> Result<HypergraphStats> {
    if num_vertices == 0 {
        return Err(Error::InvalidParameter(
            "a hypergraph needs at least one vertex".into(),
        ));
    }
    if hyperedges.len() != edge_weights.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} hyperedges but {} edge weights",
            hyperedges.len(),
            edge_weights.len()
        )));
    }
    let mut degree = vec![0usize; num_vertices];
    let mut seen = vec![usize::MAX; num_vertices];
    let mut max_edge_size = 0;
    for (e, (edge, &w)) in hyperedges.iter().zip(edge_weights).enumerate() {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::WeightOutOfRange {
                value: w,
                what: format!("w(e) of hyperedge {e}"),
            });
        }
        if edge.is_empty() {
            return Err(Error::EmptyHyperedge(e));
        }
        for &(v, q) in edge {
            if v >= num_vertices {
                return Err(Error::IndexOutOfRange {
                    index: v,
                    num_vertices,
                    edge: e,
                });
            }
            if seen[v] == e {
                return Err(Error::DuplicateVertex { edge: e, vertex: v });
            }
            seen[v] = e;
            if !(0.0..=1.0).contains(&q) {
                return Err(Error::WeightOutOfRange {
                    value: q,
                    what: format!("Q({v}, {e})"),
                });
            }
            degree[v] += 1;
        }
        max_edge_size = max_edge_size.max(edge.len());
    }
    Ok(HypergraphStats {
        max_edge_size,
        max_vertex_degree: degree.iter().copied().max().unwrap_or(0),
        isolated: (0..num_vertices).filter(|&v| degree[v] == 0).collect(),
    })
}

impl Hypergraph {
    pub fn new(
        num_vertices: usize,
        hyperedges: Vec<Hyperedge>,
        edge_weights: Vec<f64>,
    ) -> Result<Self> {
        validate(num_vertices, &hyperedges, &edge_weights)?;
        Ok(Self {
            num_vertices,
            hyperedges,
            edge_weights,
        })
    }

    /// Binary incidence (`Q(v, e) = 1`) with unit edge weights.
    pub fn from_vertex_sets(num_vertices: usize, sets: &[Vec<usize>]) -> Result<Self> {
        let edges = sets
            .iter()
            .map(|s| s.iter().map(|&v| (v, 1.0)).collect())
            .collect();
        Self::new(num_vertices, edges, vec![1.0; sets.len()])
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_edges(&self) -> usize {
        self.hyperedges.len()
    }

    pub fn hyperedges(&self) -> &[Hyperedge] {
        &self.hyperedges
    }

    pub fn edge_weights(&self) -> &[f64] {
        &self.edge_weights
    }

    pub fn stats(&self) -> HypergraphStats {
        validate(self.num_vertices, &self.hyperedges, &self.edge_weights)
            .expect("hypergraph invariants hold after construction")
    }

    /// Hyperedge degrees `δ(e) = Σ_v Q(v, e)`.
    pub fn edge_degrees(&self) -> Vec<f64> {
        self.hyperedges
            .iter()
            .map(|e| e.iter().map(|&(_, q)| q).sum())
            .collect()
    }

    /// Dense `N × M` incidence-weight matrix `Q`.
    pub fn incidence_dense(&self) -> DMatrix<f64> {
        let mut q = DMatrix::zeros(self.num_vertices, self.num_edges());
        for (e, edge) in self.hyperedges.iter().enumerate() {
            for &(v, w) in edge {
                q[(v, e)] = w;
            }
        }
        q
    }

    /// Relabels vertex `v` as `perm[v]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.num_vertices {
            return Err(Error::VertexCountMismatch {
                expected: self.num_vertices,
                found: perm.len(),
            });
        }
        let edges = self
            .hyperedges
            .iter()
            .map(|e| e.iter().map(|&(v, q)| (perm[v], q)).collect())
            .collect();
        Self::new(self.num_vertices, edges, self.edge_weights.clone())
    }
}

/// Concatenates the hyperedge lists of hypergraphs over the same vertex set,
/// i.e. `Q = [Q_1, Q_2, ...]`.
pub fn concat_multimodal(hs: &[Hypergraph]) -> Result<Hypergraph> {
    let first = hs.first().ok_or_else(|| {
        Error::InvalidParameter("concatenation needs at least one hypergraph".into())
    })?;
    let n = first.num_vertices;
    let mut edges = Vec::new();
    let mut weights = Vec::new();
    for h in hs {
        if h.num_vertices != n {
            return Err(Error::VertexCountMismatch {
                expected: n,
                found: h.num_vertices,
            });
        }
        edges.extend(h.hyperedges.iter().cloned());
        weights.extend_from_slice(&h.edge_weights);
    }
    Hypergraph::new(n, edges, weights)
}

/// Dense node feature matrix `X` (`N × d`, one row per vertex).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix(DMatrix<f64>);

impl FeatureMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("feature entry {bad}")));
        }
        Ok(Self(values))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != d) {
            return Err(Error::DimensionMismatch(format!(
                "feature row {i} has {} columns, expected {d}",
                r.len()
            )));
        }
        Self::new(DMatrix::from_fn(n, d, |i, j| rows[i][j]))
    }

    pub fn num_rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn num_cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    /// Largest Euclidean row norm, `C_x` in the stability bounds.
    pub fn max_row_norm(&self) -> f64 {
        max_row_norm(&self.0)
    }

    pub fn check_rows(&self, num_vertices: usize) -> Result<()> {
        if self.num_rows() != num_vertices {
            return Err(Error::VertexCountMismatch {
                expected: num_vertices,
                found: self.num_rows(),
            });
        }
        Ok(())
    }
}

pub(crate) fn max_row_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.norm()).fold(0.0, f64::max)
}

/// Per-vertex class ids, with [`UNLABELED`] for vertices without a label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Labels {
    labels: Vec<i64>,
    num_classes: usize,
}

impl Labels {
    /// Class count is inferred as `max label + 1`.
    pub fn new(labels: Vec<i64>) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l < UNLABELED) {
            return Err(Error::InvalidParameter(format!("invalid label {bad}")));
        }
        let num_classes = labels.iter().copied().max().map_or(0, |m| (m + 1) as usize);
        Ok(Self {
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn get(&self, v: usize) -> Option<usize> {
        match self.labels[v] {
            l if l >= 0 => Some(l as usize),
            _ => None,
        }
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.labels
    }

    pub fn labeled(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.labels.len()).filter(|&v| self.labels[v] >= 0)
    }
}

/// Builds one hyperedge per vertex `v_c` containing `v_c` and its `k`
/// nearest neighbours (Euclidean distance, ties by ascending index), with
/// `Q(v, e) = exp(-d(v, v_c) / (gamma * d̂²))` where `d̂` is the mean
/// pairwise distance. All hyperedge weights are 1.
pub fn build_knn_hypergraph(x: &FeatureMatrix, k: usize, gamma: f64) -> Result<Hypergraph> {
    let n = x.num_rows();
    if k == 0 || k >= n {
        return Err(Error::InvalidParameter(format!(
            "k must satisfy 0 < k < N (k = {k}, N = {n})"
        )));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "gamma must be > 0, got {gamma}"
        )));
    }
    let rows: Vec<Vec<f64>> = x
        .matrix()
        .row_iter()
        .map(|r| r.iter().copied().collect())
        .collect();
    let mean = mean_pairwise_distance(&rows);
    if mean <= 0.0 {
        return Err(Error::DegenerateFeatures);
    }
    let scale = gamma * mean * mean;
    let edges: Vec<Hyperedge> = (0..n)
        .into_par_iter()
        .map(|c| {
            let mut others: Vec<(f64, usize)> = (0..n)
                .filter(|&v| v != c)
                .map(|v| (euclidean(&rows[c], &rows[v]), v))
                .collect();
            others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut edge = Vec::with_capacity(k + 1);
            edge.push((c, 1.0));
            for &(dist, v) in &others[..k] {
                let q = (-dist / scale).exp().clamp(f64::MIN_POSITIVE, 1.0);
                edge.push((v, q));
            }
            edge
        })
        .collect();
    Hypergraph::new(n, edges, vec![1.0; n])
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Mean Euclidean distance over unordered pairs; sampled with a fixed seed
/// once the pair count exceeds [`MEAN_DISTANCE_PAIR_CAP`].
fn mean_pairwise_distance(rows: &[Vec<f64>]) -> f64 {
    let n = rows.len();
    let pairs = n * (n - 1) / 2;
    if pairs <= MEAN_DISTANCE_PAIR_CAP {
        let total: f64 = (0..n)
            .into_par_iter()
            .map(|i| {
                ((i + 1)..n)
                    .map(|j| euclidean(&rows[i], &rows[j]))
                    .sum::<f64>()
            })
            .collect::<Vec<_>>()
            .iter()
            .sum();
        total / pairs as f64
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(MEAN_DISTANCE_SEED);
        let mut total = 0.0;
        for _ in 0..MEAN_DISTANCE_PAIR_CAP {
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            total += euclidean(&rows[i], &rows[j]);
        }
        total / MEAN_DISTANCE_PAIR_CAP as f64
    }
}
