//! Symmetric generalized transition matrices on hypergraphs.
//!
//! With `A = Q W ρ(D_E) Qᵀ` the renormalized operator is
//! `T̃ = D̃^{-1/2} (A + I) D̃^{-1/2}`, where
//! `d̃(v) = 1 + Σ_e w(e) Q(v, e) δ(e) ρ(δ(e))`. Without renormalization the
//! `+ I` and `+ 1` terms are dropped, and vertices of zero degree end up with
//! all-zero rows.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypergraph::Hypergraph;
use crate::sparse::CsrMatrix;

/// Power-law degree modulation `ρ(x) = x^σ`, with `ρ(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoFunction {
    pub sigma: f64,
}

impl RhoFunction {
    pub fn new(sigma: f64) -> Self {
        Self { sigma }
    }

    /// `ρ ≡ 1` on positive degrees.
    pub fn constant() -> Self {
        Self { sigma: 0.0 }
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x == 0.0 {
            0.0
        } else {
            x.powf(self.sigma)
        }
    }

    /// Maximum of `ρ` over the hyperedge degrees actually present. Zero
    /// degrees are skipped, so the value stays finite for negative `σ`.
    pub fn max_over(&self, degrees: &[f64]) -> f64 {
        degrees
            .iter()
            .filter(|&&d| d > 0.0)
            .map(|&d| self.eval(d))
            .fold(0.0, f64::max)
    }
}

impl Default for RhoFunction {
    fn default() -> Self {
        Self::constant()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    matrix: CsrMatrix,
    vertex_degrees: Vec<f64>,
    edge_degrees: Vec<f64>,
    renormalized: bool,
    zero_degree: Vec<usize>,
}

impl TransitionMatrix {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// `d̃(v)` when renormalized, `d(v)` otherwise.
    pub fn vertex_degrees(&self) -> &[f64] {
        &self.vertex_degrees
    }

    pub fn edge_degrees(&self) -> &[f64] {
        &self.edge_degrees
    }

    pub fn is_renormalized(&self) -> bool {
        self.renormalized
    }

    /// Vertices whose degree is zero (only possible without renormalization);
    /// their rows and columns are identically zero.
    pub fn zero_degree_vertices(&self) -> &[usize] {
        &self.zero_degree
    }

    /// `max_i Σ_j |T̃_ij|`.
    pub fn l1_norm(&self) -> f64 {
        self.matrix.linf_norm()
    }

    /// MatrixMarket coordinate export for inspection in other tools.
    pub fn write_matrix_market(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.matrix
            .write_matrix_market_symmetric(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }
}

pub fn build_transition(
    h: &Hypergraph,
    rho: RhoFunction,
    renormalize: bool,
) -> Result<TransitionMatrix> {
    let n = h.num_vertices();
    let edge_degrees = h.edge_degrees();
    let mut edge_scale = Vec::with_capacity(h.num_edges());
    for (e, (&delta, &w)) in edge_degrees.iter().zip(h.edge_weights()).enumerate() {
        let r = rho.eval(delta);
        if !r.is_finite() {
            return Err(Error::NonFiniteRho {
                edge: e,
                delta,
                sigma: rho.sigma,
            });
        }
        edge_scale.push(w * r);
    }

    let base = if renormalize { 1.0 } else { 0.0 };
    let mut degrees = vec![base; n];
    // upper triangle (i <= j) of Q W ρ(D_E) Qᵀ
    let mut upper: Vec<HashMap<usize, f64>> = vec![HashMap::new(); n];
    for (e, edge) in h.hyperedges().iter().enumerate() {
        let c = edge_scale[e];
        for &(v, q) in edge {
            degrees[v] += c * q * edge_degrees[e];
        }
        if c == 0.0 {
            continue;
        }
        for &(a, qa) in edge {
            for &(b, qb) in edge {
                if a <= b {
                    *upper[a].entry(b).or_insert(0.0) += c * (qa * qb);
                }
            }
        }
    }
    if renormalize {
        for (i, row) in upper.iter_mut().enumerate() {
            *row.entry(i).or_insert(0.0) += 1.0;
        }
    }

    let zero_degree: Vec<usize> = (0..n).filter(|&v| degrees[v] == 0.0).collect();
    if !zero_degree.is_empty() {
        log::warn!(
            "{} vertices have zero degree; their transition rows are all zero: {:?}",
            zero_degree.len(),
            zero_degree
        );
    }
    let sqrt_deg: Vec<f64> = degrees.iter().map(|d| d.sqrt()).collect();

    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, row) in upper.into_iter().enumerate() {
        for (j, a) in row {
            if a == 0.0 || degrees[i] == 0.0 || degrees[j] == 0.0 {
                continue;
            }
            let t = a / (sqrt_deg[i] * sqrt_deg[j]);
            rows[i].push((j, t));
            if i != j {
                rows[j].push((i, t));
            }
        }
    }

    Ok(TransitionMatrix {
        matrix: CsrMatrix::from_rows(rows),
        vertex_degrees: degrees,
        edge_degrees,
        renormalized: renormalize,
        zero_degree,
    })
}

/// `d_T = √(1 + ρ_max · E · D)`, the bound on `‖T̃‖₁` for the renormalized
/// operator, with `ρ_max` taken over the realized hyperedge degrees.
pub fn prop1_bound(h: &Hypergraph, rho: RhoFunction) -> f64 {
    let stats = h.stats();
    let rho_max = rho.max_over(&h.edge_degrees());
    (1.0 + rho_max * stats.max_edge_size as f64 * stats.max_vertex_degree as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypergraph::Hypergraph;

    fn h3() -> Hypergraph {
        Hypergraph::from_vertex_sets(3, &[vec![0, 1], vec![1, 2]]).unwrap()
    }

    #[test]
    fn renormalized_path_hypergraph() {
        let t = build_transition(&h3(), RhoFunction::constant(), true).unwrap();
        assert_eq!(t.vertex_degrees(), &[3.0, 5.0, 3.0]);
        let m = t.matrix();
        assert!((m.get(0, 0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.get(0, 1) - 1.0 / 15f64.sqrt()).abs() < 1e-15);
        assert!((m.get(1, 1) - 0.6).abs() < 1e-15);
        assert_eq!(m.get(0, 2), 0.0);
        assert!(m.is_symmetric());
        let expected = 0.6 + 2.0 / 15f64.sqrt();
        assert!((t.l1_norm() - expected).abs() < 1e-15);
        assert!(t.l1_norm() <= prop1_bound(&h3(), RhoFunction::constant()));
    }

    #[test]
    fn plain_form_has_smaller_degrees() {
        let t = build_transition(&h3(), RhoFunction::constant(), false).unwrap();
        assert_eq!(t.vertex_degrees(), &[2.0, 4.0, 2.0]);
        let r = build_transition(&h3(), RhoFunction::constant(), true).unwrap();
        let row_sum = |t: &TransitionMatrix, i| t.matrix().row(i).map(|(_, v)| v).sum::<f64>();
        assert!((row_sum(&t, 0) - row_sum(&r, 0)).abs() > 1e-3);
    }

    #[test]
    fn lone_vertex_gets_self_loop() {
        let h = Hypergraph::new(1, vec![], vec![]).unwrap();
        let t = build_transition(&h, RhoFunction::constant(), true).unwrap();
        assert_eq!(t.matrix().to_dense()[(0, 0)], 1.0);
        assert!(t.zero_degree_vertices().is_empty());
    }

    #[test]
    fn isolated_vertices_zero_rows_without_renormalization() {
        let h = Hypergraph::from_vertex_sets(4, &[vec![0, 1], vec![1, 2]]).unwrap();
        let t = build_transition(&h, RhoFunction::constant(), false).unwrap();
        assert_eq!(t.zero_degree_vertices(), &[3]);
        assert_eq!(t.matrix().row(3).count(), 0);
        let r = build_transition(&h, RhoFunction::constant(), true).unwrap();
        assert_eq!(r.matrix().get(3, 3), 1.0);
    }

    #[test]
    fn bound_values() {
        assert!((prop1_bound(&h3(), RhoFunction::constant()) - 5f64.sqrt()).abs() < 1e-15);
        let single = Hypergraph::from_vertex_sets(1, &[vec![0]]).unwrap();
        assert!((prop1_bound(&single, RhoFunction::constant()) - 2f64.sqrt()).abs() < 1e-15);
        // δ(e) = 2 everywhere: ρ_max = 2^-0.5
        let b = prop1_bound(&h3(), RhoFunction::new(-0.5));
        assert!((b - (1.0 + 2f64.powf(-0.5) * 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn rho_at_zero() {
        assert_eq!(RhoFunction::new(-1.0).eval(0.0), 0.0);
        assert_eq!(RhoFunction::new(2.0).eval(3.0), 9.0);
        assert_eq!(RhoFunction::new(-1.0).max_over(&[0.0, 0.5, 2.0]), 2.0);
    }

    #[test]
    fn non_finite_rho_rejected() {
        let h = Hypergraph::new(2, vec![vec![(0, 1e-300), (1, 0.0)]], vec![1.0]).unwrap();
        assert!(matches!(
            build_transition(&h, RhoFunction::new(-2.0), true),
            Err(Error::NonFiniteRho { .. })
        ));
    }
}
