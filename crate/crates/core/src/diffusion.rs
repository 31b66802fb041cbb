//! Discounted Markov diffusion.
//!
//! The operator is `A(t) = β Z(t) + (1 − β) I` with
//! `Z(t) = (1/t) Σ_{τ=1..t} α^τ T̃^τ`. It is applied matrix-free through
//! repeated sparse products; dense materialization is only done for kernels
//! and spectra, behind a size cap.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypergraph::FeatureMatrix;
use crate::transition::TransitionMatrix;

pub const DEFAULT_DENSE_CAP: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionParams {
    /// Discount factor, `0 < α ≤ 1`.
    pub alpha: f64,
    /// Balance between diffused and original signal, `0 ≤ β ≤ 1`.
    pub beta: f64,
    /// Number of diffusion steps `t ≥ 1`.
    pub steps: usize,
}

impl DiffusionParams {
    pub fn new(alpha: f64, beta: f64, steps: usize) -> Result<Self> {
        let p = Self { alpha, beta, steps };
        p.check()?;
        Ok(p)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::InvalidParameter(format!(
                "beta must lie in [0, 1], got {}",
                self.beta
            )));
        }
        if self.steps == 0 {
            return Err(Error::InvalidParameter("steps must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    /// `X Xᵀ`
    Original,
    /// `A(t)ᵀ X Xᵀ A(t)`
    Markov,
    /// `A(t)ᵀ X Θ Θᵀ Xᵀ A(t)`
    Learnable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    pub values: DMatrix<f64>,
    pub kind: KernelKind,
}

impl KernelMatrix {
    /// `(e_i − e_j)ᵀ K (e_i − e_j)`.
    pub fn quadratic_distance(&self, i: usize, j: usize) -> f64 {
        let k = &self.values;
        k[(i, i)] + k[(j, j)] - k[(i, j)] - k[(j, i)]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DiffusionOperator<'a> {
    params: DiffusionParams,
    transition: &'a TransitionMatrix,
    dense_cap: usize,
}

impl<'a> DiffusionOperator<'a> {
    pub fn new(transition: &'a TransitionMatrix, params: DiffusionParams) -> Result<Self> {
        params.check()?;
        Ok(Self {
            params,
            transition,
            dense_cap: DEFAULT_DENSE_CAP,
        })
    }

    pub fn with_dense_cap(mut self, cap: usize) -> Self {
        self.dense_cap = cap;
        self
    }

    pub fn params(&self) -> DiffusionParams {
        self.params
    }

    pub fn transition(&self) -> &TransitionMatrix {
        self.transition
    }

    pub fn dim(&self) -> usize {
        self.transition.dim()
    }

    /// `A(t) · X` for any dense matrix with `N` rows.
    pub fn apply_matrix(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let n = self.dim();
        if x.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "operator is {n}x{n} but input has {} rows",
                x.nrows()
            )));
        }
        let DiffusionParams { alpha, beta, steps } = self.params;
        if beta == 0.0 {
            return Ok(x.clone());
        }
        let t = steps as f64;
        let mut power = x.clone();
        let mut acc = DMatrix::zeros(n, x.ncols());
        for tau in 1..=steps {
            power = self.transition.matrix().mul_dense(&power);
            let c = alpha.powi(tau as i32) / t;
            acc.zip_apply(&power, |a, p| *a += c * p);
        }
        acc.zip_apply(x, |a, v| *a = beta * *a + (1.0 - beta) * v);
        Ok(acc)
    }

    /// Diffused features `S = A(t) X`.
    pub fn apply_diffusion(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        self.apply_matrix(x.matrix()).and_then(FeatureMatrix::new)
    }

    /// Pre-activation hidden representations `A(t) X Θ`.
    pub fn projection(&self, x: &FeatureMatrix, theta: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let s = self.apply_matrix(x.matrix())?;
        project(&s, theta)
    }

    /// Dense `A(t)`.
    pub fn dense(&self) -> Result<DMatrix<f64>> {
        self.check_cap()?;
        self.apply_matrix(&DMatrix::identity(self.dim(), self.dim()))
    }

    /// `Φ Φᵀ` with `Φ = A(t) X Θ` (or `A(t) X` when `theta` is absent).
    pub fn kernel_matrix(
        &self,
        x: &FeatureMatrix,
        theta: Option<&DMatrix<f64>>,
    ) -> Result<KernelMatrix> {
        self.check_cap()?;
        let embedding = self.embedding(x, theta)?;
        let kind = match theta {
            Some(_) => KernelKind::Learnable,
            None if self.params.beta == 0.0 => KernelKind::Original,
            None => KernelKind::Markov,
        };
        Ok(KernelMatrix {
            values: gram(embedding.rows()),
            kind,
        })
    }

    pub fn embedding(
        &self,
        x: &FeatureMatrix,
        theta: Option<&DMatrix<f64>>,
    ) -> Result<DiffusionEmbedding> {
        let s = self.apply_matrix(x.matrix())?;
        let phi = match theta {
            Some(t) => project(&s, t)?,
            None => s,
        };
        Ok(DiffusionEmbedding(phi))
    }

    /// Distance between vertices `i` and `j` in the diffusion embedding.
    pub fn diffusion_distance(
        &self,
        x: &FeatureMatrix,
        theta: Option<&DMatrix<f64>>,
        i: usize,
        j: usize,
    ) -> Result<f64> {
        self.embedding(x, theta)?.distance(i, j)
    }

    fn check_cap(&self) -> Result<()> {
        if self.dim() > self.dense_cap {
            return Err(Error::SizeCapExceeded {
                n: self.dim(),
                cap: self.dense_cap,
            });
        }
        Ok(())
    }
}

fn project(s: &DMatrix<f64>, theta: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if theta.nrows() != s.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "theta has {} rows, features have {} columns",
            theta.nrows(),
            s.ncols()
        )));
    }
    Ok(s * theta)
}

/// `Φ Φᵀ`, filled from the upper triangle so the result is exactly symmetric.
fn gram(phi: &DMatrix<f64>) -> DMatrix<f64> {
    let n = phi.nrows();
    let rows: Vec<Vec<f64>> = phi
        .row_iter()
        .map(|r| r.iter().copied().collect())
        .collect();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum();
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// `X Xᵀ`, the kernel of the raw features.
pub fn original_kernel(x: &FeatureMatrix) -> KernelMatrix {
    KernelMatrix {
        values: gram(x.matrix()),
        kind: KernelKind::Original,
    }
}

/// Rows `Φ_i` of the embedding underlying a diffusion kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionEmbedding(DMatrix<f64>);

impl DiffusionEmbedding {
    pub fn rows(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn distance(&self, i: usize, j: usize) -> Result<f64> {
        let n = self.0.nrows();
        for v in [i, j] {
            if v >= n {
                return Err(Error::VertexOutOfRange {
                    index: v,
                    num_vertices: n,
                });
            }
        }
        Ok((self.0.row(i) - self.0.row(j)).norm())
    }
}
