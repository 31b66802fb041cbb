//! Stability-bound calculators and the spectral view of the diffusion operator.
//!
//! All formulas are evaluated literally. Where the stated bounds omit the
//! loss Lipschitz constant `κ`, a `κ`-scaled variant is reported alongside.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::diffusion::{DiffusionOperator, DiffusionParams};
use crate::error::{Error, Result};
use crate::hypergraph::{max_row_norm, FeatureMatrix, Labels};
use crate::model::ShkcModel;

/// Largest polynomial order supported by [`spectral_coefficients`].
pub const MAX_POLY_ORDER: usize = 60;

const BOUND_RTOL: f64 = 1e-12;
const BOUND_ATOL: f64 = 1e-12;

/// `C_{αβL} = (β/L) Σ_{l=1..L} (α d_T)^l + (1 − β)`.
pub fn c_alpha_beta_l(alpha: f64, beta: f64, steps: usize, d_t: f64) -> f64 {
    assert!(steps >= 1, "diffusion steps must be >= 1");
    let base = alpha * d_t;
    let mut sum = 0.0;
    let mut power = 1.0;
    for _ in 1..=steps {
        power *= base;
        sum += power;
    }
    beta / steps as f64 * sum + (1.0 - beta)
}

/// Inputs to the uniform-stability bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryConstants {
    /// Bound on feature row norms.
    pub c_x: f64,
    /// Bound on `‖Θ‖₂`.
    pub c_theta: f64,
    /// Bound on `‖T̃‖₁`.
    pub d_t: f64,
    /// Lipschitz constant of the loss.
    pub kappa: f64,
    /// Learning rate.
    pub eta: f64,
    /// Number of training steps.
    pub train_steps: usize,
    /// Training set size.
    pub m: usize,
    /// Test set size.
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    pub steps: usize,
}

impl TheoryConstants {
    pub fn c_alpha_beta_l(&self) -> f64 {
        c_alpha_beta_l(self.alpha, self.beta, self.steps, self.d_t)
    }
}

/// Lipschitz, gradient and smoothness constants of the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConstants {
    pub l_m: f64,
    pub g_m: f64,
    pub s_m: f64,
}

/// `L_M`, `G_M`, `S_M` as functions of `C_x`, `C_Θ` and `C_{αβL}`.
pub fn model_constants(c_x: f64, c_theta: f64, c_abl: f64) -> ModelConstants {
    let a = c_x * c_abl;
    let big = c_theta.max(1.0);
    ModelConstants {
        l_m: a * big,
        g_m: a * (1.0 + c_theta),
        s_m: a * a * big * big + a * a * c_theta + a,
    }
}

/// The stated constants and their `κ`-scaled counterparts (gradient and
/// smoothness terms multiplied by `κ`).
pub fn theorem1_constants(c: &TheoryConstants) -> (ModelConstants, ModelConstants) {
    let base = model_constants(c.c_x, c.c_theta, c.c_alpha_beta_l());
    let scaled = ModelConstants {
        l_m: base.l_m,
        g_m: c.kappa * base.g_m,
        s_m: c.kappa * base.s_m,
    };
    (base, scaled)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityValue {
    pub value: f64,
    /// Set when the sum exceeded the representable range; `value` is `+∞`.
    pub overflowed: bool,
}

/// `μ = (2 η L_M G_M / m) Σ_{t=1..T} (1 + η S_M)^{t−1}`.
pub fn mu_shkc(
    k: &ModelConstants,
    eta: f64,
    m: usize,
    train_steps: usize,
) -> Result<StabilityValue> {
    if m == 0 || train_steps == 0 {
        return Err(Error::InvalidParameter(
            "m and the number of training steps must be >= 1".into(),
        ));
    }
    let growth = 1.0 + eta * k.s_m;
    let mut term = 1.0;
    let mut sum = 0.0;
    for _ in 0..train_steps {
        sum += term;
        term *= growth;
        if !sum.is_finite() {
            break;
        }
    }
    let value = 2.0 * eta * k.l_m * k.g_m / m as f64 * sum;
    if value.is_finite() {
        Ok(StabilityValue {
            value,
            overflowed: false,
        })
    } else {
        Ok(StabilityValue {
            value: f64::INFINITY,
            overflowed: true,
        })
    }
}

/// `K(m, n) = Σ_{i=1..m} n² / (n + i)²`.
pub fn k_mn(m: usize, n: usize) -> f64 {
    let nf = n as f64;
    (1..=m)
        .map(|i| {
            let r = nf / (nf + i as f64);
            r * r
        })
        .sum()
}

/// Terms of the transductive gap bound with every big-O constant set to 1.
/// The result is indicative only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapTerms {
    pub k_mn: f64,
    /// `μ κ (1 + 2 √(2 K ln δ⁻¹))`
    pub stability_term: f64,
    /// `((m + n) / (m n)) √(2 K ln δ⁻¹)`
    pub sampling_term: f64,
    pub total: f64,
    pub indicative: bool,
}

pub fn usb_gap(mu: f64, kappa: f64, m: usize, n: usize, delta: f64) -> Result<GapTerms> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidParameter("m and n must be >= 1".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    let k = k_mn(m, n);
    let root = (2.0 * k * (1.0 / delta).ln()).sqrt();
    let stability_term = mu * kappa * (1.0 + 2.0 * root);
    let (mf, nf) = (m as f64, n as f64);
    let sampling_term = (mf + nf) / (mf * nf) * root;
    Ok(GapTerms {
        k_mn: k,
        stability_term,
        sampling_term,
        total: stability_term + sampling_term,
        indicative: true,
    })
}

/// Lipschitz constant of the cross-entropy head with respect to its logits:
/// `|p − y| ≤ 1` for a sigmoid, `‖p − y‖₂ ≤ √2` for a softmax.
pub fn head_lipschitz(classes: usize) -> f64 {
    if classes <= 1 {
        1.0
    } else {
        std::f64::consts::SQRT_2
    }
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// What is needed to measure the lemma quantities for one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct LemmaInputs<'a> {
    pub features: &'a FeatureMatrix,
    /// `A(t) X` for the same operator.
    pub diffused: &'a DMatrix<f64>,
    pub params: DiffusionParams,
    pub d_t: f64,
    pub model: &'a ShkcModel,
    /// Second parameter set for the representation-difference bound.
    pub alternate: &'a ShkcModel,
    pub labels: &'a Labels,
    pub mask: &'a [usize],
}

/// Measured lemma quantities next to their bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub c_x: f64,
    pub c_theta: f64,
    pub c_alpha_beta_l: f64,
    pub kappa: f64,
    pub classifier_norm: f64,
    pub h_max: f64,
    pub h_max_bound: f64,
    pub delta_theta_norm: f64,
    pub delta_h_max: f64,
    pub delta_h_max_bound: f64,
    pub grad_theta_norm: f64,
    /// `C_x C_{αβL}`, assuming `‖ω‖₂ ≤ 1` and no `κ`.
    pub grad_theta_bound_stated: f64,
    /// `κ C_x C_{αβL} max(1, ‖ω‖₂)`; the value checked.
    pub grad_theta_bound: f64,
    pub grad_classifier_norm: f64,
    /// `C_x C_{αβL} C_Θ`.
    pub grad_classifier_bound_stated: f64,
    /// `κ C_x C_{αβL} C_Θ`; the value checked.
    pub grad_classifier_bound: f64,
    pub violations: Vec<String>,
}

impl LemmaReport {
    pub fn all_within(&self) -> bool {
        self.violations.is_empty()
    }

    /// Fails with [`Error::BoundViolation`] on the first violated bound.
    pub fn ensure(&self) -> Result<()> {
        let checks = [
            ("h_max", self.h_max, self.h_max_bound),
            ("delta_h_max", self.delta_h_max, self.delta_h_max_bound),
            ("grad_theta", self.grad_theta_norm, self.grad_theta_bound),
            (
                "grad_classifier",
                self.grad_classifier_norm,
                self.grad_classifier_bound,
            ),
        ];
        for (what, empirical, bound) in checks {
            if !within(empirical, bound) {
                return Err(Error::BoundViolation {
                    what: what.into(),
                    empirical,
                    bound,
                });
            }
        }
        Ok(())
    }
}

fn within(empirical: f64, bound: f64) -> bool {
    empirical <= bound * (1.0 + BOUND_RTOL) + BOUND_ATOL
}

/// Measures the hidden-representation norm, the representation change
/// between two parameter sets, and the gradient norms of the data loss, and
/// compares each with its bound (constants measured from the actual `X`
/// and `Θ`).
pub fn verify_lemma_bounds(inp: &LemmaInputs<'_>) -> Result<LemmaReport> {
    let x = inp.features;
    if inp.diffused.shape() != x.matrix().shape() {
        return Err(Error::DimensionMismatch(
            "diffused features must have the shape of the raw features".into(),
        ));
    }
    let p = inp.params;
    let c_x = x.max_row_norm();
    let c_theta = spectral_norm(&inp.model.theta);
    let cabl = c_alpha_beta_l(p.alpha, p.beta, p.steps, inp.d_t);
    let kappa = head_lipschitz(inp.model.num_classes());
    let classifier_norm = spectral_norm(&inp.model.classifier);

    let fw = inp.model.forward(inp.diffused)?;
    let fw_alt = inp.alternate.forward(inp.diffused)?;
    let h_max = max_row_norm(&fw.hidden);
    let delta_theta_norm = spectral_norm(&(&inp.model.theta - &inp.alternate.theta));
    let delta_h_max = max_row_norm(&(&fw.hidden - &fw_alt.hidden));

    let (_, grads) = inp
        .model
        .loss_and_grads(inp.diffused, inp.labels, inp.mask, 0.0)?;
    let grad_theta_norm = spectral_norm(&grads.theta);
    let grad_classifier_norm = spectral_norm(&grads.classifier);

    let mut report = LemmaReport {
        c_x,
        c_theta,
        c_alpha_beta_l: cabl,
        kappa,
        classifier_norm,
        h_max,
        h_max_bound: cabl * c_x * c_theta,
        delta_theta_norm,
        delta_h_max,
        delta_h_max_bound: cabl * c_x * delta_theta_norm,
        grad_theta_norm,
        grad_theta_bound_stated: c_x * cabl,
        grad_theta_bound: kappa * c_x * cabl * classifier_norm.max(1.0),
        grad_classifier_norm,
        grad_classifier_bound_stated: c_x * cabl * c_theta,
        grad_classifier_bound: kappa * c_x * cabl * c_theta,
        violations: Vec::new(),
    };
    if let Err(Error::BoundViolation {
        what,
        empirical,
        bound,
    }) = report.ensure()
    {
        report
            .violations
            .push(format!("{what}: {empirical} > {bound}"));
    }
    Ok(report)
}

/// `θ_k = α^k / K` for `k = 0..=K`.
pub fn theta_coefficients(alpha: f64, order: usize) -> Result<Vec<f64>> {
    check_order(order)?;
    let k = order as f64;
    Ok((0..=order).map(|i| alpha.powi(i as i32) / k).collect())
}

/// Coefficients `ξ_i = (−1)^i Σ_{k=i..K} C(k, i) α^k / K` of the same filter
/// written as a polynomial in `L = I − T̃`.
pub fn spectral_coefficients(alpha: f64, order: usize) -> Result<Vec<f64>> {
    let theta = theta_coefficients(alpha, order)?;
    Ok((0..=order)
        .map(|i| {
            let sum: f64 = (i..=order)
                .map(|k| binomial(k as u64, i as u64) as f64 * theta[k])
                .sum();
            if i % 2 == 0 {
                sum
            } else {
                -sum
            }
        })
        .collect())
}

fn check_order(order: usize) -> Result<()> {
    if order == 0 {
        return Err(Error::InvalidParameter(
            "polynomial order must be >= 1".into(),
        ));
    }
    if order > MAX_POLY_ORDER {
        return Err(Error::KTooLarge(order));
    }
    Ok(())
}

/// Exact binomial coefficient; exact in `u64` for `n ≤ 60`.
pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        // acc * (n - i) is divisible by (i + 1) at every step
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// `Σ_i c_i M^i` by Horner's rule.
pub fn matrix_polynomial(coeffs: &[f64], m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let mut acc = DMatrix::zeros(n, n);
    for &c in coeffs.iter().rev() {
        acc = &acc * m;
        for i in 0..n {
            acc[(i, i)] += c;
        }
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumBin {
    pub threshold: f64,
    pub count: usize,
}

/// Eigenvalues of the dense diffusion operator, ascending.
pub fn operator_spectrum(op: &DiffusionOperator<'_>) -> Result<Vec<f64>> {
    let a = op.dense()?;
    let mut ev: Vec<f64> = SymmetricEigen::new(a).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Number of eigenvalues `≥` each threshold.
pub fn spectrum_histogram(
    op: &DiffusionOperator<'_>,
    thresholds: &[f64],
) -> Result<Vec<SpectrumBin>> {
    let ev = operator_spectrum(op)?;
    Ok(thresholds
        .iter()
        .map(|&threshold| SpectrumBin {
            threshold,
            count: ev.iter().filter(|&&l| l >= threshold).count(),
        })
        .collect())
}

/// Full stability summary for one trained configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub constants: TheoryConstants,
    pub c_alpha_beta_l: f64,
    pub theorem1: ModelConstants,
    pub theorem1_kappa: ModelConstants,
    pub mu: StabilityValue,
    pub mu_kappa: StabilityValue,
    pub gap: GapTerms,
    pub delta: f64,
    pub empirical_l1: f64,
    pub empirical_h_max: f64,
    pub lemmas: LemmaReport,
    pub all_bounds_hold: bool,
}

pub fn stability_report(
    constants: TheoryConstants,
    delta: f64,
    empirical_l1: f64,
    lemmas: LemmaReport,
) -> Result<StabilityReport> {
    let (theorem1, theorem1_kappa) = theorem1_constants(&constants);
    let mu = mu_shkc(&theorem1, constants.eta, constants.m, constants.train_steps)?;
    let mu_kappa = mu_shkc(
        &theorem1_kappa,
        constants.eta,
        constants.m,
        constants.train_steps,
    )?;
    let gap = usb_gap(mu.value, constants.kappa, constants.m, constants.n, delta)?;
    let all_bounds_hold = lemmas.all_within() && empirical_l1 <= constants.d_t + BOUND_ATOL;
    Ok(StabilityReport {
        c_alpha_beta_l: constants.c_alpha_beta_l(),
        constants,
        theorem1,
        theorem1_kappa,
        mu,
        mu_kappa,
        gap,
        delta,
        empirical_l1,
        empirical_h_max: lemmas.h_max,
        lemmas,
        all_bounds_hold,
    })
}
