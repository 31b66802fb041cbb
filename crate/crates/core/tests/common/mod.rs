//! Independent dense oracles and random instance generators shared by the
//! property suites and the acceptance runner.
#![allow(dead_code)]

use hyperdiffuse::model::init_params;
use hyperdiffuse::{FeatureMatrix, Hypergraph, Labels, ShkcModel};
use nalgebra::DMatrix;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SIGMAS: [f64; 5] = [-1.0, -0.5, 0.0, 0.5, 1.0];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random hypergraph with `n` vertices and `m` hyperedges. Edge sizes are
/// 1..=min(n, 6); about one weight in ten is exactly zero.
pub fn random_hypergraph(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Hypergraph {
    let mut edges = Vec::with_capacity(m);
    let mut weights = Vec::with_capacity(m);
    for _ in 0..m {
        let size = rng.random_range(1..=n.min(6));
        let members = index::sample(rng, n, size);
        let edge: Vec<(usize, f64)> = members
            .iter()
            .map(|v| {
                let q = if rng.random_bool(0.1) {
                    0.0
                } else {
                    rng.random::<f64>()
                };
                (v, q)
            })
            .collect();
        edges.push(edge);
        weights.push(if rng.random_bool(0.1) {
            0.0
        } else {
            rng.random::<f64>()
        });
    }
    Hypergraph::new(n, edges, weights).expect("generated hypergraph is valid")
}

/// Like [`random_hypergraph`] but every weight is strictly positive, so
/// only vertices outside all edges are isolated.
pub fn random_positive_hypergraph(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Hypergraph {
    let mut edges = Vec::with_capacity(m);
    for _ in 0..m {
        let size = rng.random_range(1..=n.min(6));
        let members = index::sample(rng, n, size);
        edges.push(
            members
                .iter()
                .map(|v| (v, rng.random_range(0.05..=1.0)))
                .collect(),
        );
    }
    let weights = (0..m).map(|_| rng.random_range(0.05..=1.0)).collect();
    Hypergraph::new(n, edges, weights).expect("generated hypergraph is valid")
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| scale * (2.0 * rng.random::<f64>() - 1.0))
}

pub fn random_features(rng: &mut ChaCha8Rng, n: usize, d: usize) -> FeatureMatrix {
    FeatureMatrix::new(random_matrix(rng, n, d, 1.0)).unwrap()
}

pub fn random_labels(rng: &mut ChaCha8Rng, n: usize, classes: usize) -> Labels {
    let mut labels: Vec<i64> = (0..n)
        .map(|_| rng.random_range(0..classes) as i64)
        .collect();
    // make every class appear so num_classes is as requested
    for (c, slot) in labels.iter_mut().take(classes).enumerate() {
        *slot = c as i64;
    }
    Labels::new(labels).unwrap()
}

fn rho(sigma: f64, x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.powf(sigma)
    }
}

/// Dense `D^{-1/2} (Q W ρ(D_E) Qᵀ [+ I]) D^{-1/2}` from the incidence matrix,
/// with degrees taken as row sums of the affinity. Zero-degree rows stay 0.
pub fn dense_transition(h: &Hypergraph, sigma: f64, renormalize: bool) -> DMatrix<f64> {
    let n = h.num_vertices();
    let q = h.incidence_dense();
    let delta = q.row_sum();
    let scale: Vec<f64> = h
        .edge_weights()
        .iter()
        .enumerate()
        .map(|(e, w)| w * rho(sigma, delta[e]))
        .collect();
    let mut qw = q.clone();
    for (e, s) in scale.iter().enumerate() {
        qw.column_mut(e).scale_mut(*s);
    }
    let mut a = &qw * q.transpose();
    if renormalize {
        a += DMatrix::<f64>::identity(n, n);
    }
    let d: Vec<f64> = (0..n).map(|i| a.row(i).sum()).collect();
    DMatrix::from_fn(n, n, |i, j| {
        if d[i] == 0.0 || d[j] == 0.0 {
            0.0
        } else {
            a[(i, j)] / (d[i].sqrt() * d[j].sqrt())
        }
    })
}

/// `√(1 + ρ_max · E · D)` with `ρ_max` over the positive edge degrees.
pub fn prop1_oracle(h: &Hypergraph, sigma: f64) -> f64 {
    let q = h.incidence_dense();
    let e_max = h.hyperedges().iter().map(Vec::len).max().unwrap_or(0) as f64;
    let d_max = (0..h.num_vertices())
        .map(|v| {
            h.hyperedges()
                .iter()
                .filter(|e| e.iter().any(|&(u, _)| u == v))
                .count()
        })
        .max()
        .unwrap_or(0) as f64;
    let rho_max = q
        .row_sum()
        .iter()
        .filter(|&&d| d > 0.0)
        .map(|&d| d.powf(sigma))
        .fold(0.0, f64::max);
    (1.0 + rho_max * e_max * d_max).sqrt()
}

/// Dense `β (1/t) Σ_{τ=1..t} α^τ T^τ + (1 − β) I` via explicit powers.
pub fn dense_diffusion(t_mat: &DMatrix<f64>, alpha: f64, beta: f64, steps: usize) -> DMatrix<f64> {
    let n = t_mat.nrows();
    let mut sum = DMatrix::zeros(n, n);
    for tau in 1..=steps {
        let mut p = DMatrix::identity(n, n);
        for _ in 0..tau {
            p = &p * t_mat;
        }
        sum += p * alpha.powi(tau as i32);
    }
    sum * (beta / steps as f64) + DMatrix::identity(n, n) * (1.0 - beta)
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Central differences over every parameter; returns the worst relative error.
pub fn gradient_error(
    model: &ShkcModel,
    s: &DMatrix<f64>,
    labels: &Labels,
    mask: &[usize],
    wd: f64,
) -> f64 {
    const H: f64 = 1e-5;
    const FLOOR: f64 = 1e-4;
    let (_, g) = model.loss_and_grads(s, labels, mask, wd).unwrap();
    let loss = |m: &ShkcModel| m.loss_and_grads(s, labels, mask, wd).unwrap().0;
    let rel = |a: f64, f: f64| (a - f).abs() / a.abs().max(f.abs()).max(FLOOR);
    let mut worst: f64 = 0.0;
    for k in 0..model.theta.len() {
        let (mut p, mut q) = (model.clone(), model.clone());
        p.theta[k] += H;
        q.theta[k] -= H;
        worst = worst.max(rel(g.theta[k], (loss(&p) - loss(&q)) / (2.0 * H)));
    }
    for k in 0..model.classifier.len() {
        let (mut p, mut q) = (model.clone(), model.clone());
        p.classifier[k] += H;
        q.classifier[k] -= H;
        worst = worst.max(rel(g.classifier[k], (loss(&p) - loss(&q)) / (2.0 * H)));
    }
    for k in 0..model.bias.len() {
        let (mut p, mut q) = (model.clone(), model.clone());
        p.bias[k] += H;
        q.bias[k] -= H;
        worst = worst.max(rel(g.bias[k], (loss(&p) - loss(&q)) / (2.0 * H)));
    }
    worst
}

/// Random model and data whose pre-activations stay clear of the ReLU kink.
pub fn kink_free_instance(seed: u64) -> (ShkcModel, DMatrix<f64>, Labels, Vec<usize>) {
    let mut r = rng(seed);
    loop {
        let d = r.random_range(1..=8);
        let hidden = r.random_range(1..=8);
        let classes = r.random_range(1..=8);
        let n = r.random_range(classes.max(2)..=12);
        let mut model = init_params(r.random(), d, hidden, classes).unwrap();
        model.bias = nalgebra::DVector::from_fn(classes, |_, _| r.random_range(-0.5..0.5));
        let s = random_matrix(&mut r, n, d, 1.0);
        // a scalar head is a binary classifier
        let labels = random_labels(&mut r, n, classes.max(2));
        let pre = &s * &model.theta;
        if pre.iter().all(|z| z.abs() > 1e-3) {
            let mut mask: Vec<usize> = (0..n).filter(|_| r.random_bool(0.7)).collect();
            if mask.is_empty() {
                mask.push(0);
            }
            return (model, s, labels, mask);
        }
    }
}
