//! Single-layer simple hypergraph kernel convolution with a linear
//! classifier head, trained full-batch on precomputed diffused features.
//!
//! Because `S = A(t) X` is computed once, the trainable part is a two-layer
//! perceptron `softmax(ψ(S Θ) W + b)` and gradients never touch `T̃`.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diffusion::{DiffusionOperator, DiffusionParams};
use crate::error::{Error, Result};
use crate::hypergraph::{FeatureMatrix, Hypergraph, Labels};
use crate::transition::{build_transition, RhoFunction};

/// Model parameters: channel mixing `Θ` (`d × M`), classifier `W` (`M × C`)
/// and bias `b` (`C`). With `C = 1` the head is a sigmoid for binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ShkcModel {
    pub theta: DMatrix<f64>,
    pub classifier: DMatrix<f64>,
    pub bias: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    /// `Z = S Θ`
    pub pre_activation: DMatrix<f64>,
    /// `H = ψ(Z)`
    pub hidden: DMatrix<f64>,
    pub logits: DMatrix<f64>,
    pub probs: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub theta: DMatrix<f64>,
    pub classifier: DMatrix<f64>,
    pub bias: DVector<f64>,
}

fn relu(x: f64) -> f64 {
    x.max(0.0)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Glorot-uniform weights in `±√(6 / (fan_in + fan_out))`, zero bias.
pub fn init_params(seed: u64, d: usize, hidden: usize, classes: usize) -> Result<ShkcModel> {
    if d == 0 || hidden == 0 || classes == 0 {
        return Err(Error::InvalidParameter(format!(
            "model dimensions must be positive (d = {d}, hidden = {hidden}, classes = {classes})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut glorot = |rows: usize, cols: usize| {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-limit..=limit))
    };
    let theta = glorot(d, hidden);
    let classifier = glorot(hidden, classes);
    Ok(ShkcModel {
        theta,
        classifier,
        bias: DVector::zeros(classes),
    })
}

impl ShkcModel {
    pub fn input_dim(&self) -> usize {
        self.theta.nrows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.theta.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.classifier.ncols()
    }

    pub fn check_shapes(&self) -> Result<()> {
        if self.classifier.nrows() != self.theta.ncols()
            || self.bias.len() != self.classifier.ncols()
        {
            return Err(Error::DimensionMismatch(format!(
                "theta {}x{}, classifier {}x{}, bias {}",
                self.theta.nrows(),
                self.theta.ncols(),
                self.classifier.nrows(),
                self.classifier.ncols(),
                self.bias.len()
            )));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.theta
            .iter()
            .chain(self.classifier.iter())
            .chain(self.bias.iter())
            .all(|v| v.is_finite())
    }

    pub fn forward(&self, s: &DMatrix<f64>) -> Result<Forward> {
        self.check_shapes()?;
        if s.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "features have {} columns, theta has {} rows",
                s.ncols(),
                self.input_dim()
            )));
        }
        let pre_activation = s * &self.theta;
        let hidden = pre_activation.map(relu);
        let mut logits = &hidden * &self.classifier;
        for mut row in logits.row_iter_mut() {
            row += self.bias.transpose();
        }
        let probs = if self.num_classes() == 1 {
            logits.map(sigmoid)
        } else {
            let mut p = logits.clone();
            for mut row in p.row_iter_mut() {
                let max = row.max();
                row.apply(|v| *v = (*v - max).exp());
                let total = row.sum();
                row /= total;
            }
            p
        };
        Ok(Forward {
            pre_activation,
            hidden,
            logits,
            probs,
        })
    }

    /// Mean cross-entropy over the vertices in `mask` plus
    /// `½ λ (‖Θ‖² + ‖W‖²)`, and its analytic gradients.
    pub fn loss_and_grads(
        &self,
        s: &DMatrix<f64>,
        labels: &Labels,
        mask: &[usize],
        weight_decay: f64,
    ) -> Result<(f64, Gradients)> {
        let (rows, targets) = self.masked_rows(s, labels, mask)?;
        let fw = self.forward(&rows)?;
        let m = mask.len() as f64;
        let c = self.num_classes();

        let mut data_loss = 0.0;
        let mut dlogits = fw.probs.clone();
        for (r, &y) in targets.iter().enumerate() {
            if c == 1 {
                let z = fw.logits[(r, 0)];
                // softplus(z) − y z, written to stay finite for large |z|
                data_loss += z.max(0.0) + (-z.abs()).exp().ln_1p() - y as f64 * z;
                dlogits[(r, 0)] -= y as f64;
            } else {
                let row = fw.logits.row(r);
                let max = row.max();
                let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                data_loss += lse - fw.logits[(r, y)];
                dlogits[(r, y)] -= 1.0;
            }
        }
        data_loss /= m;
        dlogits /= m;

        let reg = 0.5 * weight_decay * (self.theta.norm_squared() + self.classifier.norm_squared());

        let grad_classifier = fw.hidden.transpose() * &dlogits + &self.classifier * weight_decay;
        let grad_bias = dlogits.row_sum().transpose();
        let mut dhidden = &dlogits * self.classifier.transpose();
        dhidden.zip_apply(&fw.pre_activation, |g, z| {
            if z <= 0.0 {
                *g = 0.0;
            }
        });
        let grad_theta = rows.transpose() * dhidden + &self.theta * weight_decay;

        Ok((
            data_loss + reg,
            Gradients {
                theta: grad_theta,
                classifier: grad_classifier,
                bias: grad_bias,
            },
        ))
    }

    /// Loss without weight decay and accuracy over `mask`.
    pub fn evaluate(
        &self,
        s: &DMatrix<f64>,
        labels: &Labels,
        mask: &[usize],
    ) -> Result<(f64, f64)> {
        let (loss, _) = self.loss_and_grads(s, labels, mask, 0.0)?;
        Ok((loss, self.accuracy(s, labels, mask)?))
    }

    pub fn predict(&self, s: &DMatrix<f64>) -> Result<Vec<usize>> {
        let fw = self.forward(s)?;
        Ok(fw
            .probs
            .row_iter()
            .map(|row| {
                if row.len() == 1 {
                    usize::from(row[0] >= 0.5)
                } else {
                    // lowest index wins ties
                    (1..row.len()).fold(0, |best, j| if row[j] > row[best] { j } else { best })
                }
            })
            .collect())
    }

    pub fn accuracy(&self, s: &DMatrix<f64>, labels: &Labels, mask: &[usize]) -> Result<f64> {
        let (rows, targets) = self.masked_rows(s, labels, mask)?;
        let pred = self.predict(&rows)?;
        let hits = pred.iter().zip(&targets).filter(|(p, y)| p == y).count();
        Ok(hits as f64 / mask.len() as f64)
    }

    fn masked_rows(
        &self,
        s: &DMatrix<f64>,
        labels: &Labels,
        mask: &[usize],
    ) -> Result<(DMatrix<f64>, Vec<usize>)> {
        if mask.is_empty() {
            return Err(Error::EmptyMask);
        }
        if labels.len() != s.nrows() {
            return Err(Error::VertexCountMismatch {
                expected: s.nrows(),
                found: labels.len(),
            });
        }
        let classes = self.num_classes().max(2);
        let mut targets = Vec::with_capacity(mask.len());
        for &v in mask {
            if v >= s.nrows() {
                return Err(Error::VertexOutOfRange {
                    index: v,
                    num_vertices: s.nrows(),
                });
            }
            let y = labels.get(v).ok_or_else(|| {
                Error::InvalidParameter(format!("vertex {v} in mask is unlabeled"))
            })?;
            if y >= classes {
                return Err(Error::InvalidParameter(format!(
                    "label {y} of vertex {v} exceeds the model's {classes} classes"
                )));
            }
            targets.push(y);
        }
        Ok((s.select_rows(mask), targets))
    }

    fn step(&mut self, grads: &Gradients, opt: &mut OptimizerState) {
        opt.update(0, self.theta.as_mut_slice(), grads.theta.as_slice());
        opt.update(
            1,
            self.classifier.as_mut_slice(),
            grads.classifier.as_slice(),
        );
        opt.update(2, self.bias.as_mut_slice(), grads.bias.as_slice());
        opt.tick();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Optimizer {
    Adam { beta1: f64, beta2: f64, eps: f64 },
    Sgd,
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

struct OptimizerState {
    kind: Optimizer,
    lr: f64,
    step: i32,
    first: [Vec<f64>; 3],
    second: [Vec<f64>; 3],
}

impl OptimizerState {
    fn new(kind: Optimizer, lr: f64, model: &ShkcModel) -> Self {
        let sizes = [model.theta.len(), model.classifier.len(), model.bias.len()];
        Self {
            kind,
            lr,
            step: 1,
            first: sizes.map(|n| vec![0.0; n]),
            second: sizes.map(|n| vec![0.0; n]),
        }
    }

    fn update(&mut self, slot: usize, params: &mut [f64], grads: &[f64]) {
        match self.kind {
            Optimizer::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    *p -= self.lr * g;
                }
            }
            Optimizer::Adam { beta1, beta2, eps } => {
                let c1 = 1.0 - beta1.powi(self.step);
                let c2 = 1.0 - beta2.powi(self.step);
                let (m, v) = (&mut self.first[slot], &mut self.second[slot]);
                for i in 0..params.len() {
                    let g = grads[i];
                    m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                    v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                    params[i] -= self.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
                }
            }
        }
    }

    fn tick(&mut self) {
        self.step += 1;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub hidden: usize,
    pub epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub diffusion: DiffusionParams,
    pub rho: RhoFunction,
    pub optimizer: Optimizer,
    /// Share of the training split held out for early stopping.
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            weight_decay: 5e-4,
            hidden: 128,
            epochs: 1000,
            patience: 100,
            seed: 0,
            diffusion: DiffusionParams {
                alpha: 1.0,
                beta: 1.0,
                steps: 2,
            },
            rho: RhoFunction::constant(),
            optimizer: Optimizer::default(),
            validation_fraction: 0.2,
        }
    }
}

impl TrainConfig {
    pub fn check(&self) -> Result<()> {
        self.diffusion.check()?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.weight_decay.is_nan() || self.weight_decay < 0.0 {
            return Err(Error::InvalidParameter("weight decay must be >= 0".into()));
        }
        if self.patience > self.epochs {
            return Err(Error::InvalidParameter(format!(
                "patience {} exceeds epochs {}",
                self.patience, self.epochs
            )));
        }
        if self.hidden == 0 {
            return Err(Error::InvalidParameter(
                "hidden dimension must be >= 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::InvalidParameter(
                "validation fraction must lie in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Train/test partition of the labeled vertices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Every labeled vertex not listed in `train` becomes a test vertex.
    pub fn from_train(train: Vec<usize>, labels: &Labels) -> Self {
        let mut in_train = vec![false; labels.len()];
        for &v in &train {
            if v < in_train.len() {
                in_train[v] = true;
            }
        }
        let test = labels.labeled().filter(|&v| !in_train[v]).collect();
        Self { train, test }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    /// Snapshot with the lowest validation loss.
    pub model: ShkcModel,
    pub initial_model: ShkcModel,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub history: Vec<EpochRecord>,
    pub test_accuracy: f64,
    pub wall_time_secs: f64,
}

/// Builds the renormalized transition matrix, diffuses the features and
/// trains on them.
pub fn train(
    h: &Hypergraph,
    x: &FeatureMatrix,
    labels: &Labels,
    split: &Split,
    cfg: &TrainConfig,
) -> Result<TrainResult> {
    cfg.check()?;
    x.check_rows(h.num_vertices())?;
    let t = build_transition(h, cfg.rho, true)?;
    let s = DiffusionOperator::new(&t, cfg.diffusion)?.apply_diffusion(x)?;
    train_on_diffused(s.matrix(), labels, split, cfg)
}

/// Seeded hold-out of `fraction` of the training vertices (at least one
/// when the split has two or more vertices).
pub fn carve_validation(train: &[usize], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut shuffled = train.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x7a11_da7e));
    let mut n_val = (fraction * train.len() as f64).round() as usize;
    if fraction > 0.0 && n_val == 0 && train.len() >= 2 {
        n_val = 1;
    }
    let val = shuffled.split_off(shuffled.len() - n_val);
    (shuffled, val)
}

/// Full-batch training on precomputed diffused features `S`, with
/// patience-based early stopping on the validation loss.
pub fn train_on_diffused(
    s: &DMatrix<f64>,
    labels: &Labels,
    split: &Split,
    cfg: &TrainConfig,
) -> Result<TrainResult> {
    cfg.check()?;
    if split.train.is_empty() {
        return Err(Error::EmptyMask);
    }
    let classes = labels.num_classes();
    if classes < 2 {
        return Err(Error::InvalidParameter(
            "training needs at least two classes".into(),
        ));
    }
    let mut present = vec![false; classes];
    for &v in &split.train {
        if v >= labels.len() {
            return Err(Error::VertexOutOfRange {
                index: v,
                num_vertices: labels.len(),
            });
        }
        match labels.get(v) {
            Some(y) => present[y] = true,
            None => {
                return Err(Error::InvalidParameter(format!(
                    "training vertex {v} is unlabeled"
                )))
            }
        }
    }
    if let Some(missing) = present.iter().position(|p| !p) {
        return Err(Error::InvalidParameter(format!(
            "class {missing} has no labeled vertex in the training split"
        )));
    }

    let started = Instant::now();
    let (fit, val) = carve_validation(&split.train, cfg.validation_fraction, cfg.seed);
    let monitor: &[usize] = if val.is_empty() { &fit } else { &val };

    let initial_model = init_params(cfg.seed, s.ncols(), cfg.hidden, classes)?;
    let mut model = initial_model.clone();
    let mut opt = OptimizerState::new(cfg.optimizer, cfg.learning_rate, &model);
    let mut best = (f64::INFINITY, model.clone(), 0usize);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut since_best = 0;

    for epoch in 1..=cfg.epochs {
        let epoch_start = Instant::now();
        let (train_loss, grads) = model.loss_and_grads(s, labels, &fit, cfg.weight_decay)?;
        if !train_loss.is_finite() {
            return Err(Error::NonFinite(format!("training loss at epoch {epoch}")));
        }
        model.step(&grads, &mut opt);
        if !model.is_finite() {
            return Err(Error::NonFinite(format!("parameters at epoch {epoch}")));
        }
        let train_accuracy = model.accuracy(s, labels, &fit)?;
        let (val_loss, val_accuracy) = model.evaluate(s, labels, monitor)?;
        history.push(EpochRecord {
            epoch,
            train_loss,
            train_accuracy,
            val_loss,
            val_accuracy,
            seconds: epoch_start.elapsed().as_secs_f64(),
        });
        if val_loss < best.0 {
            best = (val_loss, model.clone(), epoch);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }

    let (_, model, best_epoch) = best;
    let test_accuracy = if split.test.is_empty() {
        f64::NAN
    } else {
        model.accuracy(s, labels, &split.test)?
    };
    Ok(TrainResult {
        model,
        initial_model,
        best_epoch,
        epochs_run: history.len(),
        history,
        test_accuracy,
        wall_time_secs: started.elapsed().as_secs_f64(),
    })
}
