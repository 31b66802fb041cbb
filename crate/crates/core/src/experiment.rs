//! Experiment orchestration: JSON configs, hyper-parameter grids, repeated
//! train/test splits, depth sweeps and stability reports.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{
    head_lipschitz, spectral_norm, spectrum_histogram, stability_report, verify_lemma_bounds,
    LemmaInputs, SpectrumBin, StabilityReport, TheoryConstants,
};
use crate::diffusion::{DiffusionOperator, DiffusionParams, KernelMatrix, DEFAULT_DENSE_CAP};
use crate::error::{Error, Result};
use crate::hypergraph::{FeatureMatrix, Hypergraph, Labels};
use crate::io;
use crate::model::{init_params, train_on_diffused, Optimizer, ShkcModel, Split, TrainConfig};
use crate::transition::{build_transition, prop1_bound, RhoFunction, TransitionMatrix};

fn default_sigma() -> Vec<f64> {
    vec![-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0]
}
fn default_alpha() -> Vec<f64> {
    vec![1.0, 0.97, 0.95, 0.9, 0.85, 0.8, 0.75, 0.7, 0.65, 0.6]
}
fn default_beta() -> Vec<f64> {
    vec![1.0, 0.95, 0.9, 0.85, 0.8]
}
fn default_steps() -> Vec<usize> {
    vec![2, 4, 6, 8, 16, 32, 64]
}
fn default_learning_rate() -> Vec<f64> {
    vec![0.001, 0.005, 0.01]
}
fn default_weight_decay() -> Vec<f64> {
    vec![1e-3, 1e-4, 5e-4, 1e-5]
}
fn default_hidden() -> Vec<usize> {
    vec![128]
}
fn default_epochs() -> usize {
    1000
}
fn default_patience() -> usize {
    100
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_validation_fraction() -> f64 {
    0.2
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}
fn default_delta() -> f64 {
    0.05
}
fn default_dense_cap() -> usize {
    DEFAULT_DENSE_CAP
}

/// Experiment description. Grid defaults follow the published search
/// ranges; relative paths resolve against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub hypergraph: PathBuf,
    pub features: PathBuf,
    #[serde(default)]
    pub labels: Option<PathBuf>,
    #[serde(default)]
    pub splits_dir: Option<PathBuf>,
    #[serde(default = "default_sigma")]
    pub sigma: Vec<f64>,
    #[serde(default = "default_alpha")]
    pub alpha: Vec<f64>,
    #[serde(default = "default_beta")]
    pub beta: Vec<f64>,
    #[serde(default = "default_steps")]
    pub steps: Vec<usize>,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: Vec<f64>,
    #[serde(default = "default_weight_decay")]
    pub weight_decay: Vec<f64>,
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub optimizer: Optimizer,
    #[serde(default = "default_validation_fraction")]
    pub validation_fraction: f64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Confidence parameter of the gap bound in stability reports.
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_dense_cap")]
    pub dense_cap: usize,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.hypergraph);
        fix(&mut self.features);
        if let Some(p) = self.labels.as_mut() {
            fix(p);
        }
        if let Some(p) = self.splits_dir.as_mut() {
            fix(p);
        }
        fix(&mut self.output_dir);
    }

    pub fn check(&self) -> Result<()> {
        let grids = [
            ("sigma", self.sigma.len()),
            ("alpha", self.alpha.len()),
            ("beta", self.beta.len()),
            ("steps", self.steps.len()),
            ("learning_rate", self.learning_rate.len()),
            ("weight_decay", self.weight_decay.len()),
            ("hidden", self.hidden.len()),
            ("seeds", self.seeds.len()),
        ];
        if let Some((name, _)) = grids.iter().find(|(_, len)| *len == 0) {
            return Err(Error::Config(format!("grid `{name}` is empty")));
        }
        for &a in &self.alpha {
            for &b in &self.beta {
                for &t in &self.steps {
                    DiffusionParams::new(a, b, t).map_err(|e| Error::Config(e.to_string()))?;
                }
            }
        }
        if self.patience > self.epochs {
            return Err(Error::Config(format!(
                "patience {} exceeds epochs {}",
                self.patience, self.epochs
            )));
        }
        if self
            .learning_rate
            .iter()
            .any(|&lr| !(lr >= 0.0 && lr.is_finite()))
        {
            return Err(Error::Config(
                "learning rates must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Cartesian product of all grids, in a fixed order.
    pub fn grid(&self) -> Vec<GridPoint> {
        let mut out = Vec::new();
        for &sigma in &self.sigma {
            for &alpha in &self.alpha {
                for &beta in &self.beta {
                    for &steps in &self.steps {
                        for &learning_rate in &self.learning_rate {
                            for &weight_decay in &self.weight_decay {
                                for &hidden in &self.hidden {
                                    for &seed in &self.seeds {
                                        out.push(GridPoint {
                                            sigma,
                                            alpha,
                                            beta,
                                            steps,
                                            learning_rate,
                                            weight_decay,
                                            hidden,
                                            seed,
                                        });
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// First value of every grid.
    pub fn base_point(&self) -> GridPoint {
        GridPoint {
            sigma: self.sigma[0],
            alpha: self.alpha[0],
            beta: self.beta[0],
            steps: self.steps[0],
            learning_rate: self.learning_rate[0],
            weight_decay: self.weight_decay[0],
            hidden: self.hidden[0],
            seed: self.seeds[0],
        }
    }

    pub fn train_config(&self, p: &GridPoint) -> TrainConfig {
        TrainConfig {
            learning_rate: p.learning_rate,
            weight_decay: p.weight_decay,
            hidden: p.hidden,
            epochs: self.epochs,
            patience: self.patience,
            seed: p.seed,
            diffusion: p.diffusion(),
            rho: RhoFunction::new(p.sigma),
            optimizer: self.optimizer,
            validation_fraction: self.validation_fraction,
        }
    }

    /// Short stable identifier of a grid point together with the shared
    /// training settings.
    pub fn config_hash(&self, p: &GridPoint) -> String {
        #[derive(Serialize)]
        struct Key<'a> {
            point: &'a GridPoint,
            epochs: usize,
            patience: usize,
            optimizer: Optimizer,
            validation_fraction: f64,
        }
        let key = Key {
            point: p,
            epochs: self.epochs,
            patience: self.patience,
            optimizer: self.optimizer,
            validation_fraction: self.validation_fraction,
        };
        let digest = Sha256::digest(serde_json::to_vec(&key).expect("key serializes"));
        digest[..8].iter().fold(String::new(), |mut s, b| {
            write!(s, "{b:02x}").unwrap();
            s
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub sigma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub steps: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub hidden: usize,
    pub seed: u64,
}

impl GridPoint {
    pub fn diffusion(&self) -> DiffusionParams {
        DiffusionParams {
            alpha: self.alpha,
            beta: self.beta,
            steps: self.steps,
        }
    }
}

/// Hypergraph, features and (optionally) labels and splits of one experiment.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub hypergraph: Hypergraph,
    pub features: FeatureMatrix,
    pub labels: Option<Labels>,
    pub splits: Vec<(String, Split)>,
}

impl Dataset {
    pub fn load(cfg: &ExperimentConfig) -> Result<Self> {
        let hypergraph = io::read_hypergraph(&cfg.hypergraph)?;
        let features = io::read_features(&cfg.features)?;
        features.check_rows(hypergraph.num_vertices())?;
        let labels = cfg
            .labels
            .as_ref()
            .map(|p| io::read_labels(p, hypergraph.num_vertices()))
            .transpose()?;
        let splits = match (&labels, &cfg.splits_dir) {
            (Some(l), Some(dir)) => io::read_splits_dir(dir, l)?,
            _ => Vec::new(),
        };
        Ok(Self {
            hypergraph,
            features,
            labels,
            splits,
        })
    }

    fn labels_and_splits(&self) -> Result<(&Labels, &[(String, Split)])> {
        match &self.labels {
            Some(l) if !self.splits.is_empty() => Ok((l, &self.splits)),
            _ => Err(Error::Config(
                "this command needs `labels` and `splits_dir` in the config".into(),
            )),
        }
    }

    pub fn transition(&self, sigma: f64) -> Result<TransitionMatrix> {
        build_transition(&self.hypergraph, RhoFunction::new(sigma), true)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitOutcome {
    pub split: String,
    pub test_accuracy: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub mean_epoch_seconds: f64,
}

/// Result of one grid point over all splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub point: GridPoint,
    pub epochs: usize,
    pub patience: usize,
    pub splits: Vec<SplitOutcome>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub provenance: String,
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl RunRecord {
    pub fn accuracies(&self) -> Vec<f64> {
        self.splits.iter().map(|s| s.test_accuracy).collect()
    }

    /// Recomputes mean and deviation from the per-split values.
    pub fn check_consistency(&self) -> Result<()> {
        let (mean, std) = mean_std(&self.accuracies());
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(1.0);
        if !close(mean, self.mean_accuracy) || !close(std, self.std_accuracy) {
            return Err(Error::Config(format!(
                "run record {} is inconsistent: stored {}±{}, recomputed {}±{}",
                self.config_hash, self.mean_accuracy, self.std_accuracy, mean, std
            )));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let rec: Self =
            serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
        rec.check_consistency()?;
        Ok(rec)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("record serializes");
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

fn provenance(hash: &str) -> String {
    format!("hyperdiffuse-{}+{hash}", env!("CARGO_PKG_VERSION"))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

struct Job<'a> {
    point: GridPoint,
    split_name: &'a str,
    split: &'a Split,
}

/// Trains every grid point on every split. Writes `runs/<hash>.json`,
/// `epochs/<hash>_<split>.csv`, `checkpoints/<hash>_<split>.ckpt` and a
/// `summary.csv` under the output directory.
pub fn run_train(cfg: &ExperimentConfig, data: &Dataset) -> Result<Vec<RunRecord>> {
    let (labels, splits) = data.labels_and_splits()?;
    let out = &cfg.output_dir;
    for sub in ["runs", "epochs", "checkpoints"] {
        create_dir(&out.join(sub))?;
    }

    let grid = cfg.grid();
    // one diffusion per (σ, α, β, t); all jobs sharing it run together
    let mut keys: Vec<(f64, DiffusionParams)> = Vec::new();
    for p in &grid {
        let key = (p.sigma, p.diffusion());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }

    let mut records = Vec::new();
    for (sigma, diffusion) in keys {
        let t = data.transition(sigma)?;
        let s = DiffusionOperator::new(&t, diffusion)?.apply_diffusion(&data.features)?;
        let points: Vec<GridPoint> = grid
            .iter()
            .copied()
            .filter(|p| p.sigma == sigma && p.diffusion() == diffusion)
            .collect();
        let jobs: Vec<Job<'_>> = points
            .iter()
            .flat_map(|&point| {
                splits.iter().map(move |(name, split)| Job {
                    point,
                    split_name: name,
                    split,
                })
            })
            .collect();
        let outcomes: Vec<(GridPoint, SplitOutcome)> = jobs
            .par_iter()
            .map(|job| {
                let tc = cfg.train_config(&job.point);
                let res = train_on_diffused(s.matrix(), labels, job.split, &tc)?;
                let hash = cfg.config_hash(&job.point);
                io::write_epoch_csv(
                    out.join("epochs")
                        .join(format!("{hash}_{}.csv", job.split_name)),
                    &res.history,
                )?;
                io::write_checkpoint(
                    out.join("checkpoints")
                        .join(format!("{hash}_{}.ckpt", job.split_name)),
                    &res.model,
                    job.point.seed,
                    &hash,
                )?;
                let mean_epoch_seconds = res.history.iter().map(|r| r.seconds).sum::<f64>()
                    / res.history.len().max(1) as f64;
                Ok((
                    job.point,
                    SplitOutcome {
                        split: job.split_name.to_string(),
                        test_accuracy: res.test_accuracy,
                        best_epoch: res.best_epoch,
                        epochs_run: res.epochs_run,
                        mean_epoch_seconds,
                    },
                ))
            })
            .collect::<Result<_>>()?;

        for point in points {
            let hash = cfg.config_hash(&point);
            let split_outcomes: Vec<SplitOutcome> = outcomes
                .iter()
                .filter(|(p, _)| *p == point)
                .map(|(_, o)| o.clone())
                .collect();
            let accs: Vec<f64> = split_outcomes.iter().map(|o| o.test_accuracy).collect();
            let (mean_accuracy, std_accuracy) = mean_std(&accs);
            let record = RunRecord {
                provenance: provenance(&hash),
                config_hash: hash,
                point,
                epochs: cfg.epochs,
                patience: cfg.patience,
                splits: split_outcomes,
                mean_accuracy,
                std_accuracy,
            };
            let path = out
                .join("runs")
                .join(format!("{}.json", record.config_hash));
            record.save(&path)?;
            RunRecord::load(&path)?;
            records.push(record);
        }
    }

    let mut summary =
        String::from("config_hash,sigma,alpha,beta,steps,learning_rate,weight_decay,hidden,seed,mean_accuracy,std_accuracy\n");
    for r in &records {
        let p = &r.point;
        writeln!(
            summary,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.config_hash,
            p.sigma,
            p.alpha,
            p.beta,
            p.steps,
            p.learning_rate,
            p.weight_decay,
            p.hidden,
            p.seed,
            r.mean_accuracy,
            r.std_accuracy
        )
        .unwrap();
    }
    let path = out.join("summary.csv");
    fs::write(&path, summary).map_err(|e| Error::io(&path, e))?;
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthRow {
    pub steps: usize,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub accuracies: Vec<f64>,
}

/// Test accuracy against the number of diffusion steps, all other settings
/// fixed at the first grid value.
pub fn sweep_depth(
    cfg: &ExperimentConfig,
    data: &Dataset,
    steps: &[usize],
) -> Result<Vec<DepthRow>> {
    let (labels, splits) = data.labels_and_splits()?;
    if steps.is_empty() {
        return Err(Error::Config("depth list is empty".into()));
    }
    let base = cfg.base_point();
    let t = data.transition(base.sigma)?;
    steps
        .iter()
        .map(|&st| {
            let point = GridPoint { steps: st, ..base };
            let s =
                DiffusionOperator::new(&t, point.diffusion())?.apply_diffusion(&data.features)?;
            let tc = cfg.train_config(&point);
            let accuracies = splits
                .par_iter()
                .map(|(_, split)| {
                    Ok(train_on_diffused(s.matrix(), labels, split, &tc)?.test_accuracy)
                })
                .collect::<Result<Vec<f64>>>()?;
            let (mean_accuracy, std_accuracy) = mean_std(&accuracies);
            Ok(DepthRow {
                steps: st,
                mean_accuracy,
                std_accuracy,
                accuracies,
            })
        })
        .collect()
}

pub fn format_depth_csv(rows: &[DepthRow]) -> String {
    let mut out = String::from("steps,mean_accuracy,std_accuracy\n");
    for r in rows {
        writeln!(out, "{},{},{}", r.steps, r.mean_accuracy, r.std_accuracy).unwrap();
    }
    out
}

/// Stability report for the first grid point on the first split. With a
/// checkpoint the stored parameters are analysed; otherwise the model is
/// trained (or left at its initialization when the learning rate is 0).
pub fn stability(
    cfg: &ExperimentConfig,
    data: &Dataset,
    checkpoint: Option<&ShkcModel>,
) -> Result<StabilityReport> {
    let (labels, splits) = data.labels_and_splits()?;
    let split = &splits[0].1;
    let p = cfg.base_point();
    let rho = RhoFunction::new(p.sigma);
    let t = build_transition(&data.hypergraph, rho, true)?;
    let op = DiffusionOperator::new(&t, p.diffusion())?;
    let s = op.apply_diffusion(&data.features)?;
    let classes = labels.num_classes();

    let init = init_params(p.seed, data.features.num_cols(), p.hidden, classes)?;
    let (model, alternate, train_steps) = match checkpoint {
        Some(m) => (m.clone(), init, cfg.epochs),
        None if p.learning_rate > 0.0 => {
            let res = train_on_diffused(s.matrix(), labels, split, &cfg.train_config(&p))?;
            (res.model, res.initial_model, res.epochs_run)
        }
        None => (init.clone(), init, cfg.epochs),
    };

    let d_t = prop1_bound(&data.hypergraph, rho);
    let lemmas = verify_lemma_bounds(&LemmaInputs {
        features: &data.features,
        diffused: s.matrix(),
        params: p.diffusion(),
        d_t,
        model: &model,
        alternate: &alternate,
        labels,
        mask: &split.train,
    })?;
    let constants = TheoryConstants {
        c_x: data.features.max_row_norm(),
        c_theta: spectral_norm(&model.theta),
        d_t,
        kappa: head_lipschitz(model.num_classes()),
        eta: p.learning_rate,
        train_steps: train_steps.max(1),
        m: split.train.len().max(1),
        n: split.test.len().max(1),
        alpha: p.alpha,
        beta: p.beta,
        steps: p.steps,
    };
    stability_report(constants, cfg.delta, t.l1_norm(), lemmas)
}

/// Eigenvalue counts of the dense diffusion operator at the first grid point.
pub fn spectrum(
    cfg: &ExperimentConfig,
    data: &Dataset,
    thresholds: &[f64],
) -> Result<Vec<SpectrumBin>> {
    let p = cfg.base_point();
    let t = data.transition(p.sigma)?;
    let op = DiffusionOperator::new(&t, p.diffusion())?.with_dense_cap(cfg.dense_cap);
    spectrum_histogram(&op, thresholds)
}

pub fn format_spectrum_csv(bins: &[SpectrumBin]) -> String {
    let mut out = String::from("threshold,count\n");
    for b in bins {
        writeln!(out, "{},{}", b.threshold, b.count).unwrap();
    }
    out
}

/// Diffusion kernel at the first grid point, learnable when `theta` is given.
pub fn kernel(
    cfg: &ExperimentConfig,
    data: &Dataset,
    theta: Option<&nalgebra::DMatrix<f64>>,
) -> Result<KernelMatrix> {
    let p = cfg.base_point();
    let t = data.transition(p.sigma)?;
    DiffusionOperator::new(&t, p.diffusion())?
        .with_dense_cap(cfg.dense_cap)
        .kernel_matrix(&data.features, theta)
}
