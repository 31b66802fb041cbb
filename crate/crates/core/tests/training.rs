mod common;

use common::*;
use hyperdiffuse::analysis::{verify_lemma_bounds, LemmaInputs};
use hyperdiffuse::model::{init_params, train_on_diffused};
use hyperdiffuse::synthetic::{planted_partition, PlantedConfig, PlantedInstance};
use hyperdiffuse::{
    build_transition, prop1_bound, train, DiffusionOperator, DiffusionParams, FeatureMatrix,
    Labels, Optimizer, RhoFunction, TrainConfig,
};
use nalgebra::DMatrix;

fn config(steps: usize) -> TrainConfig {
    TrainConfig {
        diffusion: DiffusionParams {
            alpha: 1.0,
            beta: 1.0,
            steps,
        },
        ..TrainConfig::default()
    }
}

fn diffused(inst: &PlantedInstance, steps: usize) -> FeatureMatrix {
    let t = build_transition(&inst.hypergraph, RhoFunction::constant(), true).unwrap();
    DiffusionOperator::new(
        &t,
        DiffusionParams {
            alpha: 1.0,
            beta: 1.0,
            steps,
        },
    )
    .unwrap()
    .apply_diffusion(&inst.features)
    .unwrap()
}

/// Nearest class mean on `S` from the training vertices only.
fn linear_probe_accuracy(
    s: &DMatrix<f64>,
    labels: &Labels,
    train: &[usize],
    test: &[usize],
) -> f64 {
    let c = labels.num_classes();
    let mut means = DMatrix::zeros(c, s.ncols());
    let mut counts = vec![0.0; c];
    for &v in train {
        let y = labels.get(v).unwrap();
        let mut row = means.row_mut(y);
        row += s.row(v);
        counts[y] += 1.0;
    }
    for (y, n) in counts.iter().enumerate() {
        means.row_mut(y).scale_mut(1.0 / n);
    }
    let hits = test
        .iter()
        .filter(|&&v| {
            let pred = (0..c)
                .min_by(|&a, &b| {
                    let da = (s.row(v) - means.row(a)).norm();
                    let db = (s.row(v) - means.row(b)).norm();
                    da.total_cmp(&db)
                })
                .unwrap();
            Some(pred) == labels.get(v)
        })
        .count();
    hits as f64 / test.len() as f64
}

#[test]
fn planted_signal_is_linearly_separable_after_diffusion() {
    let inst = planted_partition(&PlantedConfig::default()).unwrap();
    let s = diffused(&inst, 4);
    let acc = linear_probe_accuracy(
        s.matrix(),
        &inst.labels,
        &inst.split.train,
        &inst.split.test,
    );
    assert!(acc >= 0.95, "probe accuracy {acc}");
}

#[test]
fn planted_instance_is_learned_at_shallow_and_deep_diffusion() {
    let inst = planted_partition(&PlantedConfig::default()).unwrap();
    let shallow = train(
        &inst.hypergraph,
        &inst.features,
        &inst.labels,
        &inst.split,
        &config(4),
    )
    .unwrap();
    let deep = train(
        &inst.hypergraph,
        &inst.features,
        &inst.labels,
        &inst.split,
        &config(32),
    )
    .unwrap();
    assert!(
        shallow.test_accuracy >= 0.95,
        "t=4: {}",
        shallow.test_accuracy
    );
    assert!((deep.test_accuracy - shallow.test_accuracy).abs() <= 0.02);
    assert!(shallow.best_epoch >= 1 && shallow.best_epoch <= shallow.epochs_run);
    assert_eq!(shallow.history.len(), shallow.epochs_run);
}

#[test]
fn small_learning_rate_still_lowers_loss() {
    let inst = planted_partition(&PlantedConfig::default()).unwrap();
    let cfg = TrainConfig {
        learning_rate: 1e-3,
        weight_decay: 0.0,
        epochs: 50,
        patience: 50,
        ..config(4)
    };
    let s = diffused(&inst, 4);
    let res = train_on_diffused(s.matrix(), &inst.labels, &inst.split, &cfg).unwrap();
    let initial = res
        .initial_model
        .loss_and_grads(s.matrix(), &inst.labels, &inst.split.train, 0.0)
        .unwrap()
        .0;
    let last = res.history.last().unwrap();
    assert_eq!(res.epochs_run, 50);
    assert!(
        last.train_loss < initial,
        "{} !< {initial}",
        last.train_loss
    );
}

#[test]
fn training_is_deterministic() {
    let inst = planted_partition(&PlantedConfig::default()).unwrap();
    let a = train(
        &inst.hypergraph,
        &inst.features,
        &inst.labels,
        &inst.split,
        &config(2),
    )
    .unwrap();
    let b = train(
        &inst.hypergraph,
        &inst.features,
        &inst.labels,
        &inst.split,
        &config(2),
    )
    .unwrap();
    assert_eq!(a.model, b.model);
    assert_eq!(a.best_epoch, b.best_epoch);
}

#[test]
fn masked_loss_is_invariant_under_vertex_relabeling() {
    let mut r = rng(12);
    let n = 30;
    let s = random_matrix(&mut r, n, 5, 1.0);
    let labels = random_labels(&mut r, n, 3);
    let mask: Vec<usize> = (0..n).step_by(3).collect();
    let model = init_params(4, 5, 7, 3).unwrap();
    let perm: Vec<usize> = (0..n).map(|v| (v * 7 + 3) % n).collect();
    let mut s_p = DMatrix::zeros(n, 5);
    let mut y_p = vec![0i64; n];
    for (v, &p) in perm.iter().enumerate() {
        s_p.set_row(p, &s.row(v));
        y_p[p] = labels.as_slice()[v];
    }
    let labels_p = Labels::new(y_p).unwrap();
    let mask_p: Vec<usize> = mask.iter().map(|&v| perm[v]).collect();
    let (a, _) = model.loss_and_grads(&s, &labels, &mask, 1e-3).unwrap();
    let (b, _) = model
        .loss_and_grads(&s_p, &labels_p, &mask_p, 1e-3)
        .unwrap();
    assert!((a - b).abs() <= 1e-10);
    let h = model.forward(&s).unwrap().hidden;
    let h_p = model.forward(&s_p).unwrap().hidden;
    for (v, &p) in perm.iter().enumerate() {
        assert_eq!(h.row(v), h_p.row(p));
    }
}

#[test]
fn lemma_trivial_cases_and_planted_random_parameters() {
    let inst = planted_partition(&PlantedConfig::default()).unwrap();
    let rho = RhoFunction::constant();
    let params = DiffusionParams {
        alpha: 0.9,
        beta: 0.95,
        steps: 8,
    };
    let t = build_transition(&inst.hypergraph, rho, true).unwrap();
    let s = DiffusionOperator::new(&t, params)
        .unwrap()
        .apply_diffusion(&inst.features)
        .unwrap();
    let d_t = prop1_bound(&inst.hypergraph, rho);
    let check = |model: &hyperdiffuse::ShkcModel, alternate: &hyperdiffuse::ShkcModel| {
        verify_lemma_bounds(&LemmaInputs {
            features: &inst.features,
            diffused: s.matrix(),
            params,
            d_t,
            model,
            alternate,
            labels: &inst.labels,
            mask: &inst.split.train,
        })
        .unwrap()
    };

    let mut zero = init_params(0, 8, 16, 2).unwrap();
    zero.theta.fill(0.0);
    let report = check(&zero, &zero);
    assert_eq!(report.h_max, 0.0);
    assert_eq!(report.delta_h_max, 0.0);
    assert!(report.all_within());

    for seed in 0..20 {
        let model = init_params(seed, 8, 16, 2).unwrap();
        let alternate = init_params(seed + 100, 8, 16, 2).unwrap();
        let same = check(&model, &model);
        assert_eq!(same.delta_h_max, 0.0);
        let report = check(&model, &alternate);
        assert!(report.all_within(), "seed {seed}: {:?}", report.violations);
        assert!(report.h_max <= report.h_max_bound);
    }
}

#[test]
fn config_defaults_follow_the_published_protocol() {
    let cfg = TrainConfig::default();
    assert_eq!((cfg.epochs, cfg.patience, cfg.hidden), (1000, 100, 128));
    assert_eq!(cfg.validation_fraction, 0.2);
    assert_eq!(cfg.optimizer, Optimizer::default());
}
