mod common;

use common::*;
use hyperdiffuse::model::{init_params, train_on_diffused};
use hyperdiffuse::DiffusionParams;
use hyperdiffuse::{Labels, Optimizer, RhoFunction, Split, TrainConfig};
use nalgebra::DMatrix;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn analytic_gradients_match_finite_differences(seed in any::<u64>(), wd in prop_oneof![Just(0.0), 0.0f64..0.01]) {
        let (model, s, labels, mask) = kink_free_instance(seed);
        prop_assert!(gradient_error(&model, &s, &labels, &mask, wd) < 1e-5);
    }

    #[test]
    fn forward_is_row_equivariant(seed in any::<u64>()) {
        let (model, s, _, _) = kink_free_instance(seed);
        let n = s.nrows();
        let perm: Vec<usize> = (0..n).rev().collect();
        let permuted = DMatrix::from_fn(n, s.ncols(), |i, j| s[(perm[i], j)]);
        let a = model.forward(&s).unwrap().probs;
        let b = model.forward(&permuted).unwrap().probs;
        for i in 0..n {
            for c in 0..a.ncols() {
                prop_assert_eq!(b[(i, c)], a[(perm[i], c)]);
            }
        }
    }

    #[test]
    fn probabilities_are_distributions(seed in any::<u64>()) {
        let (model, s, _, _) = kink_free_instance(seed);
        let p = model.forward(&s).unwrap().probs;
        for row in p.row_iter() {
            prop_assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
            if row.len() > 1 {
                prop_assert!((row.sum() - 1.0).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn beta_zero_reduces_to_two_layer_perceptron() {
    // with β = 0 the diffused features are X itself, so the model is an MLP on X
    let mut r = rng(3);
    let x = random_features(&mut r, 20, 5);
    let h = random_hypergraph(&mut r, 20, 15);
    let t = hyperdiffuse::build_transition(&h, RhoFunction::constant(), true).unwrap();
    let op = hyperdiffuse::DiffusionOperator::new(
        &t,
        DiffusionParams {
            alpha: 0.7,
            beta: 0.0,
            steps: 4,
        },
    )
    .unwrap();
    let s = op.apply_diffusion(&x).unwrap();
    let model = init_params(11, 5, 6, 3).unwrap();
    let fw = model.forward(s.matrix()).unwrap();
    let hidden = (x.matrix() * &model.theta).map(|v| v.max(0.0));
    let mut logits = &hidden * &model.classifier;
    for mut row in logits.row_iter_mut() {
        row += model.bias.transpose();
    }
    assert_eq!(fw.hidden, hidden);
    assert!(max_abs_diff(&fw.logits, &logits) == 0.0);
}

#[test]
fn training_reduces_loss() {
    let mut r = rng(5);
    let n = 40;
    let x = random_features(&mut r, n, 6);
    // labels follow the sign of the first feature, so they are learnable
    let labels = Labels::new(
        (0..n)
            .map(|i| i64::from(x.matrix()[(i, 0)] > 0.0))
            .collect(),
    )
    .unwrap();
    let split = Split::from_train((0..30).collect(), &labels);
    let cfg = TrainConfig {
        learning_rate: 0.01,
        weight_decay: 0.0,
        hidden: 16,
        epochs: 200,
        patience: 200,
        seed: 1,
        diffusion: DiffusionParams {
            alpha: 1.0,
            beta: 0.0,
            steps: 1,
        },
        rho: RhoFunction::constant(),
        optimizer: Optimizer::default(),
        validation_fraction: 0.0,
    };
    let res = train_on_diffused(x.matrix(), &labels, &split, &cfg).unwrap();
    let first = res.history.first().unwrap().train_loss;
    let last = res.history.last().unwrap().train_loss;
    assert!(last < 0.5 * first, "loss {first} -> {last}");
    let again = train_on_diffused(x.matrix(), &labels, &split, &cfg).unwrap();
    assert_eq!(res.model, again.model);
    assert_eq!(res.test_accuracy, again.test_accuracy);
}
