mod common;

use common::*;
use hyperdiffuse::{
    build_transition, original_kernel, DiffusionOperator, DiffusionParams, KernelKind, RhoFunction,
};
use nalgebra::SymmetricEigen;
use proptest::prelude::*;

fn params() -> impl Strategy<Value = DiffusionParams> {
    (0.0f64..=1.0, 0.0f64..=1.0, 1usize..=8).prop_map(|(alpha, beta, steps)| DiffusionParams {
        alpha,
        beta,
        steps,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn matrix_free_matches_dense_powers(seed in any::<u64>(), n in 1usize..30, m in 0usize..40, p in params()) {
        let mut r = rng(seed);
        let h = random_hypergraph(&mut r, n, m);
        let x = random_features(&mut r, n, 3);
        let t = build_transition(&h, RhoFunction::new(-0.5), true).unwrap();
        let op = DiffusionOperator::new(&t, p).unwrap();
        let oracle = dense_diffusion(&t.matrix().to_dense(), p.alpha, p.beta, p.steps) * x.matrix();
        prop_assert!(max_abs_diff(op.apply_diffusion(&x).unwrap().matrix(), &oracle) <= 1e-10);
        prop_assert!(max_abs_diff(&op.dense().unwrap(), &dense_diffusion(&t.matrix().to_dense(), p.alpha, p.beta, p.steps)) <= 1e-10);
    }

    #[test]
    fn operator_is_linear(seed in any::<u64>(), n in 1usize..20, m in 0usize..20, p in params(), c in -3.0f64..3.0) {
        let mut r = rng(seed);
        let h = random_hypergraph(&mut r, n, m);
        let t = build_transition(&h, RhoFunction::constant(), true).unwrap();
        let op = DiffusionOperator::new(&t, p).unwrap();
        let a = random_matrix(&mut r, n, 2, 1.0);
        let b = random_matrix(&mut r, n, 2, 1.0);
        let lhs = op.apply_matrix(&(&a * c + &b)).unwrap();
        let rhs = op.apply_matrix(&a).unwrap() * c + op.apply_matrix(&b).unwrap();
        prop_assert!(max_abs_diff(&lhs, &rhs) <= 1e-10);
    }

    #[test]
    fn beta_zero_is_identity(seed in any::<u64>(), n in 1usize..20, m in 0usize..20, alpha in 0.0f64..=1.0, steps in 1usize..8) {
        let mut r = rng(seed);
        let h = random_hypergraph(&mut r, n, m);
        let x = random_features(&mut r, n, 4);
        let t = build_transition(&h, RhoFunction::constant(), true).unwrap();
        let op = DiffusionOperator::new(&t, DiffusionParams { alpha, beta: 0.0, steps }).unwrap();
        prop_assert_eq!(op.apply_diffusion(&x).unwrap(), x.clone());
        let k = op.kernel_matrix(&x, None).unwrap();
        prop_assert_eq!(k.kind, KernelKind::Original);
        prop_assert_eq!(k.values, original_kernel(&x).values);
    }

    #[test]
    fn learnable_kernel_is_psd(seed in any::<u64>(), n in 1usize..40, m in 0usize..40, p in params(), h_dim in 1usize..6) {
        let mut r = rng(seed);
        let h = random_hypergraph(&mut r, n, m);
        let x = random_features(&mut r, n, 4);
        let theta = random_matrix(&mut r, 4, h_dim, 1.0);
        let t = build_transition(&h, RhoFunction::new(1.0), true).unwrap();
        let op = DiffusionOperator::new(&t, p).unwrap();
        let k = op.kernel_matrix(&x, Some(&theta)).unwrap();
        prop_assert_eq!(k.kind, KernelKind::Learnable);
        prop_assert_eq!(&k.values, &k.values.transpose());
        let ev = SymmetricEigen::new(k.values.clone()).eigenvalues;
        let top = ev.max().max(0.0);
        prop_assert!(ev.min() >= -1e-8 * top.max(1e-300));
        let i = r_index(seed, n);
        let j = r_index(seed / 7, n);
        let d = op.diffusion_distance(&x, Some(&theta), i, j).unwrap();
        prop_assert!((d * d - k.quadratic_distance(i, j)).abs() <= 1e-8 * (1.0 + k.values.amax()));
        prop_assert_eq!(op.diffusion_distance(&x, Some(&theta), i, i).unwrap(), 0.0);
    }
}

fn r_index(seed: u64, n: usize) -> usize {
    (seed % n as u64) as usize
}
