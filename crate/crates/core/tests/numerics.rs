mod common;

use common::oracles::{check_op, hp_dense, hp_residual, op_cases};
use dance_core::numerics::{
    pentadiagonal_solve, psd_sqrt, symmetric_eigen, symmetric_sqrt_product, AdamConfig, AdamState,
    Array, Graph, ParamStore,
};
use dance_core::SeededRng;
use proptest::prelude::*;

#[test]
fn every_op_matches_finite_differences() {
    for (i, case) in op_cases().iter().enumerate() {
        let worst = check_op(case, 100, 1000 + i as u64);
        assert!(worst < 1e-4, "{}: worst relative error {worst}", case.name);
    }
}

#[test]
fn constant_leaf_has_no_gradient() {
    let mut g = Graph::<f64>::new();
    let x = g.input(Array::full(&[2, 2], 1.0));
    let c = g.constant(Array::full(&[2, 2], 3.0));
    let p = g.mul(x, c).unwrap();
    let l = g.sum(p);
    let grads = g.backward(l).unwrap();
    assert!(grads.get(c).is_none());
    assert_eq!(grads.get(x).unwrap().data(), &[3.0; 4]);
}

fn random_spd(n: usize, rng: &mut SeededRng) -> Array<f64> {
    let a = Array::new(&[n, n], (0..n * n).map(|_| rng.normal()).collect()).unwrap();
    let mut s = a.matmul(&a.transpose()).unwrap();
    for i in 0..n {
        for j in 0..i {
            let v = s.get2(i, j);
            s.set2(j, i, v);
        }
    }
    s
}

fn to_na(a: &Array<f64>) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_row_slice(a.rows(), a.cols(), a.data())
}

#[test]
fn eigenvalues_match_nalgebra() {
    let mut rng = SeededRng::new(5);
    for n in [1, 2, 3, 5, 8] {
        let s = random_spd(n, &mut rng);
        let (mut ours, _) = symmetric_eigen(&s).unwrap();
        ours.sort_by(f64::total_cmp);
        let mut theirs: Vec<f64> = to_na(&s)
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        theirs.sort_by(f64::total_cmp);
        for (a, b) in ours.iter().zip(&theirs) {
            assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()), "n={n}: {a} vs {b}");
        }
    }
}

#[test]
fn sqrt_product_matches_reference_eigen_route() {
    let mut rng = SeededRng::new(9);
    for _ in 0..20 {
        let (a, b) = (random_spd(3, &mut rng), random_spd(3, &mut rng));
        let ours = symmetric_sqrt_product(&a, &b).unwrap();
        // Reference: eigenvalues of A·B are real and non-negative; their
        // square roots sum to Tr((AB)^{1/2}).
        let ab = to_na(&a) * to_na(&b);
        let reference: f64 = ab
            .complex_eigenvalues()
            .iter()
            .map(|z| z.re.max(0.0).sqrt())
            .sum();
        assert!((ours - reference).abs() < 1e-8, "{ours} vs {reference}");
    }
}

#[test]
fn psd_sqrt_squares_back() {
    let s = random_spd(4, &mut SeededRng::new(2));
    let r = psd_sqrt(&s).unwrap();
    let rr = r.matmul(&r).unwrap();
    for (x, y) in rr.data().iter().zip(s.data()) {
        assert!((x - y).abs() < 1e-10);
    }
}

#[test]
fn hp_impulse_matches_dense_solver() {
    let x = [0.0, 0.0, 1.0, 0.0, 0.0];
    let fast = pentadiagonal_solve(1.0, &x).unwrap();
    let dense = hp_dense(1.0, &x);
    for (a, b) in fast.iter().zip(&dense) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn hp_matches_dense_solver_on_random_series() {
    let mut rng = SeededRng::new(4);
    for (n, lambda) in [(3, 0.5), (7, 1.0), (50, 100.0), (120, 1600.0)] {
        let y: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let fast = pentadiagonal_solve(lambda, &y).unwrap();
        let dense = hp_dense(lambda, &y);
        for (a, b) in fast.iter().zip(&dense) {
            assert!((a - b).abs() < 1e-9, "n={n} lambda={lambda}");
        }
    }
}

#[test]
fn hp_residual_small_up_to_1000() {
    let mut rng = SeededRng::new(11);
    for n in [3, 4, 10, 100, 999, 1000] {
        for lambda in [0.0, 1.0, 100.0, 1e4] {
            let y: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
            let t = pentadiagonal_solve(lambda, &y).unwrap();
            assert!(hp_residual(lambda, &y, &t) < 1e-8, "n={n} lambda={lambda}");
        }
    }
    assert!(pentadiagonal_solve(1.0, &[1.0, 2.0]).is_none());
}

#[test]
fn adam_zero_gradient_is_fixed_point_and_first_step_is_signed_lr() {
    let mut store = ParamStore::new();
    store.add("w", Array::new(&[3], vec![1.0, -2.0, 0.5]).unwrap());
    let mut adam = AdamState::new(&store, AdamConfig::default());
    adam.step(&mut store, &[Array::zeros(&[3])]).unwrap();
    assert_eq!(store.get(0).data(), &[1.0, -2.0, 0.5]);

    let mut adam = AdamState::new(
        &store,
        AdamConfig {
            lr: 0.1,
            ..AdamConfig::default()
        },
    );
    adam.step(
        &mut store,
        &[Array::new(&[3], vec![2.0, -3.0, 0.25]).unwrap()],
    )
    .unwrap();
    for (v, e) in store.get(0).data().iter().zip([0.9f64, -1.9, 0.4]) {
        assert!((v - e).abs() < 1e-6_f64);
    }
}

proptest! {
    #[test]
    fn softmax_normalizes_and_ignores_shift(row in prop::collection::vec(-30.0f64..30.0, 1..12), shift in -50.0f64..50.0) {
        let n = row.len();
        let mut g = Graph::<f64>::new();
        let a = g.constant(Array::new(&[1, n], row.clone()).unwrap());
        let b = g.constant(Array::new(&[1, n], row.iter().map(|v| v + shift).collect()).unwrap());
        let sa = g.softmax(a);
        let sb = g.softmax(b);
        let total: f64 = g.value(sa).data().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        for (x, y) in g.value(sa).data().iter().zip(g.value(sb).data()) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn hp_linear_input_is_fixed(n in 3usize..300, a in -5.0f64..5.0, b in -1.0f64..1.0, which in 0usize..3) {
        let lambda = [0.0, 1.0, 100.0][which];
        let y: Vec<f64> = (0..n).map(|t| a + b * t as f64).collect();
        let t = pentadiagonal_solve(lambda, &y).unwrap();
        for (u, v) in t.iter().zip(&y) {
            prop_assert!((u - v).abs() < 1e-10);
        }
    }
}
