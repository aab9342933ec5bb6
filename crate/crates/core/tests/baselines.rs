use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ggn_score::baselines::{sgd_step, AdamState, LbfgsState};
use ggn_score::loss::FitLoss;
use ggn_score::model::QuadraticProblem;
use ggn_score::objective::Objective;
use ggn_score::regularizer::Regularizer;
use ggn_score::types::ParameterVector;

/// A = QΛQᵀ with eigenvalues spread over [lo, hi].
fn spd(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let q = g.qr().q();
    let diag = DVector::from_fn(n, |i, _| lo + (hi - lo) * i as f64 / (n - 1) as f64);
    &q * DMatrix::from_diagonal(&diag) * q.transpose()
}

/// Steps use the exact line-search length along the L-BFGS direction, which
/// makes the stored pairs A-conjugate; with n of them the two-loop recursion
/// reproduces A⁻¹.
#[test]
fn lbfgs_direction_matches_inverse_after_n_plus_one_iterations() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let n = 5;
    let a = spd(&mut rng, n, 0.5, 1.5);
    let mut st = LbfgsState::new(1.0, 10).unwrap();
    let mut theta = ParameterVector::from_slice(&[1.0, -0.5, 0.25, 2.0, -1.0]).unwrap();
    let mut prev = theta.clone();
    for _ in 0..n {
        let g = &a * theta.values();
        let mut probe = st.clone();
        probe.step(&theta, &g).unwrap();
        let d = probe.direction(&g);
        st.lr = g.dot(&d) / d.dot(&(&a * &d));
        prev = theta.clone();
        theta = st.step(&theta, &g).unwrap();
    }
    // The (n + 1)-th iteration would store this pair before computing its direction.
    let s = theta.values() - prev.values();
    assert!(st.push_pair(s.clone(), &a * s));
    assert_eq!(st.n_pairs(), n);
    let inv = a.clone().try_inverse().unwrap();
    for _ in 0..10 {
        let g = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let newton = &inv * &g;
        let err = (st.direction(&g) - &newton).norm() / newton.norm();
        assert!(err <= 1e-4, "relative error {err:e}");
    }
}

/// Without a line search the unit-step iteration still converges on a
/// well-conditioned quadratic, but the direction does not reach A⁻¹g.
#[test]
fn lbfgs_fixed_unit_step_converges() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let a = spd(&mut rng, 5, 0.5, 1.5);
    let mut st = LbfgsState::new(1.0, 10).unwrap();
    let mut theta = ParameterVector::from_slice(&[1.0, -0.5, 0.25, 2.0, -1.0]).unwrap();
    for _ in 0..30 {
        let g = &a * theta.values();
        theta = st.step(&theta, &g).unwrap();
    }
    assert!((&a * theta.values()).norm() < 1e-10);
}

fn quadratic_objective_setup(seed: u64) -> (QuadraticProblem, ParameterVector) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = QuadraticProblem::random_uniform(&mut rng, 30, 20, 0.1).unwrap();
    let theta = ParameterVector::from_slice(&(0..20).map(|i| (i as f64 * 0.37).sin()).collect::<Vec<_>>())
        .unwrap();
    (q, theta)
}

#[test]
fn all_baselines_decrease_convex_quadratic_at_small_lr() {
    let (q, theta0) = quadratic_objective_setup(5);
    let data = q.dataset().unwrap();
    let model = q.model();
    let obj = Objective::new(&model, &data, FitLoss::Squared, Regularizer::l2(), 0.1).unwrap();
    let all = obj.all_indices();
    let lr = 1e-3;

    for which in 0..3 {
        let mut theta = theta0.clone();
        let mut adam = AdamState::new(20, lr).unwrap();
        let mut lbfgs = LbfgsState::new(lr, 10).unwrap();
        let mut prev = obj.value(theta.as_slice(), &all).unwrap();
        for it in 0..100 {
            let g = obj.gradient(theta.as_slice(), &all).unwrap();
            theta = match which {
                0 => sgd_step(&theta, &g, lr).unwrap(),
                1 => adam.step(&theta, &g).unwrap(),
                _ => lbfgs.step(&theta, &g).unwrap(),
            };
            let v = obj.value(theta.as_slice(), &all).unwrap();
            assert!(v < prev, "optimizer {which} increased the loss at iteration {it}");
            prev = v;
        }
    }
}

#[test]
fn adam_denominator_stays_positive() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut st = AdamState::new(4, 1e-2).unwrap();
    let mut theta = ParameterVector::zeros(4);
    for _ in 0..200 {
        let scale = 10f64.powi(rng.random_range(-30..3));
        let g = DVector::from_fn(4, |_, _| scale * rng.random_range(-1.0..1.0));
        theta = st.step(&theta, &g).unwrap();
        let c2 = 1.0 - st.beta2.powi(st.t as i32);
        assert!(st.v.iter().all(|&v| v / c2 + st.eps >= st.eps));
    }
    assert!(theta.as_slice().iter().all(|v| v.is_finite()));
}

#[test]
fn lbfgs_steps_are_descent_with_curvature_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let a = spd(&mut rng, 6, 0.1, 10.0);
    let mut st = LbfgsState::new(0.05, 4).unwrap();
    let mut theta = ParameterVector::from_slice(&[1.0, 2.0, -1.0, 0.5, -0.3, 0.8]).unwrap();
    for _ in 0..30 {
        let g = &a * theta.values();
        if g.norm() < 1e-12 {
            break;
        }
        assert!(st.direction(&g).dot(&g) > 0.0);
        theta = st.step(&theta, &g).unwrap();
    }
}
