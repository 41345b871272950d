use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trajkit::spline::{fit_penalized, make_basis_spec, select_lambda, SplineBasisSpec};

fn random_problem(rng: &mut ChaCha8Rng, n_max: usize) -> (Vec<f64>, Vec<f64>, SplineBasisSpec) {
    loop {
        let n = rng.random_range(6..=n_max);
        let times: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
        let ys: Vec<f64> = times
            .iter()
            .map(|t| (t * 0.7).sin() * 3.0 + rng.random_range(-1.0..1.0))
            .collect();
        let maxdf = rng.random_range(4..=12);
        if let Ok(spec) = make_basis_spec(&times, maxdf) {
            return (times, ys, spec);
        }
    }
}

/// Dense normal equations `(XᵀX + λS) β = Xᵀy` solved by full-pivot LU.
fn dense_oracle(times: &[f64], ys: &[f64], spec: &SplineBasisSpec, lambda: f64) -> DVector<f64> {
    let x = spec.design_matrix(times);
    let s = spec.penalty_matrix();
    let y = DVector::from_column_slice(ys);
    let a = x.transpose() * &x + s * lambda;
    a.full_piv_lu().solve(&(x.transpose() * y)).unwrap()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / norm.max(1e-300)
}

#[test]
fn matches_dense_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let (times, ys, spec) = random_problem(&mut rng, 50);
        let lambda = 10f64.powf(rng.random_range(-4.0..=4.0));
        let fit = fit_penalized(&times, &ys, &spec, lambda).unwrap();
        let oracle = dense_oracle(&times, &ys, &spec, lambda);
        worst = worst.max(rel_err(&fit.coefficients, oracle.as_slice()));
    }
    assert!(worst < 1e-8, "worst relative error {worst:e}");
}

fn gauss_legendre_3(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let nodes = [-(0.6f64).sqrt(), 0.0, (0.6f64).sqrt()];
    let weights = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
    let (mid, half) = ((a + b) / 2.0, (b - a) / 2.0);
    nodes
        .iter()
        .zip(weights)
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

#[test]
fn penalty_is_integrated_squared_curvature() {
    let spec = SplineBasisSpec::from_knots(vec![0.0, 0.7, 1.5, 3.0, 3.2, 5.0, 8.0]).unwrap();
    let q = spec.n_basis();
    let knots = spec.knots().to_vec();
    // Second derivative of every basis function by central differences of
    // the design matrix; exact for cubics up to rounding.
    let second = |t: f64, h: f64| -> DVector<f64> {
        let x = spec.design_matrix(&[t - h, t, t + h]);
        let row = |r: usize| x.row(r).transpose();
        (row(0) - row(1) * 2.0 + row(2)) / (h * h)
    };
    let mut oracle = DMatrix::<f64>::zeros(q, q);
    for w in knots.windows(2) {
        let h = (w[1] - w[0]) * 1e-3;
        for a in 0..q {
            for b in 0..q {
                oracle[(a, b)] += gauss_legendre_3(|t| second(t, h)[a] * second(t, h)[b], w[0], w[1]);
            }
        }
    }
    let s = spec.penalty_matrix();
    let scale = s.amax();
    for a in 0..q {
        for b in 0..q {
            assert!(
                (s[(a, b)] - oracle[(a, b)]).abs() <= 1e-6 * scale,
                "S[{a},{b}] = {} vs quadrature {}",
                s[(a, b)],
                oracle[(a, b)]
            );
        }
    }
}

fn ols_line(times: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = times.len() as f64;
    let mt = times.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = times.iter().zip(ys).map(|(t, y)| (t - mt) * (y - my)).sum();
    let sxx: f64 = times.iter().map(|t| (t - mt).powi(2)).sum();
    let slope = sxy / sxx;
    (my - slope * mt, slope)
}

#[test]
fn huge_lambda_gives_ols_line() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let times: Vec<f64> = (0..300).map(|_| rng.random_range(-365.0..730.0)).collect();
    let ys: Vec<f64> = times
        .iter()
        .map(|t| 150.0 + 0.02 * t + 15.0 * (t / 120.0).sin() + rng.random_range(-3.0..3.0))
        .collect();
    let spec = make_basis_spec(&times, 30).unwrap();
    let fit = fit_penalized(&times, &ys, &spec, 1e12).unwrap();
    assert!((fit.edf - 2.0).abs() < 0.05, "edf {}", fit.edf);
    let (a, b) = ols_line(&times, &ys);
    for &t in &times {
        let line = a + b * t;
        assert!(((fit.eval(t) - line) / line).abs() < 1e-4);
    }
}

#[test]
fn gcv_on_pure_noise_is_nearly_linear() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let times: Vec<f64> = (0..200).map(|_| rng.random_range(0.0..100.0)).collect();
    let ys: Vec<f64> = (0..200).map(|_| rng.random_range(-1.0..1.0)).collect();
    let spec = make_basis_spec(&times, 20).unwrap();
    let (_, m) = select_lambda(&times, &ys, &spec).unwrap();
    assert!(m.edf < 4.0, "edf {}", m.edf);
}

#[test]
fn gcv_recovers_smooth_noiseless_curve() {
    let times: Vec<f64> = (0..200).map(|i| i as f64 * 0.05).collect();
    let f = |t: f64| 2.0 + (t * 0.6).sin();
    let ys: Vec<f64> = times.iter().map(|&t| f(t)).collect();
    let spec = make_basis_spec(&times, 30).unwrap();
    let (_, m) = select_lambda(&times, &ys, &spec).unwrap();
    let rmse = (times.iter().map(|&t| (m.eval(t) - f(t)).powi(2)).sum::<f64>() / 200.0).sqrt();
    assert!(rmse < 1e-3, "rmse {rmse:e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn affine_data_reproduced(seed in any::<u64>(), a in -200.0..200.0f64, b in -5.0..5.0f64,
                              log_lambda in -6.0..12.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (times, _, spec) = random_problem(&mut rng, 40);
        let ys: Vec<f64> = times.iter().map(|t| a + b * t).collect();
        let fit = fit_penalized(&times, &ys, &spec, 10f64.powf(log_lambda)).unwrap();
        for (&t, &y) in times.iter().zip(&ys) {
            prop_assert!((fit.eval(t) - y).abs() <= 1e-8 * y.abs().max(1.0));
        }
    }

    #[test]
    fn smoothing_trades_fit_for_flexibility(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (times, ys, spec) = random_problem(&mut rng, 50);
        let mut prev: Option<(f64, f64)> = None;
        for e in -3..=5 {
            let fit = fit_penalized(&times, &ys, &spec, 10f64.powi(e)).unwrap();
            if let Some((rss, edf)) = prev {
                prop_assert!(fit.rss >= rss * (1.0 - 1e-9) - 1e-12);
                prop_assert!(fit.edf <= edf + 1e-9);
            }
            prop_assert!(fit.edf >= 2.0 - 1e-6 && fit.edf <= spec.n_basis() as f64 + 1e-6);
            prev = Some((fit.rss, fit.edf));
        }
    }

    #[test]
    fn response_shift_equivariance(seed in any::<u64>(), c in -500.0..500.0f64, log_lambda in -3.0..4.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (times, ys, spec) = random_problem(&mut rng, 50);
        let lambda = 10f64.powf(log_lambda);
        let base = fit_penalized(&times, &ys, &spec, lambda).unwrap();
        let shifted: Vec<f64> = ys.iter().map(|y| y + c).collect();
        let moved = fit_penalized(&times, &shifted, &spec, lambda).unwrap();
        for (x, y) in base.coefficients.iter().zip(&moved.coefficients) {
            prop_assert!((x + c - y).abs() <= 1e-8 * (1.0 + c.abs()));
        }
        prop_assert!((base.edf - moved.edf).abs() < 1e-8);
    }

    #[test]
    fn time_translation_equivariance(seed in any::<u64>(), delta in -50.0..50.0f64, log_lambda in -3.0..4.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (times, ys, spec) = random_problem(&mut rng, 50);
        let lambda = 10f64.powf(log_lambda);
        let base = fit_penalized(&times, &ys, &spec, lambda).unwrap();
        let moved_times: Vec<f64> = times.iter().map(|t| t + delta).collect();
        let moved_spec = spec.translated(delta).unwrap();
        let moved = fit_penalized(&moved_times, &ys, &moved_spec, lambda).unwrap();
        for (x, y) in base.coefficients.iter().zip(&moved.coefficients) {
            prop_assert!((x - y).abs() <= 1e-8 * (1.0 + x.abs()));
        }
    }
}
