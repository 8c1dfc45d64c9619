mod common;

use common::*;
use noisy_ar::linear::{fit_ar, FitConfig};
use noisy_ar::model::{
    build_companion, coefficients_from_roots, simulate, ArParams, NoiseSpec, TimeSeries,
};
use noisy_ar::numerics::{
    companion_eigenvalues, solve_banded_spd, solve_block_tridiagonal_spd, solve_regularized_ls,
    DenseMatrix,
};
use noisy_ar::preprocess::first_difference;
use noisy_ar::signature::{signature, GeometricPath};
use num_complex::Complex64;
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DenseMatrix> {
    prop::collection::vec(-3.0..3.0f64, rows * cols)
        .prop_map(move |d| DenseMatrix::new(rows, cols, d).unwrap())
}

fn polyline(k: usize, max_pts: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-2.0..2.0f64, k), 2..max_pts)
}

fn sig(points: &[Vec<f64>], depth: usize) -> noisy_ar::signature::SignatureVector {
    signature(&GeometricPath::from_points(points).unwrap(), depth).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ridge_shrinks_with_lambda(x in matrix(12, 4), y in prop::collection::vec(-3.0..3.0f64, 12),
                                 l1 in 0.01..5.0f64, dl in 0.01..5.0f64) {
        let t = DenseMatrix::column_vector(&y);
        let w1 = solve_regularized_ls(&x, &t, l1).unwrap();
        let w2 = solve_regularized_ls(&x, &t, l1 + dl).unwrap();
        prop_assert!(w2.frobenius_norm() <= w1.frobenius_norm() * (1.0 + 1e-12));
    }

    #[test]
    fn ridge_stationarity(x in matrix(15, 4), t in matrix(15, 2), lambda in 0.0..2.0f64) {
        let w = match solve_regularized_ls(&x, &t, lambda) {
            Ok(w) => w,
            Err(_) => return Ok(()),
        };
        let lhs = x.tr_matmul(&x.matmul(&w).unwrap()).unwrap();
        let mut lhs = lhs.as_slice().to_vec();
        for (l, v) in lhs.iter_mut().zip(w.as_slice()) {
            *l += lambda * v;
        }
        let rhs = x.tr_matmul(&t).unwrap();
        prop_assert!(rel_err(&lhs, rhs.as_slice()) < 1e-9);
    }

    #[test]
    fn banded_matches_dense(seed in any::<u64>(), dim in 1usize..50, bw in 0usize..6) {
        let mut g = rng(seed);
        let m = random_banded_spd(&mut g, dim, bw);
        let rhs = random_vec(&mut g, dim);
        let x = solve_banded_spd(&m, &rhs).unwrap();
        prop_assert!(rel_err(&x, &dense_solve(&m.to_dense(), &rhs)) < 1e-10);
    }

    #[test]
    fn blocks_match_dense(seed in any::<u64>(), blocks in 1usize..12, bd in 1usize..5) {
        let mut g = rng(seed);
        let m = random_block_spd(&mut g, blocks, bd);
        let rhs = random_vec(&mut g, blocks * bd);
        let x = solve_block_tridiagonal_spd(&m, &rhs).unwrap();
        prop_assert!(rel_err(&x, &dense_solve(&m.to_dense(), &rhs)) < 1e-10);
    }

    #[test]
    fn root_sum_and_product(theta in prop::collection::vec(-2.0..2.0f64, 1..8)) {
        let roots = companion_eigenvalues(&theta).unwrap();
        let r = theta.len();
        let sum: Complex64 = roots.iter().sum();
        let prod: Complex64 = roots.iter().product();
        let sign = if r % 2 == 1 { 1.0 } else { -1.0 };
        let scale = theta.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        prop_assert!((sum - theta[0]).norm() < 1e-8 * scale);
        prop_assert!((prod - sign * theta[r - 1]).norm() < 1e-8 * scale.powi(r as i32));
    }

    #[test]
    fn roots_roundtrip(pairs in prop::collection::vec((0.2..1.2f64, 0.1..3.0f64), 0..3),
                       reals in prop::collection::vec(-1.2..1.2f64, 0..3)) {
        prop_assume!(!pairs.is_empty() || !reals.is_empty());
        let mut roots: Vec<Complex64> = reals.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        for &(m, a) in &pairs {
            let z = Complex64::from_polar(m, a);
            roots.extend([z, z.conj()]);
        }
        let p = coefficients_from_roots(&roots).unwrap();
        let back = coefficients_from_roots(&companion_eigenvalues(p.theta()).unwrap()).unwrap();
        prop_assert!(rel_err(back.theta(), p.theta()) < 1e-8);
    }

    #[test]
    fn chen_identity(p in polyline(2, 6), q in polyline(2, 6), depth in 1usize..4) {
        // q translated to start where p ends
        let shift: Vec<f64> = p.last().unwrap().iter().zip(&q[0]).map(|(a, b)| a - b).collect();
        let q: Vec<Vec<f64>> = q.iter()
            .map(|pt| pt.iter().zip(&shift).map(|(v, s)| v + s).collect())
            .collect();
        let mut joined = p.clone();
        joined.extend(q.iter().skip(1).cloned());
        let whole = sig(&joined, depth);
        let product = sig(&p, depth).concat(&sig(&q, depth)).unwrap();
        for (a, b) in whole.coefficients().iter().zip(product.coefficients()) {
            prop_assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn level_two_symmetric_part(p in polyline(3, 8)) {
        let s = sig(&p, 2);
        let l1 = s.level(1);
        let l2 = s.level(2);
        for i in 0..3 {
            for j in 0..3 {
                let sym = 0.5 * (l2[i * 3 + j] + l2[j * 3 + i]);
                prop_assert!((sym - 0.5 * l1[i] * l1[j]).abs() < 1e-12 * (1.0 + (l1[i] * l1[j]).abs()));
            }
        }
    }

    #[test]
    fn level_one_is_displacement(p in polyline(3, 8)) {
        let s = sig(&p, 1);
        let last = p.last().unwrap();
        for j in 0..3 {
            prop_assert!((s.level(1)[j] - (last[j] - p[0][j])).abs() < 1e-12);
        }
    }

    #[test]
    fn scaling_by_word_length(p in polyline(2, 6), c in -2.0..2.0f64) {
        let scaled: Vec<Vec<f64>> = p.iter().map(|pt| pt.iter().map(|v| c * v).collect()).collect();
        let a = sig(&p, 3);
        let b = sig(&scaled, 3);
        for m in 0..=3 {
            for (x, y) in a.level(m).iter().zip(b.level(m)) {
                let want = x * c.powi(m as i32);
                prop_assert!((y - want).abs() < 1e-12 * (1.0 + want.abs()));
            }
        }
    }

    #[test]
    fn collinear_midpoint_invariance(p in polyline(2, 5), t in 0.0..1.0f64) {
        let mut with_mid = vec![p[0].clone()];
        let mid: Vec<f64> = p[0].iter().zip(&p[1]).map(|(a, b)| a + t * (b - a)).collect();
        with_mid.push(mid);
        with_mid.extend(p.iter().skip(1).cloned());
        let a = sig(&p, 3);
        let b = sig(&with_mid, 3);
        for (x, y) in a.coefficients().iter().zip(b.coefficients()) {
            prop_assert!((x - y).abs() < 1e-12 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn simulation_is_seeded(seed in any::<u64>(), theta in prop::collection::vec(-0.5..0.5f64, 1..5)) {
        let model = build_companion(&ArParams::new(theta.clone()).unwrap());
        let mut x1 = vec![0.0; theta.len()];
        x1[0] = 1.0;
        let noise = NoiseSpec { transition_std: 0.3, measurement_std: 1.0, seed };
        let a = simulate(&model, &x1, 50, &noise).unwrap();
        let b = simulate(&model, &x1, 50, &noise).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn loss_never_increases(seed in any::<u64>(), r in 1usize..5, n in 20usize..80,
                            rho in prop::sample::select(vec![0.01, 0.1, 1.0])) {
        let mut g = rng(seed);
        let y = TimeSeries::scalar(&random_vec(&mut g, n)).unwrap();
        let fit = fit_ar(&y, &FitConfig::new(r).rho(rho).max_iterations(30)).unwrap();
        for w in fit.loss_history.windows(2) {
            prop_assert!(w[1].total <= w[0].total * (1.0 + 1e-9));
        }
    }

    #[test]
    fn difference_inverts_cumsum(x in prop::collection::vec(-100.0..100.0f64, 1..60)) {
        let mut cum = Vec::with_capacity(x.len() + 1);
        let mut acc = 0.0;
        cum.push(acc);
        for v in &x {
            acc += v;
            cum.push(acc);
        }
        let d = first_difference(&TimeSeries::scalar(&cum).unwrap()).unwrap();
        let scale = cum.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (a, b) in d.scalar_values().unwrap().iter().zip(&x) {
            prop_assert!((a - b).abs() <= 4.0 * f64::EPSILON * scale);
        }
    }

    #[test]
    fn csv_roundtrip_is_exact(values in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, 2..40)) {
        let rows = values.len() / 2;
        let m = DenseMatrix::new(rows, 2, values[..rows * 2].to_vec()).unwrap();
        let y = TimeSeries::new(m).unwrap();
        let mut buf = Vec::new();
        noisy_ar::io::write_series(&mut buf, &y).unwrap();
        let back = noisy_ar::io::read_csv(buf.as_slice(), true).unwrap();
        for (a, b) in back.values().as_slice().iter().zip(y.values().as_slice()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
