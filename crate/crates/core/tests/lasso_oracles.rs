//! Lasso solvers checked against independent closed forms and simple reference solvers.

use ate_core::lasso::{
    self, cross_validate, fit_linear_lasso, fit_logistic_lasso, kkt_violation, lasso_path, Family,
};
use ate_core::rng::rng_from_seed;
use ate_core::Matrix;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn gaussian(n: usize, p: usize, seed: u64) -> Matrix {
    let mut rng = rng_from_seed(seed);
    Matrix::from_fn(n, p, |_, _| rng.sample(StandardNormal))
}

/// Gauss–Jordan elimination with partial pivoting on a dense row-major system.
fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let k = b.len();
    for c in 0..k {
        let piv = (c..k).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, piv);
        b.swap(c, piv);
        for r in 0..k {
            if r != c {
                let f = a[r][c] / a[c][c];
                for cc in c..k {
                    a[r][cc] -= f * a[c][cc];
                }
                b[r] -= f * b[c];
            }
        }
    }
    (0..k).map(|i| b[i] / a[i][i]).collect()
}

/// Design with an intercept column prepended, as rows.
fn with_intercept(x: &Matrix) -> Vec<Vec<f64>> {
    (0..x.nrows())
        .map(|i| {
            let mut row = vec![1.0];
            row.extend((0..x.ncols()).map(|j| x[(i, j)]));
            row
        })
        .collect()
}

fn ols(x: &Matrix, y: &[f64]) -> Vec<f64> {
    let z = with_intercept(x);
    let k = z[0].len();
    let mut a = vec![vec![0.0; k]; k];
    let mut b = vec![0.0; k];
    for (row, &yi) in z.iter().zip(y) {
        for r in 0..k {
            b[r] += row[r] * yi;
            for c in 0..k {
                a[r][c] += row[r] * row[c];
            }
        }
    }
    gauss_solve(a, b)
}

/// Unpenalized logistic MLE by plain Newton iterations.
fn logistic_mle(x: &Matrix, d: &[bool]) -> Vec<f64> {
    let z = with_intercept(x);
    let k = z[0].len();
    let mut theta = vec![0.0; k];
    for _ in 0..100 {
        let mut h = vec![vec![0.0; k]; k];
        let mut g = vec![0.0; k];
        for (row, &di) in z.iter().zip(d) {
            let eta: f64 = row.iter().zip(&theta).map(|(a, b)| a * b).sum();
            let p = 1.0 / (1.0 + (-eta).exp());
            let w = p * (1.0 - p);
            let resid = f64::from(u8::from(di)) - p;
            for r in 0..k {
                g[r] += row[r] * resid;
                for c in 0..k {
                    h[r][c] += w * row[r] * row[c];
                }
            }
        }
        let step = gauss_solve(h, g);
        theta.iter_mut().zip(&step).for_each(|(t, s)| *t += s);
        if step.iter().all(|s| s.abs() < 1e-13) {
            break;
        }
    }
    theta
}

#[test]
fn unpenalized_linear_fit_is_ols() {
    let x = gaussian(120, 8, 11);
    let mut rng = rng_from_seed(12);
    let y: Vec<f64> = (0..120)
        .map(|i| 1.5 + 2.0 * x[(i, 0)] - x[(i, 5)] + rng.sample::<f64, _>(StandardNormal))
        .collect();
    let fit = fit_linear_lasso(&x, &y, 0.0).unwrap();
    let want = ols(&x, &y);
    assert!((fit.intercept - want[0]).abs() < 1e-5, "{} vs {}", fit.intercept, want[0]);
    for j in 0..8 {
        assert!((fit.coefficients[j] - want[j + 1]).abs() < 1e-5);
    }
}

/// Columns of a Sylvester–Hadamard matrix other than the constant one are
/// centered, orthogonal and have unit population variance, so the Lasso
/// solution is the soft-thresholded marginal regression coefficient.
#[test]
fn orthonormal_design_soft_thresholds() {
    let n = 16;
    let hadamard = |i: usize, j: usize| if (i & j).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
    let x = Matrix::from_fn(n, 5, |i, j| hadamard(i, j + 1));
    let y: Vec<f64> = (0..n).map(|i| 0.7 + 3.0 * x[(i, 0)] - 0.4 * x[(i, 2)] + 0.05 * (i as f64).sin()).collect();
    for &lambda in &[0.0, 0.1, 0.5, 1.0, 4.0] {
        let fit = fit_linear_lasso(&x, &y, lambda).unwrap();
        for j in 0..5 {
            let z: f64 = (0..n).map(|i| x[(i, j)] * y[i]).sum::<f64>() / n as f64;
            let want = lasso::soft_threshold(z, lambda);
            assert!((fit.coefficients[j] - want).abs() < 1e-9, "λ={lambda} j={j}");
        }
        let ybar = y.iter().sum::<f64>() / n as f64;
        assert!((fit.intercept - ybar).abs() < 1e-9);
    }
}

#[test]
fn unpenalized_logistic_fit_is_mle() {
    let x = gaussian(300, 4, 21);
    let mut rng = rng_from_seed(22);
    let d: Vec<bool> = (0..300)
        .map(|i| {
            let eta = -0.3 + 0.8 * x[(i, 0)] - 0.5 * x[(i, 3)];
            rng.random::<f64>() < 1.0 / (1.0 + (-eta as f64).exp())
        })
        .collect();
    let fit = fit_logistic_lasso(&x, &d, 0.0).unwrap();
    let want = logistic_mle(&x, &d);
    assert!((fit.intercept - want[0]).abs() < 1e-5);
    for j in 0..4 {
        assert!((fit.coefficients[j] - want[j + 1]).abs() < 1e-5, "j={j}");
    }
}

#[test]
fn cv_on_pure_noise_selects_nothing_at_1se() {
    let runs = 50;
    let mut empty = 0;
    for r in 0..runs {
        let x = gaussian(100, 20, 1000 + r);
        let mut rng = rng_from_seed(5000 + r);
        let y: Vec<f64> = (0..100).map(|_| rng.sample(StandardNormal)).collect();
        let cv = cross_validate(&x, &y, Family::Linear, 10, r).unwrap();
        if cv.fit_1se().active_set.is_empty() {
            empty += 1;
        }
    }
    assert!(empty >= 45, "only {empty}/{runs} empty");
}

#[test]
fn cv_finds_a_strong_signal() {
    let runs = 50;
    let mut hits = 0;
    for r in 0..runs {
        let x = gaussian(500, 20, 2000 + r);
        let mut rng = rng_from_seed(6000 + r);
        let y: Vec<f64> = (0..500).map(|i| 5.0 * x[(i, 0)] + rng.sample::<f64, _>(StandardNormal)).collect();
        let cv = cross_validate(&x, &y, Family::Linear, 10, r).unwrap();
        if cv.fit_min().active_set.contains(&0) {
            hits += 1;
        }
    }
    assert!(hits >= 48, "{hits}/{runs}");
}

#[test]
fn cv_result_shape() {
    let x = gaussian(200, 30, 31);
    let mut rng = rng_from_seed(32);
    let d: Vec<f64> = (0..200)
        .map(|i| f64::from(u8::from(rng.random::<f64>() < 1.0 / (1.0 + (-x[(i, 0)]).exp()))))
        .collect();
    let cv = cross_validate(&x, &d, Family::Logistic, 10, 7).unwrap();
    assert!(cv.lambda_grid.len() <= lasso::PATH_LENGTH);
    assert_eq!(cv.cv_mean.len(), cv.lambda_grid.len());
    assert_eq!(cv.path.len(), cv.lambda_grid.len());
    assert_eq!(cv.lambda_grid[0], lasso::lambda_max(&x, &d));
    let full = lasso::lambda_grid(cv.lambda_grid[0]);
    assert_eq!(cv.lambda_grid[..], full[..cv.lambda_grid.len()]);
    assert!(cv.lambda_grid.windows(2).all(|w| w[0] > w[1]));
    assert!(cv.lambda_1se >= cv.lambda_min);
    assert!(cv.path[0].active_set.is_empty());
    let again = cross_validate(&x, &d, Family::Logistic, 10, 7).unwrap();
    assert_eq!(cv, again);
}

#[test]
fn cv_selected_fits_are_refined() {
    let (x, y) = problem(150, 200, 41);
    let cv = cross_validate(&x, &y, Family::Linear, 10, 5).unwrap();
    for fit in [cv.fit_min(), cv.fit_1se()] {
        assert!(kkt_violation(&x, &y, fit) < 1e-5);
        let cold = fit_linear_lasso(&x, &y, fit.lambda).unwrap();
        let gap = fit.coefficients.iter().zip(&cold.coefficients).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(gap < 1e-4, "refined fit differs from a cold solve by {gap}");
    }
}

fn problem(n: usize, p: usize, seed: u64) -> (Matrix, Vec<f64>) {
    let x = gaussian(n, p, seed);
    let mut rng = rng_from_seed(seed ^ 0xABCD);
    let y = (0..n)
        .map(|i| x[(i, 0)] - 0.7 * x[(i, 1 % p)] + rng.sample::<f64, _>(StandardNormal))
        .collect();
    (x, y)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn linear_solution_satisfies_kkt(seed in 0u64..10_000, frac in 0.01f64..1.0) {
        let (x, y) = problem(60, 12, seed);
        let lambda = frac * lasso::lambda_max(&x, &y);
        let fit = fit_linear_lasso(&x, &y, lambda).unwrap();
        prop_assert!(kkt_violation(&x, &y, &fit) < 1e-5);
    }

    #[test]
    fn warm_and_cold_starts_agree(seed in 0u64..10_000) {
        let (x, y) = problem(80, 15, seed);
        let grid: Vec<f64> = lasso::lambda_grid(lasso::lambda_max(&x, &y)).into_iter().take(30).collect();
        let path = lasso_path(&x, &y, Family::Linear, &grid).unwrap();
        for k in [5usize, 17, 29] {
            let cold = fit_linear_lasso(&x, &y, grid[k]).unwrap();
            let warm = &path[k];
            if warm.lambda != grid[k] { continue; }
            for j in 0..15 {
                prop_assert!((cold.coefficients[j] - warm.coefficients[j]).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn rescaling_a_feature_rescales_its_coefficient(seed in 0u64..10_000, c in 0.1f64..10.0) {
        let (x, y) = problem(50, 6, seed);
        let mut scaled = x.clone();
        for i in 0..50 { scaled[(i, 0)] *= c; }
        let lambda = 0.2 * lasso::lambda_max(&x, &y);
        let a = fit_linear_lasso(&x, &y, lambda).unwrap();
        let b = fit_linear_lasso(&scaled, &y, lambda).unwrap();
        prop_assert!((a.coefficients[0] - c * b.coefficients[0]).abs() < 1e-6);
        for j in 1..6 {
            prop_assert!((a.coefficients[j] - b.coefficients[j]).abs() < 1e-6);
        }
    }

    #[test]
    fn logistic_solution_is_a_local_minimum(seed in 0u64..10_000, frac in 0.05f64..0.9) {
        let x = gaussian(120, 6, seed);
        let d: Vec<bool> = (0..120).map(|i| x[(i, 0)] + 0.5 * x[(i, 2)] + 0.3 * ((i * 7919) % 13) as f64 / 13.0 > 0.2).collect();
        let dv: Vec<f64> = d.iter().map(|&t| f64::from(u8::from(t))).collect();
        let lambda = frac * lasso::lambda_max(&x, &dv);
        let fit = fit_logistic_lasso(&x, &d, lambda).unwrap();
        let base = lasso::logistic_objective(&x, &d, &fit);
        for j in 0..6 {
            for h in [1e-3, -1e-3] {
                let mut moved = fit.clone();
                moved.coefficients[j] += h;
                if !moved.active_set.contains(&j) { moved.active_set.push(j); moved.active_set.sort_unstable(); }
                prop_assert!(lasso::logistic_objective(&x, &d, &moved) >= base - 1e-9);
            }
        }
    }
}
