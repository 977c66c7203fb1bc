use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reachmac::stats::fit_xy;
use reachmac_oracles::exact_ols;

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs()
    }
}

#[test]
fn ols_matches_exact_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0150);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let n = rng.random_range(3..=200);
        let intercept = rng.random_range(5.0..15.0);
        let slope = rng.random_range(0.3..1.5);
        let noise = rng.random_range(0.1..3.0);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(20.0..45.0)).collect();
        let y: Vec<f64> = x.iter().map(|xi| intercept + slope * xi + noise * rng.random_range(-1.0..1.0)).collect();

        let fit = fit_xy(&x, &y).unwrap();
        let oracle = exact_ols(&x, &y);
        for (name, got, want) in [
            ("intercept", fit.intercept, oracle.intercept),
            ("slope", fit.slope, oracle.slope),
            ("se_intercept", fit.se_intercept, oracle.se_intercept),
            ("se_slope", fit.se_slope, oracle.se_slope),
            ("residual_se", fit.residual_se, oracle.residual_se),
            ("r2", fit.r2, oracle.r2),
            ("f", fit.f_stat, oracle.f_stat),
        ] {
            let e = rel(got, want);
            assert!(e <= 1e-10, "case {case} n={n} {name}: {got} vs {want} (rel {e:e})");
            worst = worst.max(e);
        }
    }
    eprintln!("worst relative deviation {worst:e}");
}

#[test]
fn exact_fit_recovered() {
    let x = [28.0, 30.5, 33.0, 36.25];
    let y: Vec<f64> = x.iter().map(|v| 7.5 + 0.75 * v).collect();
    let fit = fit_xy(&x, &y).unwrap();
    let oracle = exact_ols(&x, &y);
    assert_eq!(oracle.residual_se, 0.0);
    assert!(rel(fit.slope, 0.75) < 1e-14 && rel(fit.intercept, 7.5) < 1e-13);
    assert!(fit.residual_se < 1e-12);
}
