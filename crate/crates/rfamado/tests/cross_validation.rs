//! Cross-module checks: the empirical estimator traced against the
//! closed-form theory along the whole c axis, on simulated logistic pairs.

use rfamado::gevtheory::{theoretical_d_homogeneous, BivariateGevSpec, GevMargin};
use rfamado::madogram::{optimal_c, rfa_madogram_at, CStarConfig};
use rfamado::simulate::sample_bivariate_logistic;

fn spec(sigma1: f64, sigma2: f64, xi: f64, alpha: f64) -> BivariateGevSpec {
    BivariateGevSpec::new(
        GevMargin::new(sigma1, xi).unwrap(),
        GevMargin::new(sigma2, xi).unwrap(),
        alpha,
    )
    .unwrap()
}

/// The empirical curve c -> D_n(c) follows the population curve pointwise,
/// not only at the minimum.
#[test]
fn empirical_curve_tracks_theory_across_c() {
    let s = spec(1.0, 1.5, 0.2, 0.4);
    let n = 40_000;
    let (y1, y2) = sample_bivariate_logistic(&s, n, 61_803);
    let mut worst: f64 = 0.0;
    for i in 0..13 {
        let c = 0.3 * (8.0f64 / 0.3).powf(i as f64 / 12.0); // log-spaced in [0.3, 8]
        let empirical = rfa_madogram_at(&y1, &y2, c).unwrap();
        let theory = theoretical_d_homogeneous(&s, c).unwrap();
        worst = worst.max((empirical - theory).abs());
    }
    assert!(worst < 0.01, "max |empirical - theory| over c sweep: {worst}");
}

/// The fitted minimum value agrees with the closed-form minimum, and the
/// argmin with the scale ratio, across several dependence strengths.
#[test]
fn fitted_minimum_matches_closed_form() {
    let cfg = CStarConfig::default();
    for &alpha in &[0.15, 0.4, 0.8] {
        let s = spec(1.0, 2.0, 0.15, alpha);
        let (y1, y2) = sample_bivariate_logistic(&s, 20_000, 271_828);
        let fit = optimal_c(&y1, &y2, &cfg).unwrap();
        let d_min = theoretical_d_homogeneous(&s, 2.0).unwrap();
        assert!(
            (fit.d_rfa - d_min).abs() < 0.01,
            "alpha = {alpha}: fitted {} vs theory {d_min}",
            fit.d_rfa
        );
        assert!(
            (fit.c_star.ln() - 2.0f64.ln()).abs() < 0.15,
            "alpha = {alpha}: c* = {}",
            fit.c_star
        );
        assert!(!fit.boundary);
    }
}
