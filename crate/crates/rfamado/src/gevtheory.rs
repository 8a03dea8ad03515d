//! Closed-form and quadrature-based theory for logistic bivariate GEV pairs:
//! the dependence function, the extremal coefficient, the population value of
//! the rescaled madogram `D(c)` (exact in the common-shape case, numerical in
//! general), its minimiser in `c`, and the `(alpha, shape-ratio)` surface of
//! minimal dissimilarities.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quad::{adaptive_simpson, QuadratureConfig};

/// Frechet-type GEV margin `F(x) = exp(-(x / sigma)^(-1/xi))`
/// with location fixed at 0 and positive shape.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GevMargin {
    pub sigma: f64,
    pub xi: f64,
}

impl GevMargin {
    pub fn new(sigma: f64, xi: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
        }
        if !(xi.is_finite() && xi > 0.0) {
            return Err(Error::Domain(format!("xi must be positive, got {xi}")));
        }
        Ok(Self { sigma, xi })
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        (-(x / self.sigma).powf(-1.0 / self.xi)).exp()
    }

    /// Inverse CDF: `sigma * (-ln u)^(-xi)` for `u` in (0, 1).
    pub fn quantile(&self, u: f64) -> f64 {
        self.sigma * (-u.ln()).powf(-self.xi)
    }
}

/// A bivariate GEV pair with logistic dependence of strength `alpha`
/// (`alpha -> 0` full dependence, `alpha = 1` independence).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BivariateGevSpec {
    pub m1: GevMargin,
    pub m2: GevMargin,
    pub alpha: f64,
}

impl BivariateGevSpec {
    pub fn new(m1: GevMargin, m2: GevMargin, alpha: f64) -> Result<Self> {
        validate_alpha(alpha)?;
        Ok(Self { m1, m2, alpha })
    }
}

fn validate_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )));
    }
    Ok(())
}

/// Logistic dependence function `V(x, y) = (x^(-1/alpha) + y^(-1/alpha))^alpha`.
///
/// Homogeneous of order -1 and bounded by
/// `max(1/x, 1/y) <= V(x, y) <= 1/x + 1/y`.
pub fn logistic_v(x: f64, y: f64, alpha: f64) -> Result<f64> {
    if !(x > 0.0 && y > 0.0) {
        return Err(Error::Domain(format!(
            "V arguments must be positive, got ({x}, {y})"
        )));
    }
    validate_alpha(alpha)?;
    Ok(logistic_v_unchecked(x, y, alpha))
}

#[inline]
fn logistic_v_unchecked(x: f64, y: f64, alpha: f64) -> f64 {
    (x.powf(-1.0 / alpha) + y.powf(-1.0 / alpha)).powf(alpha)
}

/// Invert `d = theta / (theta + 1) - 1/2` to the extremal coefficient
/// `theta = (1 + 2d) / (1 - 2d)`; maps `[0, 1/6]` onto `[1, 2]`.
pub fn extremal_coefficient_from_d(d: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&d) {
        return Err(Error::Domain(format!(
            "d must lie in [0, 1/2), got {d}"
        )));
    }
    Ok((1.0 + 2.0 * d) / (1.0 - 2.0 * d))
}

/// `a12 = (c * sigma1 / sigma2)^(-1/xi2)` and `a21 = (sigma2 / (c * sigma1))^(-1/xi1)`.
fn rescale_coefficients(spec: &BivariateGevSpec, c: f64) -> Result<(f64, f64)> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::InvalidScale { c });
    }
    let ratio = c * spec.m1.sigma / spec.m2.sigma;
    let a12 = ratio.powf(-1.0 / spec.m2.xi);
    let a21 = ratio.recip().powf(-1.0 / spec.m1.xi);
    if !a12.is_finite() || !a21.is_finite() || a12 <= 0.0 || a21 <= 0.0 {
        return Err(Error::Domain(format!(
            "rescale coefficients out of floating range at c = {c} (a12 = {a12}, a21 = {a21})"
        )));
    }
    Ok((a12, a21))
}

/// Exact `D(c)` when the two shapes coincide:
/// `D = theta_c / (theta_c + 1) - 1/(2(1 + a12)) - 1/(2(1 + a21))`
/// with `theta_c = V(a12, a21)` and `a21 = 1/a12`. Minimised at
/// `c = sigma2 / sigma1` for the logistic family.
pub fn theoretical_d_homogeneous(spec: &BivariateGevSpec, c: f64) -> Result<f64> {
    if spec.m1.xi != spec.m2.xi {
        return Err(Error::ShapeMismatch {
            xi1: spec.m1.xi,
            xi2: spec.m2.xi,
        });
    }
    let (a12, a21) = rescale_coefficients(spec, c)?;
    let theta = logistic_v_unchecked(a12, a21, spec.alpha);
    Ok(theta / (theta + 1.0) - 0.5 / (1.0 + a12) - 0.5 / (1.0 + a21))
}

/// Laplace transform `E[exp(-a W)]` of a Weibull variable with survival
/// `P(W > w) = exp(-w^kappa)`.
///
/// For `kappa <= 1` the substitution `t = w^kappa` maps the weight to a
/// standard exponential: `E = int_0^inf exp(-a t^(1/kappa)) exp(-t) dt`,
/// smooth at the origin because `1/kappa >= 1`. For `kappa > 1` the density
/// form `int kappa w^(kappa-1) exp(-w^kappa) exp(-a w) dw` is the smooth
/// one. Both are truncated where either exponential factor falls below
/// `exp(-52)`, which bounds the dropped tail by the same amount.
fn weibull_laplace(a: f64, kappa: f64, quad: &QuadratureConfig) -> Result<f64> {
    debug_assert!(a > 0.0 && kappa > 0.0);
    const LOG_TAIL: f64 = 52.0;
    if kappa <= 1.0 {
        // a * t^(1/kappa) reaches LOG_TAIL at t = (LOG_TAIL / a)^kappa
        let log_cut = kappa * (LOG_TAIL / a).ln();
        let cut = if log_cut > 700.0 {
            f64::INFINITY
        } else {
            log_cut.exp()
        };
        let upper = LOG_TAIL.min(cut);
        let inv = 1.0 / kappa;
        adaptive_simpson(
            |t| (-a * t.powf(inv)).exp() * (-t).exp(),
            0.0,
            upper,
            quad,
        )
    } else {
        let cut_exp = LOG_TAIL / a;
        let cut_weibull = (LOG_TAIL.ln() / kappa).exp();
        let upper = cut_exp.min(cut_weibull);
        adaptive_simpson(
            |w| kappa * w.powf(kappa - 1.0) * (-w.powf(kappa)).exp() * (-a * w).exp(),
            0.0,
            upper,
            quad,
        )
    }
}

/// Population `D(c)` for arbitrary positive shapes, by quadrature of
///
/// `D = int_0^1 (1 - exp{-V[(a12/(-ln u))^(xi2/xi1), (a21/(-ln u))^(xi1/xi2)]}) du
///      - 1/2 E[exp(-a12 W1)] - 1/2 E[exp(-a21 W2)]`
///
/// where `W1 = Z1^(-xi1/xi2)` for unit-Frechet `Z1`, so
/// `P(W1 > w) = exp(-w^(xi2/xi1))`, and symmetrically for `W2`.
/// Reduces to [`theoretical_d_homogeneous`] when the shapes coincide.
pub fn theoretical_d_general(
    spec: &BivariateGevSpec,
    c: f64,
    quad: &QuadratureConfig,
) -> Result<f64> {
    quad.validate()?;
    let (a12, a21) = rescale_coefficients(spec, c)?;
    let e12 = spec.m2.xi / spec.m1.xi;
    let e21 = spec.m1.xi / spec.m2.xi;
    let alpha = spec.alpha;

    let joint = adaptive_simpson(
        |u| {
            if u <= 0.0 {
                return 1.0;
            }
            if u >= 1.0 {
                return 0.0;
            }
            let l = -u.ln();
            let x = (a12 / l).powf(e12);
            let y = (a21 / l).powf(e21);
            // saturates correctly at the ends: V -> inf gives 1, V -> 0 gives 0
            1.0 - (-logistic_v_unchecked(x, y, alpha)).exp()
        },
        0.0,
        1.0,
        quad,
    )?;
    let l1 = weibull_laplace(a12, e12, quad)?;
    let l2 = weibull_laplace(a21, e21, quad)?;
    Ok(joint - 0.5 * l1 - 0.5 * l2)
}

/// Minimise `D(c)` over `c` in `[c_lo, c_hi]`: a coarse log-spaced scan to
/// bracket the minimum, then golden-section in log c. Returns `(c*, D(c*))`.
pub fn minimize_theoretical_d(
    spec: &BivariateGevSpec,
    quad: &QuadratureConfig,
    c_lo: f64,
    c_hi: f64,
) -> Result<(f64, f64)> {
    if !(c_lo > 0.0 && c_lo < c_hi && c_hi.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "bad c bracket [{c_lo}, {c_hi}]"
        )));
    }
    const SCAN: usize = 33;
    let lo = c_lo.ln();
    let hi = c_hi.ln();
    let step = (hi - lo) / (SCAN - 1) as f64;
    let mut best_idx = 0;
    let mut best_val = f64::INFINITY;
    for i in 0..SCAN {
        let c = (lo + step * i as f64).exp();
        let v = theoretical_d_general(spec, c, quad)?;
        if v < best_val {
            best_val = v;
            best_idx = i;
        }
    }
    let mut a = lo + step * best_idx.saturating_sub(1) as f64;
    let mut b = (lo + step * (best_idx + 1) as f64).min(hi);

    // golden-section on the bracketing interval
    let inv_phi = 0.5 * (5.0f64.sqrt() - 1.0);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = theoretical_d_general(spec, x1.exp(), quad)?;
    let mut f2 = theoretical_d_general(spec, x2.exp(), quad)?;
    for _ in 0..40 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = theoretical_d_general(spec, x1.exp(), quad)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = theoretical_d_general(spec, x2.exp(), quad)?;
        }
        if b - a < 1e-10 {
            break;
        }
    }
    let c_star = (0.5 * (a + b)).exp();
    let d = theoretical_d_general(spec, c_star, quad)?;
    Ok((c_star, d.min(best_val)))
}

/// One cell of the minimal-dissimilarity surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceCell {
    pub alpha: f64,
    pub ratio: f64,
    /// `D(c*)` at this (dependence, shape-ratio) combination.
    pub d: f64,
}

pub const SURFACE_HEADER: &str = "alpha,ratio,d";

/// Minimal dissimilarity `D(c*)` over a grid of logistic strengths and shape
/// ratios `xi1/xi2` at fixed `xi2` and unit scales. Along `ratio = 1` the
/// value equals the closed form `theta/(theta+1) - 1/2`. Cells are computed
/// in parallel; output order is row-major in (alpha, ratio).
pub fn dissimilarity_surface(
    alphas: &[f64],
    ratios: &[f64],
    xi2: f64,
    quad: &QuadratureConfig,
) -> Result<Vec<SurfaceCell>> {
    if alphas.is_empty() || ratios.is_empty() {
        return Err(Error::InvalidConfig("empty surface grid".into()));
    }
    for &a in alphas {
        validate_alpha(a)?;
    }
    for &r in ratios {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::Domain(format!("shape ratio must be positive, got {r}")));
        }
    }
    let cells: Vec<(f64, f64)> = alphas
        .iter()
        .flat_map(|&a| ratios.iter().map(move |&r| (a, r)))
        .collect();
    cells
        .par_iter()
        .map(|&(alpha, ratio)| {
            let spec = BivariateGevSpec::new(
                GevMargin::new(1.0, xi2 * ratio)?,
                GevMargin::new(1.0, xi2)?,
                alpha,
            )?;
            let (_, d) = minimize_theoretical_d(&spec, quad, 0.02, 50.0)?;
            Ok(SurfaceCell { alpha, ratio, d })
        })
        .collect()
}

/// Closed-form minimum on the homogeneous slice: `2^alpha/(2^alpha + 1) - 1/2`.
pub fn homogeneous_minimum(alpha: f64) -> Result<f64> {
    validate_alpha(alpha)?;
    let theta = 2f64.powf(alpha);
    Ok(theta / (theta + 1.0) - 0.5)
}
