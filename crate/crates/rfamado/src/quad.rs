//! Globally adaptive Simpson quadrature.
//!
//! Panels carry a Richardson error estimate; the panel with the largest
//! estimate is split first, so the subdivision budget concentrates where the
//! integrand is hardest (endpoint singularities, sharp transitions) instead
//! of being spent uniformly.

use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Tolerance and work budget for the adaptive integrator.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    /// Maximum number of panel splits before giving up.
    pub max_subdivisions: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-8,
            max_subdivisions: 200,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.abs_tol.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "abs_tol must be positive, got {}",
                self.abs_tol
            )));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::InvalidConfig(
                "max_subdivisions must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

fn simpson(h: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    h / 6.0 * (fa + 4.0 * fm + fb)
}

/// One panel with the five function values needed to split it without
/// re-evaluation, its extrapolated estimate, and its error estimate.
struct Panel {
    a: f64,
    b: f64,
    fa: f64,
    flm: f64,
    fm: f64,
    frm: f64,
    fb: f64,
    estimate: f64,
    error: f64,
}

impl Panel {
    fn new<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, min_width: f64) -> Self {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let whole = simpson(b - a, fa, fm, fb);
        let halves = simpson(m - a, fa, flm, fm) + simpson(b - m, fm, frm, fb);
        let delta = halves - whole;
        // Panels at the width floor are accepted as-is: a jump discontinuity
        // otherwise never satisfies the error criterion, and for bounded
        // integrands such a panel contributes at most max|f| * min_width.
        let error = if b - a <= min_width {
            0.0
        } else {
            (delta / 15.0).abs()
        };
        Panel {
            a,
            b,
            fa,
            flm,
            fm,
            frm,
            fb,
            estimate: halves + delta / 15.0,
            error,
        }
    }
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error && self.a == other.a && self.b == other.b
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // largest error first; ties broken by position for determinism
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
            .then_with(|| other.b.total_cmp(&self.b))
    }
}

/// Integrate `f` over `[a, b]` to absolute tolerance `cfg.abs_tol`,
/// splitting at most `cfg.max_subdivisions` times.
///
/// Errors with [`Error::QuadratureNonConvergence`] when the split budget is
/// exhausted while the total error estimate still exceeds the tolerance.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    cfg.validate()?;
    if a == b {
        return Ok(0.0);
    }
    let min_width = (b - a) * f64::EPSILON;
    let fa = f(a);
    let fm = f(0.5 * (a + b));
    let fb = f(b);

    let mut heap = BinaryHeap::new();
    let first = Panel::new(&f, a, b, fa, fm, fb, min_width);
    let mut total_error = first.error;
    heap.push(first);

    let mut splits = 0usize;
    while total_error > cfg.abs_tol {
        if splits >= cfg.max_subdivisions {
            return Err(Error::QuadratureNonConvergence {
                subdivisions: cfg.max_subdivisions,
            });
        }
        let worst = heap.pop().expect("heap cannot be empty");
        total_error -= worst.error;
        let m = 0.5 * (worst.a + worst.b);
        let left = Panel::new(&f, worst.a, m, worst.fa, worst.flm, worst.fm, min_width);
        let right = Panel::new(&f, m, worst.b, worst.fm, worst.frm, worst.fb, min_width);
        total_error += left.error + right.error;
        heap.push(left);
        heap.push(right);
        splits += 1;
    }

    // drain in deterministic (heap) order so the sum is reproducible
    let mut value = 0.0;
    for panel in heap.into_sorted_vec() {
        value += panel.estimate;
    }
    Ok(value)
}
