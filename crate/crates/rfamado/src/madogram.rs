//! Empirical CDFs, the classical F-madogram, the rescaled (RFA) madogram
//! estimator and the search for the optimal rescaling constant `c*`, plus
//! the pairwise dissimilarity matrix over a dataset.
//!
//! All estimators are computed on an integer backbone: each empirical-CDF
//! evaluation is an integer count `#{j : y_j <= x}`, and a madogram value is
//! a sum of absolute count differences divided by `2 n^2`. Working with
//! counts keeps the exact identities of the estimator exact in floating
//! point as well: the swap symmetry `D(c; y1, y2) = D(1/c; y2, y1)`, the
//! homogeneity zero `D(lambda) = 0` for `y2 = lambda * y1`, and the triangle
//! bound relating the two madograms all hold at the integer level.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::dataset::{rescale_by_mean, Dataset, GridSeries};
use crate::error::{Error, Result};

/// Empirical distribution function `F(x) = #{i : v_i <= x} / n`.
///
/// Right-continuous step function: 0 below the minimum, 1 at and above the
/// maximum. No small-sample correction is applied here (see
/// [`CStarConfig::plus_one_correction`] for the `n/(n+1)` variant).
#[derive(Debug, Clone)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::TooFewObservations { min: 1, got: 0 });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite value in sample".into()));
        }
        let mut sorted = values.to_vec();
        sorted.sort_unstable_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    pub fn n(&self) -> usize {
        self.sorted.len()
    }

    /// `#{i : v_i <= x}`.
    pub fn count_le(&self, x: f64) -> usize {
        count_le(&self.sorted, x)
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        self.count_le(x) as f64 / self.n() as f64
    }

    pub fn sorted_values(&self) -> &[f64] {
        &self.sorted
    }
}

#[inline]
fn count_le(sorted: &[f64], x: f64) -> usize {
    sorted.partition_point(|&v| v <= x)
}

fn sorted_copy(values: &[f64]) -> Vec<f64> {
    let mut s = values.to_vec();
    s.sort_unstable_by(f64::total_cmp);
    s
}

fn validate_pair(y1: &[f64], y2: &[f64]) -> Result<()> {
    if y1.len() != y2.len() {
        return Err(Error::LengthMismatch {
            left: y1.len(),
            right: y2.len(),
        });
    }
    if y1.len() < 2 {
        return Err(Error::TooFewObservations {
            min: 2,
            got: y1.len(),
        });
    }
    if y1.iter().chain(y2).any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite value in series".into()));
    }
    Ok(())
}

fn validate_scale(c: f64) -> Result<()> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::InvalidScale { c });
    }
    Ok(())
}

/// Integer ranks `n * F(y_i)` of each observation within its own sample.
pub fn rank_counts(y: &[f64]) -> Vec<u32> {
    let sorted = sorted_copy(y);
    y.iter().map(|&x| count_le(&sorted, x) as u32).collect()
}

/// The two count vectors behind the rescaled madogram at scale `c`:
/// `cdf2_at_cy1[i] = #{j : y2_j <= c * y1_i}` (that is, `n * F2(c * y1_i)`) and
/// `cdf1_at_y2_over_c[i] = #{j : c * y1_j <= y2_i}`, the count form of
/// `n * F1(y2_i / c)` written without a division so that a pair constructed
/// as exact multiples stays exact.
#[derive(Debug, Clone)]
pub struct PairCounts {
    pub cdf2_at_cy1: Vec<u32>,
    pub cdf1_at_y2_over_c: Vec<u32>,
}

pub fn pair_counts(y1: &[f64], y2: &[f64], c: f64) -> Result<PairCounts> {
    validate_pair(y1, y2)?;
    validate_scale(c)?;
    let sorted1 = sorted_copy(y1);
    let sorted2 = sorted_copy(y2);
    let mut scaled = Vec::new();
    Ok(pair_counts_presorted(y1, y2, &sorted1, &sorted2, c, &mut scaled))
}

fn pair_counts_presorted(
    y1: &[f64],
    y2: &[f64],
    sorted1: &[f64],
    sorted2: &[f64],
    c: f64,
    scaled: &mut Vec<f64>,
) -> PairCounts {
    // multiplying a sorted slice by c > 0 keeps it sorted
    scaled.clear();
    scaled.extend(sorted1.iter().map(|&x| c * x));
    let cdf2_at_cy1 = y1
        .iter()
        .map(|&x| count_le(sorted2, c * x) as u32)
        .collect();
    let cdf1_at_y2_over_c = y2.iter().map(|&x| count_le(scaled, x) as u32).collect();
    PairCounts {
        cdf2_at_cy1,
        cdf1_at_y2_over_c,
    }
}

#[inline]
fn abs_diff_total(a: &[u32], b: &[u32]) -> u64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x as i64 - y as i64).unsigned_abs())
        .sum()
}

#[inline]
fn value_from_total(total: u64, n: usize, plus_one: bool) -> f64 {
    let denom = if plus_one { n + 1 } else { n };
    total as f64 / (2.0 * n as f64 * denom as f64)
}

/// Classical F-madogram `(1/(2n)) * sum_i |F1(y1_i) - F2(y2_i)|`.
///
/// Rank-based, hence invariant under strictly increasing maps of each margin;
/// always in `[0, 1/2]`, 0 for identical series, ~1/6 for independent pairs.
pub fn fmadogram(y1: &[f64], y2: &[f64]) -> Result<f64> {
    fmadogram_with(y1, y2, false)
}

/// [`fmadogram`] with an optional `n+1` denominator in the empirical CDFs.
pub fn fmadogram_with(y1: &[f64], y2: &[f64], plus_one: bool) -> Result<f64> {
    validate_pair(y1, y2)?;
    let total = abs_diff_total(&rank_counts(y1), &rank_counts(y2));
    Ok(value_from_total(total, y1.len(), plus_one))
}

/// Rescaled madogram `(1/(2n)) * sum_i |F2(c * y1_i) - F1(y2_i / c)|`.
///
/// The `1/2` factor makes this the direct estimator of the population
/// quantity `0.5 * E|F2(cY1) - F1(Y2/c)|`. Exact swap symmetry holds:
/// `rfa_madogram_at(y1, y2, c) == rfa_madogram_at(y2, y1, 1/c)`.
pub fn rfa_madogram_at(y1: &[f64], y2: &[f64], c: f64) -> Result<f64> {
    rfa_madogram_at_with(y1, y2, c, false)
}

/// [`rfa_madogram_at`] with an optional `n+1` denominator in the empirical CDFs.
pub fn rfa_madogram_at_with(y1: &[f64], y2: &[f64], c: f64, plus_one: bool) -> Result<f64> {
    let counts = pair_counts(y1, y2, c)?;
    let total = abs_diff_total(&counts.cdf2_at_cy1, &counts.cdf1_at_y2_over_c);
    Ok(value_from_total(total, y1.len(), plus_one))
}

/// Search configuration for the optimal rescaling constant.
///
/// The grid has `grid_points` log-spaced values on `[c_min, c_max]`;
/// `grid_points` must be odd so that `c = 1` sits on the grid. When
/// `c_min * c_max = 1` (the default `[0.1, 10]`), the grid is built to be
/// symmetric under `c -> 1/c`. `refine_rounds` local refinements then halve
/// the bracket around the incumbent minimum.
#[derive(Debug, Clone)]
pub struct CStarConfig {
    pub c_min: f64,
    pub c_max: f64,
    pub grid_points: usize,
    pub refine_rounds: usize,
    /// Use `n + 1` as the empirical-CDF denominator instead of `n`.
    pub plus_one_correction: bool,
}

impl Default for CStarConfig {
    fn default() -> Self {
        Self {
            c_min: 0.1,
            c_max: 10.0,
            grid_points: 129,
            refine_rounds: 3,
            plus_one_correction: false,
        }
    }
}

impl CStarConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_min.is_finite() && self.c_max.is_finite() && self.c_min > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "c range must be positive and finite, got [{}, {}]",
                self.c_min, self.c_max
            )));
        }
        if self.c_min >= self.c_max {
            return Err(Error::InvalidConfig(format!(
                "c_min must be below c_max, got [{}, {}]",
                self.c_min, self.c_max
            )));
        }
        if self.grid_points < 3 {
            return Err(Error::InvalidConfig(format!(
                "need at least 3 grid points, got {}",
                self.grid_points
            )));
        }
        if self.grid_points.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "grid_points must be odd so c = 1 lies on the grid, got {}",
                self.grid_points
            )));
        }
        Ok(())
    }

    /// Log-spacing of the initial grid.
    pub fn grid_step(&self) -> f64 {
        (self.c_max.ln() - self.c_min.ln()) / (self.grid_points - 1) as f64
    }
}

/// The c-search grid. For a reciprocal range (`c_min * c_max = 1`) the lower
/// half is built as exact floating-point reciprocals of the upper half, so
/// the grid is closed under inversion.
pub fn c_grid(cfg: &CStarConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let k = cfg.grid_points;
    let reciprocal_range = (cfg.c_min * cfg.c_max - 1.0).abs() < 1e-12;
    let mut grid = Vec::with_capacity(k);
    if reciprocal_range {
        let m = (k - 1) / 2;
        let h = cfg.c_max.ln() / m as f64;
        let upper: Vec<f64> = (1..=m).map(|j| (j as f64 * h).exp()).collect();
        grid.extend(upper.iter().rev().map(|u| 1.0 / u));
        grid.push(1.0);
        grid.extend(upper);
    } else {
        let lo = cfg.c_min.ln();
        let hi = cfg.c_max.ln();
        for i in 0..k {
            grid.push((lo + (hi - lo) * i as f64 / (k - 1) as f64).exp());
        }
    }
    Ok(grid)
}

/// Result of the `c*` search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CStarResult {
    pub c_star: f64,
    pub d_rfa: f64,
    /// The initial-grid argmin landed on the first or last grid point.
    pub boundary: bool,
}

#[derive(Clone, Copy)]
struct Candidate {
    total: u64,
    abs_log: f64,
    c: f64,
}

impl Candidate {
    /// Ordering used for the argmin: value first, then smallest |log c|
    /// (prefer the least aggressive rescaling), then smallest c.
    fn beats(&self, other: &Candidate) -> bool {
        (self.total, self.abs_log, self.c) < (other.total, other.abs_log, other.c)
    }
}

struct PairEvaluator<'a> {
    y1: &'a [f64],
    y2: &'a [f64],
    sorted1: &'a [f64],
    sorted2: &'a [f64],
    scaled: Vec<f64>,
}

impl<'a> PairEvaluator<'a> {
    fn new(y1: &'a [f64], y2: &'a [f64], sorted1: &'a [f64], sorted2: &'a [f64]) -> Self {
        Self {
            y1,
            y2,
            sorted1,
            sorted2,
            scaled: Vec::with_capacity(y1.len()),
        }
    }

    fn total_at(&mut self, c: f64) -> u64 {
        self.scaled.clear();
        self.scaled.extend(self.sorted1.iter().map(|&x| c * x));
        let mut total: u64 = 0;
        for (&a, &b) in self.y1.iter().zip(self.y2) {
            let f2 = count_le(self.sorted2, c * a) as i64;
            let f1 = count_le(&self.scaled, b) as i64;
            total += (f2 - f1).unsigned_abs();
        }
        total
    }
}

/// Number of points evaluated per refinement round.
const REFINE_POINTS: usize = 17;

/// Grid argmin of the rescaled madogram over `c`, refined locally.
///
/// Deterministic: ties on the value go to the smallest `|log c|`, then the
/// smaller `c`. The returned `boundary` flag marks an argmin at the edge of
/// the initial grid. Series are expected to be pre-scaled to mean 1 (see the
/// dataset module); the search works on raw series too if the grid is wide
/// enough to contain the scale ratio.
pub fn optimal_c(y1: &[f64], y2: &[f64], cfg: &CStarConfig) -> Result<CStarResult> {
    validate_pair(y1, y2)?;
    let sorted1 = sorted_copy(y1);
    let sorted2 = sorted_copy(y2);
    optimal_c_presorted(y1, y2, &sorted1, &sorted2, cfg)
}

fn optimal_c_presorted(
    y1: &[f64],
    y2: &[f64],
    sorted1: &[f64],
    sorted2: &[f64],
    cfg: &CStarConfig,
) -> Result<CStarResult> {
    let grid = c_grid(cfg)?;
    let mut ev = PairEvaluator::new(y1, y2, sorted1, sorted2);

    let mut best = Candidate {
        total: u64::MAX,
        abs_log: f64::INFINITY,
        c: f64::INFINITY,
    };
    let mut best_idx = 0usize;
    for (idx, &c) in grid.iter().enumerate() {
        let cand = Candidate {
            total: ev.total_at(c),
            abs_log: c.ln().abs(),
            c,
        };
        if cand.beats(&best) {
            best = cand;
            best_idx = idx;
        }
    }
    let boundary = best_idx == 0 || best_idx == grid.len() - 1;

    // Local refinement: bracket one grid step around the incumbent, then
    // halve the bracket each round, always keeping the global best seen.
    let ln_min = cfg.c_min.ln();
    let ln_max = cfg.c_max.ln();
    let h = cfg.grid_step();
    let mut lo = (best.c.ln() - h).max(ln_min);
    let mut hi = (best.c.ln() + h).min(ln_max);
    for _ in 0..cfg.refine_rounds {
        for j in 0..REFINE_POINTS {
            let t = lo + (hi - lo) * j as f64 / (REFINE_POINTS - 1) as f64;
            let c = t.exp();
            let cand = Candidate {
                total: ev.total_at(c),
                abs_log: t.abs(),
                c,
            };
            if cand.beats(&best) {
                best = cand;
            }
        }
        let half = 0.25 * (hi - lo);
        let center = best.c.ln();
        lo = (center - half).max(ln_min);
        hi = (center + half).min(ln_max);
    }

    Ok(CStarResult {
        c_star: best.c,
        d_rfa: value_from_total(best.total, y1.len(), cfg.plus_one_correction),
        boundary,
    })
}

/// Both madograms for a pair, with the fitted rescaling constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairDissimilarity {
    pub d_fmad: f64,
    pub d_rfa: f64,
    pub c_star: f64,
    pub c_grid_hit_boundary: bool,
}

pub fn pair_dissimilarity(y1: &[f64], y2: &[f64], cfg: &CStarConfig) -> Result<PairDissimilarity> {
    validate_pair(y1, y2)?;
    let sorted1 = sorted_copy(y1);
    let sorted2 = sorted_copy(y2);
    pair_dissimilarity_presorted(y1, y2, &sorted1, &sorted2, cfg)
}

fn pair_dissimilarity_presorted(
    y1: &[f64],
    y2: &[f64],
    sorted1: &[f64],
    sorted2: &[f64],
    cfg: &CStarConfig,
) -> Result<PairDissimilarity> {
    let opt = optimal_c_presorted(y1, y2, sorted1, sorted2, cfg)?;
    let d_fmad = fmadogram_with(y1, y2, cfg.plus_one_correction)?;
    Ok(PairDissimilarity {
        d_fmad,
        d_rfa: opt.d_rfa,
        c_star: opt.c_star,
        c_grid_hit_boundary: opt.boundary,
    })
}

pub const MATRIX_HEADER: &str = "i,j,d_rfa,d_fmad,c_star,boundary";
pub const POINTS_HEADER: &str = "index,point_id,lat,lon,degenerate";

/// Symmetric p x p dissimilarity matrix with zero diagonal, stored as the
/// upper triangle of per-pair results. `c_star(j, i)` is defined as
/// `1 / c_star(i, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DissimilarityMatrix {
    point_ids: Vec<String>,
    /// (lat, lon) per point.
    coords: Vec<(f64, f64)>,
    /// Flags points whose series is a single atom (all values equal).
    degenerate: Vec<bool>,
    /// Upper triangle, row-major: (0,1), (0,2), ..., (p-2, p-1).
    pairs: Vec<PairDissimilarity>,
}

impl DissimilarityMatrix {
    pub fn p(&self) -> usize {
        self.point_ids.len()
    }

    pub fn point_ids(&self) -> &[String] {
        &self.point_ids
    }

    pub fn coords(&self) -> &[(f64, f64)] {
        &self.coords
    }

    pub fn is_degenerate(&self, i: usize) -> bool {
        self.degenerate[i]
    }

    fn tri_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < self.p());
        i * self.p() - i * (i + 1) / 2 + (j - i - 1)
    }

    pub fn pair(&self, i: usize, j: usize) -> Option<&PairDissimilarity> {
        if i == j {
            return None;
        }
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        Some(&self.pairs[self.tri_index(a, b)])
    }

    pub fn d_rfa(&self, i: usize, j: usize) -> f64 {
        self.pair(i, j).map_or(0.0, |p| p.d_rfa)
    }

    pub fn d_fmad(&self, i: usize, j: usize) -> f64 {
        self.pair(i, j).map_or(0.0, |p| p.d_fmad)
    }

    pub fn c_star(&self, i: usize, j: usize) -> f64 {
        match self.pair(i, j) {
            None => 1.0,
            Some(p) if i < j => p.c_star,
            Some(p) => 1.0 / p.c_star,
        }
    }

    pub fn boundary(&self, i: usize, j: usize) -> bool {
        self.pair(i, j).is_some_and(|p| p.c_grid_hit_boundary)
    }

    pub fn pairs(&self) -> &[PairDissimilarity] {
        &self.pairs
    }

    /// Build a matrix from a value function, for tests and loaded data.
    /// Validates symmetry, non-negativity and a zero diagonal; per-pair
    /// metadata is filled with neutral values.
    pub fn from_values(p: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut pairs = Vec::with_capacity(p * (p - 1) / 2);
        for i in 0..p {
            let d = f(i, i);
            if d != 0.0 {
                return Err(Error::InvalidMatrix(format!("nonzero diagonal at {i}: {d}")));
            }
            for j in (i + 1)..p {
                let d = f(i, j);
                if !(d.is_finite() && d >= 0.0) {
                    return Err(Error::InvalidMatrix(format!(
                        "negative or non-finite entry at ({i}, {j}): {d}"
                    )));
                }
                if f(j, i) != d {
                    return Err(Error::InvalidMatrix(format!("not symmetric at ({i}, {j})")));
                }
                pairs.push(PairDissimilarity {
                    d_fmad: d,
                    d_rfa: d,
                    c_star: 1.0,
                    c_grid_hit_boundary: false,
                });
            }
        }
        Ok(Self {
            point_ids: (0..p).map(|i| i.to_string()).collect(),
            coords: vec![(0.0, 0.0); p],
            degenerate: vec![false; p],
            pairs,
        })
    }

    pub fn write_csv(&self, writer: &mut impl Write) -> Result<()> {
        let io_err = |e: std::io::Error| Error::Csv(e.to_string());
        writeln!(writer, "{MATRIX_HEADER}").map_err(io_err)?;
        for i in 0..self.p() {
            for j in (i + 1)..self.p() {
                let pr = &self.pairs[self.tri_index(i, j)];
                writeln!(
                    writer,
                    "{i},{j},{},{},{},{}",
                    pr.d_rfa, pr.d_fmad, pr.c_star, pr.c_grid_hit_boundary
                )
                .map_err(io_err)?;
            }
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        std::fs::write(path.as_ref(), buf).map_err(|source| Error::Io {
            path: path.as_ref().to_path_buf(),
            source,
        })
    }

    pub fn write_points_csv(&self, writer: &mut impl Write) -> Result<()> {
        let io_err = |e: std::io::Error| Error::Csv(e.to_string());
        writeln!(writer, "{POINTS_HEADER}").map_err(io_err)?;
        for (i, id) in self.point_ids.iter().enumerate() {
            let (lat, lon) = self.coords[i];
            writeln!(writer, "{i},{id},{lat},{lon},{}", self.degenerate[i]).map_err(io_err)?;
        }
        Ok(())
    }

    pub fn save_points(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_points_csv(&mut buf)?;
        std::fs::write(path.as_ref(), buf).map_err(|source| Error::Io {
            path: path.as_ref().to_path_buf(),
            source,
        })
    }

    pub fn read_csv(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let header = rdr
            .headers()
            .map_err(|e| Error::Csv(e.to_string()))?
            .iter()
            .collect::<Vec<_>>()
            .join(",");
        if header != MATRIX_HEADER {
            return Err(Error::BadHeader {
                expected: MATRIX_HEADER.into(),
                got: header,
            });
        }
        let mut rows: Vec<(usize, usize, PairDissimilarity)> = Vec::new();
        let mut p = 0usize;
        for record in rdr.records() {
            let r = record.map_err(|e| Error::Csv(e.to_string()))?;
            if r.len() != 6 {
                return Err(Error::Csv(format!("expected 6 fields, got {}", r.len())));
            }
            let parse =
                |s: &str| -> Result<f64> { s.trim().parse().map_err(|_| Error::Csv(format!("bad number `{s}`"))) };
            let i: usize = r[0]
                .trim()
                .parse()
                .map_err(|_| Error::Csv(format!("bad index `{}`", &r[0])))?;
            let j: usize = r[1]
                .trim()
                .parse()
                .map_err(|_| Error::Csv(format!("bad index `{}`", &r[1])))?;
            if i >= j {
                return Err(Error::InvalidMatrix(format!(
                    "rows must have i < j, got ({i}, {j})"
                )));
            }
            let d_rfa = parse(&r[2])?;
            let d_fmad = parse(&r[3])?;
            let c_star = parse(&r[4])?;
            if d_rfa < 0.0 || d_fmad < 0.0 {
                return Err(Error::InvalidMatrix(format!(
                    "negative dissimilarity at ({i}, {j})"
                )));
            }
            if !(c_star.is_finite() && c_star > 0.0) {
                return Err(Error::InvalidMatrix(format!("bad c_star at ({i}, {j})")));
            }
            let boundary = match r[5].trim() {
                "true" => true,
                "false" => false,
                other => return Err(Error::Csv(format!("bad boolean `{other}`"))),
            };
            p = p.max(j + 1);
            rows.push((
                i,
                j,
                PairDissimilarity {
                    d_fmad,
                    d_rfa,
                    c_star,
                    c_grid_hit_boundary: boundary,
                },
            ));
        }
        if p < 2 {
            return Err(Error::InvalidMatrix("fewer than two points".into()));
        }
        let mut pairs: Vec<Option<PairDissimilarity>> = vec![None; p * (p - 1) / 2];
        for (i, j, pd) in rows {
            let idx = i * p - i * (i + 1) / 2 + (j - i - 1);
            if pairs[idx].replace(pd).is_some() {
                return Err(Error::InvalidMatrix(format!("duplicate pair ({i}, {j})")));
            }
        }
        let pairs = pairs
            .into_iter()
            .enumerate()
            .map(|(idx, v)| v.ok_or(Error::InvalidMatrix(format!("missing pair index {idx}"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            point_ids: (0..p).map(|i| i.to_string()).collect(),
            coords: vec![(0.0, 0.0); p],
            degenerate: vec![false; p],
            pairs,
        })
    }

    /// Attach point metadata from a points sidecar CSV.
    pub fn read_points_csv(&mut self, reader: impl Read) -> Result<()> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let header = rdr
            .headers()
            .map_err(|e| Error::Csv(e.to_string()))?
            .iter()
            .collect::<Vec<_>>()
            .join(",");
        if header != POINTS_HEADER {
            return Err(Error::BadHeader {
                expected: POINTS_HEADER.into(),
                got: header,
            });
        }
        let mut seen = vec![false; self.p()];
        for record in rdr.records() {
            let r = record.map_err(|e| Error::Csv(e.to_string()))?;
            if r.len() != 5 {
                return Err(Error::Csv(format!("expected 5 fields, got {}", r.len())));
            }
            let idx: usize = r[0]
                .trim()
                .parse()
                .map_err(|_| Error::Csv(format!("bad index `{}`", &r[0])))?;
            if idx >= self.p() {
                return Err(Error::InvalidMatrix(format!(
                    "point index {idx} out of range for p = {}",
                    self.p()
                )));
            }
            let lat: f64 = r[2].trim().parse().map_err(|_| Error::Csv("bad lat".into()))?;
            let lon: f64 = r[3].trim().parse().map_err(|_| Error::Csv("bad lon".into()))?;
            let degenerate = match r[4].trim() {
                "true" => true,
                "false" => false,
                other => return Err(Error::Csv(format!("bad boolean `{other}`"))),
            };
            self.point_ids[idx] = r[1].to_string();
            self.coords[idx] = (lat, lon);
            self.degenerate[idx] = degenerate;
            seen[idx] = true;
        }
        if seen.iter().any(|&s| !s) {
            return Err(Error::InvalidMatrix("points file does not cover all indices".into()));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>, points_path: Option<&Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut m = Self::read_csv(file)?;
        if let Some(pp) = points_path {
            let file = std::fs::File::open(pp).map_err(|source| Error::Io {
                path: pp.to_path_buf(),
                source,
            })?;
            m.read_points_csv(file)?;
        }
        Ok(m)
    }
}

/// Pairwise dissimilarity matrix over a dataset.
///
/// With `prescale` set (the default in the CLI), every series is first
/// divided by its mean so the `c*` search is conditioned around 1. All
/// `p(p-1)/2` pairs are computed independently across `threads` workers and
/// merged by index, so the result is bit-identical for any thread count.
pub fn dissimilarity_matrix(
    d: &Dataset,
    cfg: &CStarConfig,
    threads: usize,
    prescale: bool,
) -> Result<DissimilarityMatrix> {
    cfg.validate()?;
    if threads == 0 {
        return Err(Error::InvalidConfig("threads must be at least 1".into()));
    }
    let p = d.len();
    if p < 2 {
        return Err(Error::InvalidDataset(format!(
            "need at least two grid points, got {p}"
        )));
    }
    if d.n_years() < 2 {
        return Err(Error::TooFewObservations {
            min: 2,
            got: d.n_years(),
        });
    }

    let series: Vec<Vec<f64>> = if prescale {
        d.points
            .iter()
            .map(|s| rescale_by_mean(s).map(|r| r.values))
            .collect::<Result<_>>()?
    } else {
        d.points.iter().map(|s| s.values.clone()).collect()
    };
    let sorted: Vec<Vec<f64>> = series.iter().map(|v| sorted_copy(v)).collect();
    let degenerate: Vec<bool> = d.points.iter().map(GridSeries::is_degenerate).collect();

    let index_pairs: Vec<(usize, usize)> = (0..p)
        .flat_map(|i| ((i + 1)..p).map(move |j| (i, j)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let pairs: Vec<PairDissimilarity> = pool.install(|| {
        index_pairs
            .par_iter()
            .map(|&(i, j)| {
                pair_dissimilarity_presorted(&series[i], &series[j], &sorted[i], &sorted[j], cfg)
                    .map_err(|e| Error::PairFailure {
                        i,
                        j,
                        id_i: d.points[i].point_id.clone(),
                        id_j: d.points[j].point_id.clone(),
                        source: Box::new(e),
                    })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    Ok(DissimilarityMatrix {
        point_ids: d.point_ids(),
        coords: d.points.iter().map(|s| (s.lat, s.lon)).collect(),
        degenerate,
        pairs,
    })
}
