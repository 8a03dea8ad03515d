//! Acceptance suite: one test per criterion, each printing a single
//! PASS/FAIL line (run with `--nocapture` to see them). Tolerances are
//! pinned in the assertions.

use std::time::Instant;

use rfamado::cluster::{pam, pam_with_trace, shuffle_ablation, Partition};
use rfamado::dataset::{split_hemispheres, Dataset};
use rfamado::ensemble::{align_labels, central_partition};
use rfamado::gevtheory::{
    theoretical_d_general, theoretical_d_homogeneous, BivariateGevSpec,
    GevMargin,
};
use rfamado::madogram::{
    dissimilarity_matrix, optimal_c, pair_counts, rank_counts, rfa_madogram_at,
    CStarConfig, DissimilarityMatrix,
};
use rfamado::quad::QuadratureConfig;
use rfamado::rng::SplitMix64;
use rfamado::simulate::{sample_bivariate_logistic, SimCluster, SimGridSpec, SimMember};

fn report(n: usize, name: &str, ok: bool, detail: &str) {
    println!(
        "criterion {n} ({name}): {} - {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {n} ({name}) failed: {detail}");
}

fn bi_spec(sigma1: f64, xi1: f64, sigma2: f64, xi2: f64, alpha: f64) -> BivariateGevSpec {
    BivariateGevSpec::new(
        GevMargin::new(sigma1, xi1).unwrap(),
        GevMargin::new(sigma2, xi2).unwrap(),
        alpha,
    )
    .unwrap()
}

fn uniform_vec(rng: &mut SplitMix64, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| lo + (hi - lo) * rng.next_open01()).collect()
}

#[test]
fn criterion_1_closed_form_agreement() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for &alpha in &[0.01, 0.25, 0.5, 0.75, 1.0] {
        let spec = bi_spec(1.3, 0.1, 2.6, 0.1, alpha);
        let c = spec.m2.sigma / spec.m1.sigma;
        let d = theoretical_d_homogeneous(&spec, c).unwrap();
        let closed = 2f64.powf(alpha) / (2f64.powf(alpha) + 1.0) - 0.5;
        worst = worst.max((d - closed).abs());
    }
    let at_one = theoretical_d_homogeneous(&bi_spec(1.0, 0.1, 1.0, 0.1, 1.0), 1.0).unwrap();
    let near_zero = theoretical_d_homogeneous(&bi_spec(1.0, 0.1, 1.0, 0.1, 0.01), 1.0).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let ok = worst <= 1e-12
        && (at_one - 1.0 / 6.0).abs() <= 1e-12
        && near_zero < 0.004
        && elapsed < 1.0;
    report(
        1,
        "closed-form agreement",
        ok,
        &format!(
            "max |D - closed form| = {worst:.2e}, D(alpha=1) = {at_one:.12}, \
             D(alpha=0.01) = {near_zero:.6}, {elapsed:.2}s"
        ),
    );
}

#[test]
fn criterion_2_quadrature_vs_closed_form() {
    let start = Instant::now();
    let quad = QuadratureConfig::default();
    let alphas = [0.15, 0.35, 0.55, 0.75, 0.95];
    let cs = [0.5, 0.841, 1.414, 2.378, 4.0];
    let mut worst: f64 = 0.0;
    for &alpha in &alphas {
        for &c in &cs {
            let spec = bi_spec(1.0, 0.2, 1.3, 0.2, alpha);
            let exact = theoretical_d_homogeneous(&spec, c).unwrap();
            let numeric = theoretical_d_general(&spec, c, &quad).unwrap();
            worst = worst.max((exact - numeric).abs());
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let ok = worst <= 1e-6 && elapsed < 10.0;
    report(
        2,
        "quadrature vs closed form",
        ok,
        &format!("max deviation over 5x5 grid = {worst:.2e}, {elapsed:.2}s"),
    );
}

fn sample_moments(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let m2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m3 = values.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
    let m4 = values.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
}

#[test]
fn criterion_3_estimator_consistency_and_normality() {
    let start = Instant::now();
    let spec = bi_spec(1.0, 0.1, 1.0, 0.1, 0.5);
    let d_true = 2f64.sqrt() / (2f64.sqrt() + 1.0) - 0.5; // = 0.085786...

    let mean_abs_err = |n: usize, seeds: u64, seed0: u64| -> f64 {
        (0..seeds)
            .map(|s| {
                let (y1, y2) = sample_bivariate_logistic(&spec, n, seed0 + s);
                (rfa_madogram_at(&y1, &y2, 1.0).unwrap() - d_true).abs()
            })
            .sum::<f64>()
            / seeds as f64
    };
    let err_500 = mean_abs_err(500, 50, 10_000);
    let err_2000 = mean_abs_err(2000, 50, 20_000);
    let err_8000 = mean_abs_err(8000, 50, 30_000);
    let consistent = err_500 > err_2000 && err_2000 > err_8000 && err_8000 < 0.01;

    // root-n fluctuation over 200 replicates at n = 2000
    let n = 2000usize;
    let z: Vec<f64> = (0..200)
        .map(|r| {
            let (y1, y2) = sample_bivariate_logistic(&spec, n, 40_000 + r);
            (n as f64).sqrt() * (rfa_madogram_at(&y1, &y2, 1.0).unwrap() - d_true)
        })
        .collect();
    let (skew, exkurt) = sample_moments(&z);
    let normal = skew.abs() < 0.3 && exkurt.abs() < 0.6;

    let elapsed = start.elapsed().as_secs_f64();
    let ok = consistent && normal && elapsed < 120.0;
    report(
        3,
        "estimator consistency",
        ok,
        &format!(
            "mean |err| at n=500/2000/8000 = {err_500:.4}/{err_2000:.4}/{err_8000:.4}, \
             skewness = {skew:.3}, excess kurtosis = {exkurt:.3}, {elapsed:.1}s"
        ),
    );
}

#[test]
fn criterion_4_c_star_recovery() {
    let start = Instant::now();
    let spec = bi_spec(1.0, 0.1, 2.0, 0.1, 0.3);
    let cfg = CStarConfig::default();
    let mut hits = 0;
    let seeds = 50;
    for s in 0..seeds {
        let (y1, y2) = sample_bivariate_logistic(&spec, 5000, 70_000 + s);
        let r = optimal_c(&y1, &y2, &cfg).unwrap();
        if (1.8..=2.2).contains(&r.c_star) {
            hits += 1;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let ok = hits * 10 >= seeds * 9 && elapsed < 60.0;
    report(
        4,
        "c* recovery",
        ok,
        &format!("c* in [1.8, 2.2] for {hits}/{seeds} seeds, {elapsed:.1}s"),
    );
}

#[test]
fn criterion_5_exact_invariants() {
    let mut rng = SplitMix64::new(90_001);

    // swap symmetry, bit-exact
    let mut swap_ok = true;
    for _ in 0..1000 {
        let n = 2 + rng.next_below(40) as usize;
        let y1 = uniform_vec(&mut rng, n, 0.05, 6.0);
        let y2 = uniform_vec(&mut rng, n, 0.05, 6.0);
        let c = 0.02 + 25.0 * rng.next_open01();
        let a = rfa_madogram_at(&y1, &y2, c).unwrap();
        let b = rfa_madogram_at(&y2, &y1, 1.0 / c).unwrap();
        swap_ok &= a == b;
    }

    // homogeneity zero, exact
    let mut homog_ok = true;
    for _ in 0..200 {
        let n = 2 + rng.next_below(40) as usize;
        let lambda = 0.1 + 8.0 * rng.next_open01();
        let y1 = uniform_vec(&mut rng, n, 0.05, 6.0);
        let y2: Vec<f64> = y1.iter().map(|&v| lambda * v).collect();
        homog_ok &= rfa_madogram_at(&y1, &y2, lambda).unwrap() == 0.0;
    }

    // |d - D(c)| bound at the exact integer-count level, and the
    // max-decomposition identity on the float path
    let mut bound_ok = true;
    let mut decomp_ok = true;
    for _ in 0..1000 {
        let n = 2 + rng.next_below(30) as usize;
        let y1 = uniform_vec(&mut rng, n, 0.05, 8.0);
        let y2 = uniform_vec(&mut rng, n, 0.05, 8.0);
        let c = 0.02 + 20.0 * rng.next_open01();

        let counts = pair_counts(&y1, &y2, c).unwrap();
        let r1 = rank_counts(&y1);
        let r2 = rank_counts(&y2);
        let tot = |a: &[u32], b: &[u32]| -> i64 {
            a.iter()
                .zip(b)
                .map(|(&x, &y)| (x as i64 - y as i64).abs())
                .sum()
        };
        let t_d = tot(&counts.cdf2_at_cy1, &counts.cdf1_at_y2_over_c);
        let t_fmad = tot(&r1, &r2);
        let t_delta1 = tot(&counts.cdf2_at_cy1, &r1);
        let t_delta2 = tot(&r2, &counts.cdf1_at_y2_over_c);
        bound_ok &= (t_d - t_fmad).abs() <= t_delta1 + t_delta2;

        // |a - b| = 2 max(a, b) - a - b applied to the float cdf values
        let nf = n as f64;
        let via_max: f64 = counts
            .cdf2_at_cy1
            .iter()
            .zip(&counts.cdf1_at_y2_over_c)
            .map(|(&a, &b)| {
                let fa = a as f64 / nf;
                let fb = b as f64 / nf;
                2.0 * fa.max(fb) - fa - fb
            })
            .sum::<f64>()
            / (2.0 * nf);
        let direct = rfa_madogram_at(&y1, &y2, c).unwrap();
        decomp_ok &= (via_max - direct).abs() <= 1e-12;
    }

    let ok = swap_ok && homog_ok && bound_ok && decomp_ok;
    report(
        5,
        "exact invariants",
        ok,
        &format!(
            "swap symmetry {swap_ok}, homogeneity zero {homog_ok}, \
             distance-difference bound {bound_ok}, max-decomposition {decomp_ok}"
        ),
    );
}

fn brute_force_pam_cost(m: &DissimilarityMatrix, k: usize) -> f64 {
    fn rec(
        start: usize,
        m: &DissimilarityMatrix,
        k: usize,
        cur: &mut Vec<usize>,
        best: &mut f64,
    ) {
        if cur.len() == k {
            let cost: f64 = (0..m.p())
                .map(|i| {
                    cur.iter()
                        .map(|&med| m.d_rfa(i, med))
                        .fold(f64::INFINITY, f64::min)
                })
                .sum();
            if cost < *best {
                *best = cost;
            }
            return;
        }
        for i in start..m.p() {
            cur.push(i);
            rec(i + 1, m, k, cur, best);
            cur.pop();
        }
    }
    let mut best = f64::INFINITY;
    rec(0, m, k, &mut Vec::new(), &mut best);
    best
}

#[test]
#[allow(clippy::needless_range_loop)]
fn criterion_6_pam_oracle() {
    let mut rng = SplitMix64::new(90_002);
    let instances = 100;
    let mut optimal = 0;
    let mut never_below = true;
    let mut monotone = true;
    for _ in 0..instances {
        let p = 5 + rng.next_below(6) as usize; // 5..=10
        let k = 1 + rng.next_below(3) as usize; // 1..=3
        let mut vals = vec![vec![0.0; p]; p];
        for i in 0..p {
            for j in (i + 1)..p {
                let v = rng.next_open01();
                vals[i][j] = v;
                vals[j][i] = v;
            }
        }
        let m = DissimilarityMatrix::from_values(p, |i, j| vals[i][j]).unwrap();
        let (part, trace) = pam_with_trace(&m, k).unwrap();
        monotone &= trace.windows(2).all(|w| w[1] < w[0]);
        let cost = part.total_cost.unwrap();
        let opt = brute_force_pam_cost(&m, k);
        never_below &= cost >= opt;
        if (cost - opt).abs() <= 1e-12 * opt.max(1.0) {
            optimal += 1;
        }
    }
    let ok = never_below && monotone && optimal >= 90;
    report(
        6,
        "pam oracle",
        ok,
        &format!(
            "optimal on {optimal}/{instances}, never below optimum: {never_below}, \
             strictly decreasing cost: {monotone}"
        ),
    );
}

#[test]
fn criterion_7_ensemble_arithmetic() {
    // alignment of {1 1 1 2 2 3} with {3 3 3 1 1 2}: disagreement 0 through
    // renaming target clusters (1,2,3) to (2,3,1) - the cycle (1,3,2)
    let reference = vec![0usize, 0, 0, 1, 1, 2];
    let target = vec![2usize, 2, 2, 0, 0, 1];
    let (perm, disagreement) = align_labels(&reference, &target, 3).unwrap();
    let relabeled: Vec<usize> = target.iter().map(|&l| perm[l]).collect();
    let align_ok = disagreement == 0 && perm == vec![1, 2, 0] && relabeled == reference;

    // vote split 6/9/1 over 16 models -> cluster index 1 with P = 9/16
    let mut parts = Vec::new();
    for t in 0..16 {
        let label0 = if t < 6 { 0 } else if t < 15 { 1 } else { 2 };
        let labels = vec![label0, 0, 1, 2];
        let mut medoids = vec![usize::MAX; 3];
        for (i, &l) in labels.iter().enumerate().skip(1) {
            if medoids[l] == usize::MAX {
                medoids[l] = i;
            }
        }
        parts.push(Partition::new(labels, medoids, None).unwrap());
    }
    let central = central_partition(&parts).unwrap();
    let vote_ok = central.modal[0] == 1 && central.probability[0] == 9.0 / 16.0;

    let ok = align_ok && vote_ok;
    report(
        7,
        "ensemble arithmetic",
        ok,
        &format!(
            "permutation {perm:?} disagreement {disagreement}, \
             modal {} with probability {}",
            central.modal[0], central.probability[0]
        ),
    );
}

/// Two clusters per hemisphere, heterogeneous scales inside each cluster,
/// strong within-cluster dependence, independence across clusters.
fn planted_dataset(points_per_cluster: usize, years: usize, seed: u64) -> (Dataset, Vec<usize>) {
    let margins = [(1.0, 0.1), (2.0, 0.3), (1.5, 0.15), (0.8, 0.25)];
    let lat_of = |cluster: usize, idx: usize| -> f64 {
        let offs = idx as f64 * 30.0 / points_per_cluster as f64;
        match cluster {
            0 => 5.0 + offs,
            1 => 45.0 + offs,
            2 => -5.0 - offs,
            _ => -45.0 - offs,
        }
    };
    let clusters = (0..4)
        .map(|c| SimCluster {
            id: format!("c{c}"),
            alpha: 0.1,
            sigma: margins[c].0,
            xi: margins[c].1,
            members: (0..points_per_cluster)
                .map(|i| SimMember {
                    point_id: format!("c{c}_p{i:03}"),
                    lat: lat_of(c, i),
                    lon: (i % 72) as f64 * 5.0 - 180.0,
                    scale: 0.5 + 1.5 * i as f64 / points_per_cluster.max(2) as f64,
                })
                .collect(),
        })
        .collect();
    let spec = SimGridSpec {
        label: "planted".into(),
        years,
        start_year: 1850,
        clusters,
    };
    let d = rfamado::simulate::sample_grid(&spec, seed).unwrap();
    let truth = d
        .points
        .iter()
        .map(|p| p.point_id[1..2].parse::<usize>().unwrap())
        .collect();
    (d, truth)
}

#[test]
fn criterion_8_pipeline_recovery_and_ablation() {
    let start = Instant::now();
    let (d, truth) = planted_dataset(50, 150, 404);
    let cfg = CStarConfig::default();

    // hemispheric split, PAM with k = 2 per hemisphere, agreement vs truth
    let (north, south) = split_hemispheres(&d);
    let mut agree = 0usize;
    let mut total = 0usize;
    for hemi in [north, south] {
        let truth_h: Vec<usize> = hemi
            .points
            .iter()
            .map(|p| {
                let c = p.point_id[1..2].parse::<usize>().unwrap();
                c % 2 // cluster ids 0/1 within each hemisphere
            })
            .collect();
        let m = dissimilarity_matrix(&hemi, &cfg, 2, true).unwrap();
        let part = pam(&m, 2).unwrap();
        let (_, disagreement) = align_labels(&truth_h, &part.labels, 2).unwrap();
        agree += hemi.len() - disagreement;
        total += hemi.len();
    }
    let agreement = agree as f64 / total as f64;

    // dependence ablation over the full grid
    let ablation = shuffle_ablation(&d, 4, 2024, &cfg, 2, true).unwrap();
    let fraction = ablation.fraction_original_lower;

    let elapsed = start.elapsed().as_secs_f64();
    let ok = agreement >= 0.95 && fraction > 0.5 && elapsed < 300.0;
    let _ = truth;
    report(
        8,
        "pipeline recovery",
        ok,
        &format!(
            "label agreement {agreement:.3} (>= 0.95), \
             non-shuffled lower at {fraction:.3} of points (> 0.5), {elapsed:.1}s"
        ),
    );
}

#[test]
fn criterion_9_determinism_and_parallel_speedup() {
    let (d, _) = planted_dataset(75, 155, 505); // p = 300, n = 155
    let cfg = CStarConfig::default();

    let t0 = Instant::now();
    let m1 = dissimilarity_matrix(&d, &cfg, 1, true).unwrap();
    let t_single = t0.elapsed().as_secs_f64();

    let t0 = Instant::now();
    let m8 = dissimilarity_matrix(&d, &cfg, 8, true).unwrap();
    let t_eight = t0.elapsed().as_secs_f64();

    let identical = m1 == m8;
    let ratio = t_eight / t_single;
    let cores = std::thread::available_parallelism().map_or(0, |n| n.get());
    let ok = identical && ratio < 0.3;
    report(
        9,
        "determinism and speedup",
        ok,
        &format!(
            "bit-identical across thread counts: {identical}; \
             8-worker/1-worker wall-time ratio {ratio:.2} (need < 0.3) \
             [{t_eight:.1}s vs {t_single:.1}s on {cores} logical cpus]"
        ),
    );
}
