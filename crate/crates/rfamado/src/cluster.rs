//! Partitioning around medoids on a dissimilarity matrix, silhouette
//! scoring, and the temporal-shuffle ablation that quantifies how much the
//! spatial dependence contributes to the clustering.
//!
//! Classic PAM: a greedy BUILD phase followed by best-swap-first SWAP
//! iterations. The triangle inequality is never assumed. All tie-breaking is
//! by lowest index so the output is deterministic; candidate swaps are
//! evaluated in parallel and reduced with a total order on
//! (cost, candidate, slot).

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::dataset::{shuffle_in_time, Dataset};
use crate::error::{Error, Result};
use crate::madogram::{dissimilarity_matrix, CStarConfig, DissimilarityMatrix};

/// A hard clustering: one label per point, one medoid per cluster.
///
/// Invariants: every label is in `[0, k)`, medoid `m` of cluster `c` has
/// `labels[m] == c`, and `total_cost` (when present) is exactly the sum of
/// each point's dissimilarity to its medoid.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub labels: Vec<usize>,
    pub medoids: Vec<usize>,
    /// Sum of point-to-medoid dissimilarities; `None` for partitions loaded
    /// from files that do not carry costs.
    pub total_cost: Option<f64>,
    pub k: usize,
}

impl Partition {
    pub fn new(
        labels: Vec<usize>,
        medoids: Vec<usize>,
        total_cost: Option<f64>,
    ) -> Result<Self> {
        let k = medoids.len();
        if k == 0 {
            return Err(Error::InvalidK {
                k: 0,
                p: labels.len(),
            });
        }
        for (c, &m) in medoids.iter().enumerate() {
            let label = *labels.get(m).ok_or(Error::IncompatiblePartitions(format!(
                "medoid index {m} out of range"
            )))?;
            if label != c {
                return Err(Error::IncompatiblePartitions(format!(
                    "medoid {m} of cluster {c} carries label {label}"
                )));
            }
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::IncompatiblePartitions(format!(
                "label {bad} out of range for k = {k}"
            )));
        }
        Ok(Self {
            labels,
            medoids,
            total_cost,
            k,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Apply a relabeling permutation: cluster `c` becomes `perm[c]`.
    /// Grouping structure and cost are unchanged.
    pub fn relabeled(&self, perm: &[usize]) -> Result<Partition> {
        if perm.len() != self.k {
            return Err(Error::IncompatiblePartitions(format!(
                "permutation of length {} for k = {}",
                perm.len(),
                self.k
            )));
        }
        let mut seen = vec![false; self.k];
        for &t in perm {
            if t >= self.k || seen[t] {
                return Err(Error::IncompatiblePartitions("not a permutation".into()));
            }
            seen[t] = true;
        }
        let labels = self.labels.iter().map(|&l| perm[l]).collect();
        let mut medoids = vec![0usize; self.k];
        for (c, &m) in self.medoids.iter().enumerate() {
            medoids[perm[c]] = m;
        }
        Ok(Partition {
            labels,
            medoids,
            total_cost: self.total_cost,
            k: self.k,
        })
    }

    /// The medoid point serving point `i`.
    pub fn medoid_of(&self, i: usize) -> usize {
        self.medoids[self.labels[i]]
    }
}

/// Assign every point to its nearest medoid (ties to the lowest cluster
/// index) and total the cost in ascending point order. A medoid always goes
/// to its own cluster, even under exact distance ties, so no cluster can
/// come out empty.
fn assign(m: &DissimilarityMatrix, medoids: &[usize]) -> (Vec<usize>, f64) {
    let p = m.p();
    let mut labels = vec![usize::MAX; p];
    for (c, &med) in medoids.iter().enumerate() {
        labels[med] = c;
    }
    let mut cost = 0.0;
    for (i, label) in labels.iter_mut().enumerate() {
        if *label != usize::MAX {
            continue; // medoid: own cluster, zero cost
        }
        let mut best_c = 0usize;
        let mut best_d = f64::INFINITY;
        for (c, &med) in medoids.iter().enumerate() {
            let d = m.d_rfa(i, med);
            if d < best_d {
                best_d = d;
                best_c = c;
            }
        }
        *label = best_c;
        cost += best_d;
    }
    (labels, cost)
}

/// Greedy BUILD: start from the point minimising total dissimilarity, then
/// repeatedly add the point that lowers the assignment cost the most
/// (ties to the lowest point index).
fn build_phase(m: &DissimilarityMatrix, k: usize) -> Vec<usize> {
    let p = m.p();
    let mut medoids: Vec<usize> = Vec::with_capacity(k);

    // first medoid: argmin of row sums
    let mut best = (f64::INFINITY, 0usize);
    for i in 0..p {
        let row: f64 = (0..p).map(|j| m.d_rfa(i, j)).sum();
        if row < best.0 {
            best = (row, i);
        }
    }
    medoids.push(best.1);

    let mut nearest: Vec<f64> = (0..p).map(|j| m.d_rfa(best.1, j)).collect();
    while medoids.len() < k {
        let mut cand = (f64::INFINITY, usize::MAX);
        for i in 0..p {
            if medoids.contains(&i) {
                continue;
            }
            let cost: f64 = (0..p).map(|j| nearest[j].min(m.d_rfa(i, j))).sum();
            if cost < cand.0 {
                cand = (cost, i);
            }
        }
        let chosen = cand.1;
        medoids.push(chosen);
        for (j, near) in nearest.iter_mut().enumerate() {
            *near = near.min(m.d_rfa(chosen, j));
        }
    }
    medoids
}

/// PAM with a recorded cost trace: the cost after BUILD and after each
/// applied swap. The trace is strictly decreasing.
pub fn pam_with_trace(m: &DissimilarityMatrix, k: usize) -> Result<(Partition, Vec<f64>)> {
    let p = m.p();
    if k == 0 || k > p {
        return Err(Error::InvalidK { k, p });
    }

    let mut medoids = build_phase(m, k);
    let (mut labels, mut cost) = assign(m, &medoids);
    let mut trace = vec![cost];

    loop {
        let is_medoid: Vec<bool> = {
            let mut v = vec![false; p];
            for &mi in &medoids {
                v[mi] = true;
            }
            v
        };
        let candidates: Vec<(usize, usize)> = (0..p)
            .filter(|&h| !is_medoid[h])
            .flat_map(|h| (0..k).map(move |slot| (h, slot)))
            .collect();

        // (cost, h, slot): total order, so the parallel reduction is
        // deterministic for any work split
        let best = candidates
            .par_iter()
            .map(|&(h, slot)| {
                let mut trial = medoids.clone();
                trial[slot] = h;
                let (_, c) = assign(m, &trial);
                (c, h, slot)
            })
            .min_by(|a, b| {
                a.0.partial_cmp(&b.0)
                    .unwrap()
                    .then(a.1.cmp(&b.1))
                    .then(a.2.cmp(&b.2))
            });

        match best {
            Some((c, h, slot)) if c < cost => {
                medoids[slot] = h;
                let (new_labels, new_cost) = assign(m, &medoids);
                labels = new_labels;
                cost = new_cost;
                trace.push(cost);
            }
            _ => break,
        }
    }

    Ok((
        Partition {
            labels,
            medoids,
            total_cost: Some(cost),
            k,
        },
        trace,
    ))
}

/// Partitioning around medoids (BUILD + best-swap-first SWAP).
pub fn pam(m: &DissimilarityMatrix, k: usize) -> Result<Partition> {
    pam_with_trace(m, k).map(|(p, _)| p)
}

/// Mean silhouette width. Per point: `(b - a) / max(a, b)` with `a` the mean
/// dissimilarity to the point's own cluster (excluding itself) and `b` the
/// smallest mean dissimilarity to any other cluster. Singletons contribute
/// 0, as does the degenerate `a = b = 0` case.
pub fn silhouette(m: &DissimilarityMatrix, part: &Partition) -> Result<f64> {
    let p = m.p();
    if part.len() != p {
        return Err(Error::IncompatiblePartitions(format!(
            "partition over {} points, matrix over {p}",
            part.len()
        )));
    }
    if part.k < 2 {
        return Err(Error::InvalidK { k: part.k, p });
    }
    let sizes = part.cluster_sizes();
    if sizes.contains(&0) {
        return Err(Error::IncompatiblePartitions("empty cluster".into()));
    }

    let mut total = 0.0;
    for i in 0..p {
        let own = part.labels[i];
        if sizes[own] == 1 {
            continue; // singleton: contributes 0
        }
        let mut sums = vec![0.0f64; part.k];
        for j in 0..p {
            if j != i {
                sums[part.labels[j]] += m.d_rfa(i, j);
            }
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..part.k)
            .filter(|&c| c != own)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / p as f64)
}

/// Outcome of clustering the original data and a temporally shuffled copy.
#[derive(Debug, Clone)]
pub struct AblationReport {
    pub original: Partition,
    pub shuffled: Partition,
    /// Dissimilarity of each point to its own medoid, original data.
    pub d_original: Vec<f64>,
    /// Same, on the shuffled data under the shuffled partition.
    pub d_shuffled: Vec<f64>,
    /// Fraction of points whose original value is strictly lower.
    pub fraction_original_lower: f64,
    pub seed: u64,
}

/// Run matrix + PAM on `d` and on `shuffle_in_time(d, seed)`, and compare
/// point-to-medoid dissimilarities. Shuffling destroys the temporal pairing
/// (hence the spatial dependence) while keeping every margin, so a fraction
/// above 1/2 measures how much dependence lowers the dissimilarity.
pub fn shuffle_ablation(
    d: &Dataset,
    k: usize,
    seed: u64,
    cfg: &CStarConfig,
    threads: usize,
    prescale: bool,
) -> Result<AblationReport> {
    let run = |data: &Dataset| -> Result<(Partition, Vec<f64>)> {
        let m = dissimilarity_matrix(data, cfg, threads, prescale)?;
        let part = pam(&m, k)?;
        let dists = (0..m.p()).map(|i| m.d_rfa(i, part.medoid_of(i))).collect();
        Ok((part, dists))
    };
    let (original, d_original) = run(d)?;
    let shuffled_data = shuffle_in_time(d, seed);
    let (shuffled, d_shuffled) = run(&shuffled_data)?;
    let lower = d_original
        .iter()
        .zip(&d_shuffled)
        .filter(|&(&a, &b)| a < b)
        .count();
    let fraction_original_lower = lower as f64 / d.len() as f64;
    Ok(AblationReport {
        original,
        shuffled,
        d_original,
        d_shuffled,
        fraction_original_lower,
        seed,
    })
}

pub const PARTITION_HEADER: &str = "point_id,cluster,is_medoid";

/// Write a partition as `point_id,cluster,is_medoid` rows.
pub fn write_partition_csv(
    part: &Partition,
    point_ids: &[String],
    writer: &mut impl Write,
) -> Result<()> {
    if point_ids.len() != part.len() {
        return Err(Error::IncompatiblePartitions(format!(
            "{} ids for {} points",
            point_ids.len(),
            part.len()
        )));
    }
    let io_err = |e: std::io::Error| Error::Csv(e.to_string());
    writeln!(writer, "{PARTITION_HEADER}").map_err(io_err)?;
    let medoid_set: std::collections::BTreeSet<usize> = part.medoids.iter().copied().collect();
    for (i, id) in point_ids.iter().enumerate() {
        writeln!(writer, "{id},{},{}", part.labels[i], medoid_set.contains(&i)).map_err(io_err)?;
    }
    Ok(())
}

pub fn save_partition(
    part: &Partition,
    point_ids: &[String],
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut buf = Vec::new();
    write_partition_csv(part, point_ids, &mut buf)?;
    std::fs::write(path.as_ref(), buf).map_err(|source| Error::Io {
        path: path.as_ref().to_path_buf(),
        source,
    })
}

/// Read a partition CSV; returns the point ids in file order and the
/// partition (without costs).
pub fn read_partition_csv(reader: impl Read) -> Result<(Vec<String>, Partition)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Csv(e.to_string()))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != PARTITION_HEADER {
        return Err(Error::BadHeader {
            expected: PARTITION_HEADER.into(),
            got: header,
        });
    }
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    let mut medoid_rows = Vec::new();
    for record in rdr.records() {
        let r = record.map_err(|e| Error::Csv(e.to_string()))?;
        if r.len() != 3 {
            return Err(Error::Csv(format!("expected 3 fields, got {}", r.len())));
        }
        let label: usize = r[1]
            .trim()
            .parse()
            .map_err(|_| Error::Csv(format!("bad cluster `{}`", &r[1])))?;
        let is_medoid = match r[2].trim() {
            "true" => true,
            "false" => false,
            other => return Err(Error::Csv(format!("bad boolean `{other}`"))),
        };
        if is_medoid {
            medoid_rows.push((label, ids.len()));
        }
        ids.push(r[0].to_string());
        labels.push(label);
    }
    let k = labels.iter().max().map_or(0, |&m| m + 1);
    let mut medoids = vec![usize::MAX; k];
    for (label, idx) in medoid_rows {
        if medoids[label] != usize::MAX {
            return Err(Error::IncompatiblePartitions(format!(
                "two medoids for cluster {label}"
            )));
        }
        medoids[label] = idx;
    }
    if medoids.contains(&usize::MAX) {
        return Err(Error::IncompatiblePartitions(
            "missing medoid for some cluster".into(),
        ));
    }
    let part = Partition::new(labels, medoids, None)?;
    Ok((ids, part))
}

pub fn load_partition(path: impl AsRef<Path>) -> Result<(Vec<String>, Partition)> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_partition_csv(file)
}
