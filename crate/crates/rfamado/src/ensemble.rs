//! Combining partitions across models: label alignment by permutation
//! search, the central (consensus) partition with membership probabilities,
//! and the comparison of two central partitions with per-point change flags.

use std::io::{Read, Write};
use std::path::Path;

use itertools::Itertools;

use crate::cluster::Partition;
use crate::error::{Error, Result};

/// Exhaustive alignment is k! work; beyond this it is refused.
pub const MAX_ALIGN_K: usize = 8;

/// Find the relabeling permutation of `target` minimising the Hamming
/// disagreement with `reference`. Returns `(perm, disagreement)` where
/// target label `t` is renamed to `perm[t]`. All `k!` permutations are
/// tried in lexicographic order and ties keep the lexicographically
/// smallest permutation.
pub fn align_labels(reference: &[usize], target: &[usize], k: usize) -> Result<(Vec<usize>, usize)> {
    if reference.len() != target.len() {
        return Err(Error::IncompatiblePartitions(format!(
            "{} vs {} points",
            reference.len(),
            target.len()
        )));
    }
    if k > MAX_ALIGN_K {
        return Err(Error::AlignmentTooLarge { k, max: MAX_ALIGN_K });
    }
    if k == 0 {
        return Err(Error::InvalidK { k, p: reference.len() });
    }
    if let Some(&bad) = reference.iter().chain(target).find(|&&l| l >= k) {
        return Err(Error::IncompatiblePartitions(format!(
            "label {bad} out of range for k = {k}"
        )));
    }

    // contingency table: mismatches for permutation pi are
    // p - sum_t table[t][pi[t]]
    let mut table = vec![vec![0usize; k]; k];
    for (&r, &t) in reference.iter().zip(target) {
        table[t][r] += 1;
    }

    let mut best_perm: Vec<usize> = (0..k).collect();
    let mut best_agree = best_perm
        .iter()
        .enumerate()
        .map(|(t, &r)| table[t][r])
        .sum::<usize>();
    for perm in (0..k).permutations(k) {
        let agree: usize = perm.iter().enumerate().map(|(t, &r)| table[t][r]).sum();
        if agree > best_agree {
            best_agree = agree;
            best_perm = perm;
        }
    }
    Ok((best_perm, reference.len() - best_agree))
}

/// An aligned partition together with the permutation that produced it.
#[derive(Debug, Clone)]
pub struct Alignment {
    pub relabeled: Partition,
    /// Target label `t` was renamed to `permutation[t]`.
    pub permutation: Vec<usize>,
    pub disagreement: usize,
}

/// Relabel `target` to match `reference` as closely as possible.
/// The grouping structure of `target` is preserved exactly.
pub fn align_partitions(reference: &Partition, target: &Partition) -> Result<Alignment> {
    if reference.k != target.k {
        return Err(Error::IncompatiblePartitions(format!(
            "k = {} vs k = {}",
            reference.k, target.k
        )));
    }
    let (permutation, disagreement) = align_labels(&reference.labels, &target.labels, target.k)?;
    let relabeled = target.relabeled(&permutation)?;
    Ok(Alignment {
        relabeled,
        permutation,
        disagreement,
    })
}

/// Consensus over aligned model partitions.
///
/// Per point: the modal cluster across models, its probability
/// `count / m` (exactly representable whenever the count is), and a tie
/// flag. Partitions produced by [`central_partition`] also carry the full
/// count table and the aligned inputs; partitions read back from CSV are
/// summary-only (`m = 0`, empty counts).
#[derive(Debug, Clone, PartialEq)]
pub struct CentralPartition {
    pub k: usize,
    /// Number of models combined; 0 for summary-only values loaded from CSV.
    pub m: usize,
    pub modal: Vec<usize>,
    pub probability: Vec<f64>,
    pub tie: Vec<bool>,
    /// Per point, per cluster: number of aligned models voting for it.
    pub counts: Vec<Vec<u32>>,
    pub aligned: Vec<Partition>,
}

impl CentralPartition {
    pub fn len(&self) -> usize {
        self.modal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modal.is_empty()
    }
}

/// Build the central partition of `parts`.
///
/// The first partition seeds the consensus labels; each subsequent
/// partition is aligned against the running consensus (per-point majority
/// over everything aligned so far, ties to the lowest cluster id) before
/// being added. Input order matters in principle, so callers fix it
/// (the CLI sorts by file name).
pub fn central_partition(parts: &[Partition]) -> Result<CentralPartition> {
    let m = parts.len();
    if m == 0 {
        return Err(Error::IncompatiblePartitions("no partitions given".into()));
    }
    let p = parts[0].len();
    let k = parts[0].k;
    for part in parts {
        if part.len() != p || part.k != k {
            return Err(Error::IncompatiblePartitions(format!(
                "expected {p} points and k = {k}, got {} and k = {}",
                part.len(),
                part.k
            )));
        }
    }

    let mut counts = vec![vec![0u32; k]; p];
    let mut aligned: Vec<Partition> = Vec::with_capacity(m);
    let modal_of = |counts: &[Vec<u32>], i: usize| -> usize {
        let row = &counts[i];
        let best = *row.iter().max().unwrap();
        row.iter().position(|&c| c == best).unwrap() // lowest id wins ties
    };

    for (t, part) in parts.iter().enumerate() {
        let next = if t == 0 {
            part.clone()
        } else {
            let consensus: Vec<usize> = (0..p).map(|i| modal_of(&counts, i)).collect();
            let (perm, _) = align_labels(&consensus, &part.labels, k)?;
            part.relabeled(&perm)?
        };
        for (i, &l) in next.labels.iter().enumerate() {
            counts[i][l] += 1;
        }
        aligned.push(next);
    }

    let mut modal = Vec::with_capacity(p);
    let mut probability = Vec::with_capacity(p);
    let mut tie = Vec::with_capacity(p);
    for row in &counts {
        let best = *row.iter().max().unwrap();
        modal.push(row.iter().position(|&c| c == best).unwrap());
        probability.push(best as f64 / m as f64);
        tie.push(row.iter().filter(|&&c| c == best).count() > 1);
    }

    Ok(CentralPartition {
        k,
        m,
        modal,
        probability,
        tie,
        counts,
        aligned,
    })
}

/// Per-cluster bookkeeping of a central-partition comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterDelta {
    pub cluster: usize,
    /// Points whose modal cluster became this one.
    pub gained: usize,
    /// Points whose modal cluster left this one.
    pub lost: usize,
    /// Change in mean modal-probability mass carried by this cluster.
    pub mass_delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    /// Per point: modal cluster differs between the two central partitions.
    pub changed: Vec<bool>,
    /// Relabeling applied to the second (factual) side before comparing.
    pub permutation: Vec<usize>,
    pub clusters: Vec<ClusterDelta>,
}

impl ComparisonReport {
    pub fn changed_count(&self) -> usize {
        self.changed.iter().filter(|&&c| c).count()
    }
}

/// Compare a factual central partition against a counterfactual reference.
///
/// The factual modal labels are first aligned to the counterfactual ones;
/// a point is flagged as changed when its aligned modal cluster differs.
pub fn compare_central(
    counterfactual: &CentralPartition,
    factual: &CentralPartition,
) -> Result<ComparisonReport> {
    if counterfactual.len() != factual.len() {
        return Err(Error::IncompatiblePartitions(format!(
            "{} vs {} points",
            counterfactual.len(),
            factual.len()
        )));
    }
    if counterfactual.k != factual.k {
        return Err(Error::IncompatiblePartitions(format!(
            "k = {} vs k = {}",
            counterfactual.k, factual.k
        )));
    }
    let k = counterfactual.k;
    let p = counterfactual.len();
    let (permutation, _) = align_labels(&counterfactual.modal, &factual.modal, k)?;
    let factual_modal: Vec<usize> = factual.modal.iter().map(|&l| permutation[l]).collect();

    let changed: Vec<bool> = (0..p)
        .map(|i| counterfactual.modal[i] != factual_modal[i])
        .collect();

    let mut clusters = Vec::with_capacity(k);
    for c in 0..k {
        let gained = (0..p)
            .filter(|&i| factual_modal[i] == c && counterfactual.modal[i] != c)
            .count();
        let lost = (0..p)
            .filter(|&i| counterfactual.modal[i] == c && factual_modal[i] != c)
            .count();
        let mass = |modal: &[usize], prob: &[f64]| -> f64 {
            modal
                .iter()
                .zip(prob)
                .filter(|&(&l, _)| l == c)
                .map(|(_, &pr)| pr)
                .sum::<f64>()
                / p as f64
        };
        let mass_delta = mass(&factual_modal, &factual.probability)
            - mass(&counterfactual.modal, &counterfactual.probability);
        clusters.push(ClusterDelta {
            cluster: c,
            gained,
            lost,
            mass_delta,
        });
    }

    Ok(ComparisonReport {
        changed,
        permutation,
        clusters,
    })
}

pub const CENTRAL_HEADER: &str = "point_id,modal_cluster,probability,tie_flag";
pub const CHANGES_HEADER: &str = "point_id,changed";

pub fn write_central_csv(
    central: &CentralPartition,
    point_ids: &[String],
    writer: &mut impl Write,
) -> Result<()> {
    if point_ids.len() != central.len() {
        return Err(Error::IncompatiblePartitions(format!(
            "{} ids for {} points",
            point_ids.len(),
            central.len()
        )));
    }
    let io_err = |e: std::io::Error| Error::Csv(e.to_string());
    writeln!(writer, "{CENTRAL_HEADER}").map_err(io_err)?;
    for (i, id) in point_ids.iter().enumerate() {
        writeln!(
            writer,
            "{id},{},{},{}",
            central.modal[i], central.probability[i], central.tie[i]
        )
        .map_err(io_err)?;
    }
    Ok(())
}

pub fn save_central(
    central: &CentralPartition,
    point_ids: &[String],
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut buf = Vec::new();
    write_central_csv(central, point_ids, &mut buf)?;
    std::fs::write(path.as_ref(), buf).map_err(|source| Error::Io {
        path: path.as_ref().to_path_buf(),
        source,
    })
}

/// Read a central partition back; `k` is taken as one past the highest
/// modal label and the result is summary-only (no counts, no aligned parts).
pub fn read_central_csv(reader: impl Read) -> Result<(Vec<String>, CentralPartition)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Csv(e.to_string()))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != CENTRAL_HEADER {
        return Err(Error::BadHeader {
            expected: CENTRAL_HEADER.into(),
            got: header,
        });
    }
    let mut ids = Vec::new();
    let mut modal = Vec::new();
    let mut probability = Vec::new();
    let mut tie = Vec::new();
    for record in rdr.records() {
        let r = record.map_err(|e| Error::Csv(e.to_string()))?;
        if r.len() != 4 {
            return Err(Error::Csv(format!("expected 4 fields, got {}", r.len())));
        }
        ids.push(r[0].to_string());
        modal.push(
            r[1].trim()
                .parse()
                .map_err(|_| Error::Csv(format!("bad cluster `{}`", &r[1])))?,
        );
        probability.push(
            r[2].trim()
                .parse()
                .map_err(|_| Error::Csv(format!("bad probability `{}`", &r[2])))?,
        );
        tie.push(match r[3].trim() {
            "true" => true,
            "false" => false,
            other => return Err(Error::Csv(format!("bad boolean `{other}`"))),
        });
    }
    if ids.is_empty() {
        return Err(Error::IncompatiblePartitions("empty central partition".into()));
    }
    let k = modal.iter().max().map_or(0, |&m| m + 1);
    Ok((
        ids,
        CentralPartition {
            k,
            m: 0,
            modal,
            probability,
            tie,
            counts: Vec::new(),
            aligned: Vec::new(),
        },
    ))
}

pub fn load_central(path: impl AsRef<Path>) -> Result<(Vec<String>, CentralPartition)> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_central_csv(file)
}

pub fn write_changes_csv(
    report: &ComparisonReport,
    point_ids: &[String],
    writer: &mut impl Write,
) -> Result<()> {
    if point_ids.len() != report.changed.len() {
        return Err(Error::IncompatiblePartitions(format!(
            "{} ids for {} points",
            point_ids.len(),
            report.changed.len()
        )));
    }
    let io_err = |e: std::io::Error| Error::Csv(e.to_string());
    writeln!(writer, "{CHANGES_HEADER}").map_err(io_err)?;
    for (id, &changed) in point_ids.iter().zip(&report.changed) {
        writeln!(writer, "{id},{changed}").map_err(io_err)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels_only(labels: Vec<usize>, k: usize) -> Partition {
        // synthetic partitions for alignment tests: pick the first point of
        // each cluster as its medoid
        let mut medoids = vec![usize::MAX; k];
        for (i, &l) in labels.iter().enumerate() {
            if medoids[l] == usize::MAX {
                medoids[l] = i;
            }
        }
        Partition::new(labels, medoids, None).unwrap()
    }

    #[test]
    fn worked_alignment_example() {
        // 1-based {1 1 1 2 2 3} vs {3 3 3 1 1 2}: target clusters (1,2,3)
        // rename to (2,3,1), i.e. the cycle written (1,3,2); disagreement 0.
        let reference = vec![0, 0, 0, 1, 1, 2];
        let target = vec![2, 2, 2, 0, 0, 1];
        let (perm, disagreement) = align_labels(&reference, &target, 3).unwrap();
        assert_eq!(disagreement, 0);
        assert_eq!(perm, vec![1, 2, 0]);
        let relabeled: Vec<usize> = target.iter().map(|&l| perm[l]).collect();
        assert_eq!(relabeled, reference);
    }

    #[test]
    fn identity_alignment() {
        let part = labels_only(vec![0, 1, 2, 1, 0], 3);
        let a = align_partitions(&part, &part).unwrap();
        assert_eq!(a.permutation, vec![0, 1, 2]);
        assert_eq!(a.disagreement, 0);
        assert_eq!(a.relabeled.labels, part.labels);
    }

    /// Brute force over permutations written independently of align_labels
    /// (recursive generation, direct disagreement count).
    fn brute_force_disagreement(reference: &[usize], target: &[usize], k: usize) -> usize {
        fn perms(k: usize) -> Vec<Vec<usize>> {
            fn rec(remaining: &mut Vec<usize>, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
                if remaining.is_empty() {
                    out.push(cur.clone());
                    return;
                }
                for idx in 0..remaining.len() {
                    let v = remaining.remove(idx);
                    cur.push(v);
                    rec(remaining, cur, out);
                    cur.pop();
                    remaining.insert(idx, v);
                }
            }
            let mut out = Vec::new();
            rec(&mut (0..k).collect(), &mut Vec::new(), &mut out);
            out
        }
        perms(k)
            .into_iter()
            .map(|perm| {
                reference
                    .iter()
                    .zip(target)
                    .filter(|&(&r, &t)| r != perm[t])
                    .count()
            })
            .min()
            .unwrap()
    }

    #[test]
    fn alignment_matches_brute_force() {
        let mut rng = crate::rng::SplitMix64::new(13);
        for _ in 0..50 {
            let k = 2 + rng.next_below(3) as usize;
            let n = 5 + rng.next_below(20) as usize;
            let reference: Vec<usize> = (0..n).map(|_| rng.next_below(k as u64) as usize).collect();
            let target: Vec<usize> = (0..n).map(|_| rng.next_below(k as u64) as usize).collect();
            let (_, got) = align_labels(&reference, &target, k).unwrap();
            assert_eq!(got, brute_force_disagreement(&reference, &target, k));
        }
    }

    #[test]
    fn alignment_disagreement_is_symmetric() {
        let mut rng = crate::rng::SplitMix64::new(14);
        for _ in 0..30 {
            let k = 2 + rng.next_below(4) as usize;
            let n = 6 + rng.next_below(15) as usize;
            let a: Vec<usize> = (0..n).map(|_| rng.next_below(k as u64) as usize).collect();
            let b: Vec<usize> = (0..n).map(|_| rng.next_below(k as u64) as usize).collect();
            let (_, ab) = align_labels(&a, &b, k).unwrap();
            let (_, ba) = align_labels(&b, &a, k).unwrap();
            assert_eq!(ab, ba);
        }
    }

    #[test]
    fn alignment_k_cap() {
        let labels = vec![0usize; 4];
        assert!(matches!(
            align_labels(&labels, &labels, 9),
            Err(Error::AlignmentTooLarge { .. })
        ));
    }

    #[test]
    fn central_vote_split_six_nine_one() {
        // point 0 receives votes 6/9/1 for clusters 0/1/2 across 16 models;
        // points 1..3 anchor the three clusters so alignment is the identity.
        let mut parts = Vec::new();
        for t in 0..16 {
            let label0 = if t < 6 {
                0
            } else if t < 15 {
                1
            } else {
                2
            };
            parts.push(labels_only(vec![label0, 0, 1, 2], 3));
        }
        let central = central_partition(&parts).unwrap();
        assert_eq!(central.modal[0], 1);
        assert_eq!(central.probability[0], 9.0 / 16.0);
        assert!(!central.tie[0]);
        assert_eq!(central.counts[0], vec![6, 9, 1]);
        for i in 1..4 {
            assert_eq!(central.probability[i], 1.0);
        }
    }

    #[test]
    fn central_vote_tie_flagged_and_resolved_low() {
        // point 0 split 2/2 between clusters 0 and 1 across four models
        let parts: Vec<Partition> = [0usize, 0, 1, 1]
            .iter()
            .map(|&l| labels_only(vec![l, 0, 1], 2))
            .collect();
        let central = central_partition(&parts).unwrap();
        assert!(central.tie[0]);
        assert_eq!(central.modal[0], 0); // lowest cluster id wins
        assert_eq!(central.probability[0], 0.5);
        assert!(!central.tie[1] && !central.tie[2]);
    }

    #[test]
    fn central_single_partition_is_itself() {
        let part = labels_only(vec![0, 1, 1, 0, 1], 2);
        let central = central_partition(std::slice::from_ref(&part)).unwrap();
        assert_eq!(central.modal, part.labels);
        assert!(central.probability.iter().all(|&p| p == 1.0));
        assert_eq!(central.m, 1);
    }

    #[test]
    fn central_of_permuted_copies_has_probability_one() {
        let base = labels_only(vec![0, 0, 1, 1, 2, 2, 0], 3);
        let perms: [[usize; 3]; 4] = [[0, 1, 2], [1, 2, 0], [2, 0, 1], [1, 0, 2]];
        let parts: Vec<Partition> = perms.iter().map(|p| base.relabeled(p).unwrap()).collect();
        let central = central_partition(&parts).unwrap();
        assert!(central.probability.iter().all(|&p| p == 1.0));
        assert_eq!(central.modal, base.labels);
    }

    #[test]
    fn central_invariant_under_common_relabeling() {
        // models agree on most points so every alignment optimum is unique
        // (with heavy ties the lexicographic tie-break need not commute with
        // a common relabeling)
        let k = 3;
        let base: Vec<usize> = vec![0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2];
        let parts: Vec<Partition> = (0..5)
            .map(|t| {
                let mut labels = base.clone();
                labels[t] = (base[t] + 1 + t % 2) % k; // small per-model noise
                labels_only(labels, k)
            })
            .collect();
        let central = central_partition(&parts).unwrap();

        let perm = [2usize, 0, 1];
        let relabeled: Vec<Partition> = parts.iter().map(|p| p.relabeled(&perm).unwrap()).collect();
        let central2 = central_partition(&relabeled).unwrap();
        // same grouping of points and identical probabilities
        assert_eq!(central.probability, central2.probability);
        assert_eq!(central.tie, central2.tie);
        for i in 0..central.len() {
            for j in 0..central.len() {
                assert_eq!(
                    central.modal[i] == central.modal[j],
                    central2.modal[i] == central2.modal[j]
                );
            }
        }
    }

    #[test]
    fn membership_fractions_sum_to_one() {
        let parts: Vec<Partition> = vec![
            labels_only(vec![0, 1, 1, 0], 2),
            labels_only(vec![0, 0, 1, 1], 2),
            labels_only(vec![1, 0, 1, 0], 2),
        ];
        let central = central_partition(&parts).unwrap();
        for (i, row) in central.counts.iter().enumerate() {
            assert_eq!(row.iter().sum::<u32>() as usize, central.m);
            let max = *row.iter().max().unwrap() as f64 / central.m as f64;
            assert_eq!(central.probability[i], max);
            assert!(central.probability[i] >= 1.0 / central.m as f64);
        }
    }

    fn summary(modal: Vec<usize>, k: usize) -> CentralPartition {
        let p = modal.len();
        CentralPartition {
            k,
            m: 0,
            modal,
            probability: vec![1.0; p],
            tie: vec![false; p],
            counts: Vec::new(),
            aligned: Vec::new(),
        }
    }

    #[test]
    fn compare_identical_central_partitions() {
        let a = summary(vec![0, 0, 1, 1, 2], 3);
        let report = compare_central(&a, &a).unwrap();
        assert_eq!(report.changed_count(), 0);
        assert!(report.clusters.iter().all(|c| c.gained == 0 && c.lost == 0));
    }

    #[test]
    fn compare_single_flip() {
        let a = summary(vec![0, 0, 1, 1, 2], 3);
        let mut b = a.clone();
        b.modal[4] = 1;
        let report = compare_central(&a, &b).unwrap();
        assert_eq!(report.changed, vec![false, false, false, false, true]);
        assert_eq!(report.clusters[1].gained, 1);
        assert_eq!(report.clusters[2].lost, 1);
    }

    #[test]
    fn compare_realigns_before_flagging() {
        let a = summary(vec![0, 0, 1, 1, 2], 3);
        // same grouping under a rotated labeling: nothing truly changed
        let b = summary(vec![1, 1, 2, 2, 0], 3);
        let report = compare_central(&a, &b).unwrap();
        assert_eq!(report.changed_count(), 0);
    }

    #[test]
    fn compare_boundary_row_shift() {
        // 4 x 4 grid flattened row-major, two horizontal bands; the factual
        // band boundary moves down one row
        let band = |row_split: usize| -> Vec<usize> {
            (0..16).map(|i| usize::from(i / 4 >= row_split)).collect()
        };
        let cf = summary(band(2), 2);
        let f = summary(band(3), 2);
        let report = compare_central(&cf, &f).unwrap();
        let changed_rows: Vec<usize> = (0..16).filter(|&i| report.changed[i]).collect();
        assert_eq!(changed_rows, vec![8, 9, 10, 11]); // exactly the shifted row
    }

    #[test]
    fn central_csv_round_trip() {
        let parts: Vec<Partition> = vec![
            labels_only(vec![0, 1, 1, 0], 2),
            labels_only(vec![0, 1, 0, 0], 2),
        ];
        let central = central_partition(&parts).unwrap();
        let ids: Vec<String> = (0..4).map(|i| format!("g{i}")).collect();
        let mut buf = Vec::new();
        write_central_csv(&central, &ids, &mut buf).unwrap();
        let (ids2, central2) = read_central_csv(buf.as_slice()).unwrap();
        assert_eq!(ids, ids2);
        assert_eq!(central2.modal, central.modal);
        assert_eq!(central2.probability, central.probability);
        assert_eq!(central2.tie, central.tie);
        assert_eq!(central2.m, 0);
    }
}
