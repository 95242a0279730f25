use std::collections::BTreeMap;

use rand_distr::{Distribution, Gamma};

use super::{LocalShard, Sample};
use crate::error::{Error, Result};
use crate::rng::{StreamKey, StreamTag};

pub const MAX_PARTITION_RETRIES: u64 = 1000;

/// Splits `samples` across `n_nodes` with per-group Dirichlet(omega)
/// proportions. `groups[r]` is the class (or proxy class) of sample `r`.
///
/// Each attempt draws, for every group in ascending id order, a proportion
/// vector `p ~ Dir(omega, ..., omega)` and gives node `k` the group's samples
/// in positions `[floor(n_c P_{k-1}), floor(n_c P_k))` where `P` is the
/// running sum of `p`. Attempts repeat until every node owns at least one
/// sample. Within a shard, samples are ordered by group then by original
/// position.
pub fn dirichlet_partition<T: Clone>(
    samples: Vec<Sample<T>>,
    groups: &[usize],
    omega: f64,
    n_nodes: usize,
    seed: u64,
) -> Result<Vec<LocalShard<T>>> {
    if groups.len() != samples.len() {
        return Err(Error::ContractViolation(format!(
            "{} group ids for {} samples",
            groups.len(),
            samples.len()
        )));
    }
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::ContractViolation(format!(
            "omega = {omega} must be > 0"
        )));
    }
    if n_nodes == 0 {
        return Err(Error::ContractViolation("n_nodes must be >= 1".into()));
    }
    if samples.len() < n_nodes {
        return Err(Error::PartitionFailure(format!(
            "{} samples cannot cover {n_nodes} nodes",
            samples.len()
        )));
    }

    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (r, &g) in groups.iter().enumerate() {
        members.entry(g).or_default().push(r);
    }
    let gamma = Gamma::new(omega, 1.0)
        .map_err(|e| Error::ContractViolation(format!("omega = {omega}: {e}")))?;

    for attempt in 0..MAX_PARTITION_RETRIES {
        let mut rng = StreamKey::global(seed, StreamTag::Partition, attempt).rng();
        let mut assignment: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
        let mut ok = true;
        for idx in members.values() {
            let draws: Vec<f64> = (0..n_nodes).map(|_| gamma.sample(&mut rng)).collect();
            let total: f64 = draws.iter().sum();
            if !(total > 0.0) || !total.is_finite() {
                ok = false;
                break;
            }
            let n_c = idx.len();
            let mut cum = 0.0;
            let mut start = 0;
            for (k, d) in draws.iter().enumerate() {
                cum += d / total;
                let end = if k + 1 == n_nodes {
                    n_c
                } else {
                    ((cum * n_c as f64).floor() as usize).clamp(start, n_c)
                };
                assignment[k].extend_from_slice(&idx[start..end]);
                start = end;
            }
        }
        if ok && assignment.iter().all(|a| !a.is_empty()) {
            return Ok(assignment
                .into_iter()
                .enumerate()
                .map(|(node_id, idx)| LocalShard {
                    node_id,
                    samples: idx.into_iter().map(|r| samples[r].clone()).collect(),
                })
                .collect());
        }
    }
    Err(Error::PartitionFailure(format!(
        "no partition with a sample on every node after {MAX_PARTITION_RETRIES} attempts"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labelled(per_class: usize, classes: usize) -> (Vec<Sample<f64>>, Vec<usize>) {
        let mut s = Vec::new();
        let mut g = Vec::new();
        for c in 0..classes {
            for r in 0..per_class {
                s.push(Sample {
                    features: vec![r as f64],
                    label: c as f64,
                });
                g.push(c);
            }
        }
        (s, g)
    }

    fn class_counts(shard: &LocalShard<f64>, classes: usize) -> Vec<usize> {
        let mut c = vec![0; classes];
        for s in &shard.samples {
            c[s.label as usize] += 1;
        }
        c
    }

    #[test]
    fn single_node_gets_everything() {
        let (s, g) = labelled(10, 3);
        let shards = dirichlet_partition(s.clone(), &g, 0.5, 1, 4).unwrap();
        assert_eq!(shards.len(), 1);
        assert_eq!(shards[0].samples, s);
    }

    #[test]
    fn partition_is_deterministic_and_complete() {
        let (s, g) = labelled(50, 4);
        let a = dirichlet_partition(s.clone(), &g, 0.3, 5, 11).unwrap();
        let b = dirichlet_partition(s, &g, 0.3, 5, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.iter().map(LocalShard::len).sum::<usize>(), 200);
        assert!(a.iter().all(|s| !s.is_empty()));
    }

    #[test]
    fn huge_omega_is_near_uniform() {
        for seed in 0..20 {
            let (s, g) = labelled(1000, 2);
            let shards = dirichlet_partition(s, &g, 1e6, 2, seed).unwrap();
            for sh in &shards {
                for c in class_counts(sh, 2) {
                    assert!((450..=550).contains(&c), "seed {seed}: {c}");
                }
            }
        }
    }

    /// Majority-class fraction of each node, for seeds `seeds`.
    fn majority_fractions(seeds: std::ops::Range<u64>, omega: f64) -> Vec<f64> {
        let mut out = Vec::new();
        for seed in seeds {
            let (s, g) = labelled(1000, 2);
            for sh in dirichlet_partition(s, &g, omega, 2, seed).unwrap() {
                let c = class_counts(&sh, 2);
                out.push(*c.iter().max().unwrap() as f64 / sh.len() as f64);
            }
        }
        out
    }

    fn median(mut v: Vec<f64>) -> f64 {
        v.sort_by(f64::total_cmp);
        let m = v.len() / 2;
        if v.len().is_multiple_of(2) {
            0.5 * (v[m - 1] + v[m])
        } else {
            v[m]
        }
    }

    #[test]
    fn small_omega_is_skewed() {
        // Dir(0.1) over two nodes puts a class almost entirely on one node,
        // but in about half the draws both classes land on the same node,
        // which leaves it near 0.5. The 20-seed median clears 0.8 in ~97% of
        // disjoint seed windows, so check the window pass rate rather than a
        // single hand-picked window.
        let windows = 50;
        let mut passing = 0;
        for w in 0..windows {
            if median(majority_fractions(w * 20..w * 20 + 20, 0.1)) >= 0.8 {
                passing += 1;
            }
        }
        assert!(passing * 10 >= windows * 9, "{passing}/{windows} windows");
        assert!(median(majority_fractions(0..windows * 20, 0.1)) >= 0.8);
        assert!(median(majority_fractions(0..20, 1e6)) < 0.55);
    }

    #[test]
    fn too_few_samples_fails() {
        let (s, g) = labelled(1, 2);
        assert!(matches!(
            dirichlet_partition(s, &g, 1.0, 3, 0),
            Err(Error::PartitionFailure(_))
        ));
    }
}
