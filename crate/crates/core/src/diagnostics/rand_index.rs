use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::TrajectoryDataset;
use crate::rng::derive_seed;
use crate::trajectories::{cluster, ClusterParams, Label};
use crate::{Error, Result};

/// Cluster labels aligned to a fixed subject ordering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    labels: Vec<i64>,
}

impl Partition {
    pub fn new(labels: Vec<i64>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidArgument("partition is empty".into()));
        }
        Ok(Self { labels })
    }

    pub fn from_labels(labels: &[Label]) -> Result<Self> {
        Self::new(labels.iter().map(|&l| l as i64).collect())
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

fn choose2(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

/// Pair counts derived from the contingency table of two partitions.
struct PairCounts {
    /// Σ C(n_ij, 2): pairs together in both.
    together_both: u64,
    /// Σ C(a_i, 2): pairs together in `a`.
    together_a: u64,
    /// Σ C(b_j, 2): pairs together in `b`.
    together_b: u64,
    /// C(n, 2).
    total: u64,
}

fn pair_counts(a: &Partition, b: &Partition) -> Result<PairCounts> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::InvalidArgument(
            "at least two subjects are needed to compare partitions".into(),
        ));
    }
    let mut cells: HashMap<(i64, i64), u64> = HashMap::new();
    let mut rows: HashMap<i64, u64> = HashMap::new();
    let mut cols: HashMap<i64, u64> = HashMap::new();
    for (&x, &y) in a.labels.iter().zip(&b.labels) {
        *cells.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    Ok(PairCounts {
        together_both: cells.values().map(|&c| choose2(c)).sum(),
        together_a: rows.values().map(|&c| choose2(c)).sum(),
        together_b: cols.values().map(|&c| choose2(c)).sum(),
        total: choose2(a.len() as u64),
    })
}

/// Fraction of subject pairs on which `a` and `b` agree (together in both or
/// apart in both).
pub fn rand_index(a: &Partition, b: &Partition) -> Result<f64> {
    let p = pair_counts(a, b)?;
    let apart_both = p.total + p.together_both - p.together_a - p.together_b;
    Ok((p.together_both + apart_both) as f64 / p.total as f64)
}

/// Hubert–Arabie adjusted Rand index. Returns 1 when the chance-corrected
/// denominator vanishes, which happens only when both partitions are the
/// same trivial partition (one cluster, or all singletons).
pub fn adjusted_rand(a: &Partition, b: &Partition) -> Result<f64> {
    let p = pair_counts(a, b)?;
    let index = p.together_both as f64;
    let sa = p.together_a as f64;
    let sb = p.together_b as f64;
    let expected = sa * sb / p.total as f64;
    let max_index = 0.5 * (sa + sb);
    let denom = max_index - expected;
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok((index - expected) / denom)
}

/// Seed of replicate `replicate` at cluster count `k`.
pub fn replicate_seed(master: u64, k: usize, replicate: usize) -> u64 {
    derive_seed(master, &[k as u64, replicate as u64])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRun {
    pub k: usize,
    /// 1-based.
    pub replicate: usize,
    pub seed: u64,
    pub assignments: Vec<Label>,
    pub live_clusters: usize,
    pub iterations: usize,
    pub converged: bool,
    pub truth_ari: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandEntry {
    pub k_a: usize,
    pub rep_a: usize,
    pub k_b: usize,
    pub rep_b: usize,
    pub ari: f64,
}

/// Pairwise adjusted Rand indices between replicate runs. Only pairs
/// `i < j` (in k-major run order) are stored; the full matrix is symmetric
/// with a unit diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandTable {
    pub runs: Vec<ReplicateRun>,
    pub entries: Vec<RandEntry>,
}

impl RandTable {
    /// Builds the table from already computed runs.
    pub fn from_runs(runs: Vec<ReplicateRun>) -> Result<Self> {
        let partitions = runs
            .iter()
            .map(|r| Partition::from_labels(&r.assignments))
            .collect::<Result<Vec<_>>>()?;
        let pairs: Vec<(usize, usize)> = (0..runs.len())
            .flat_map(|i| (i + 1..runs.len()).map(move |j| (i, j)))
            .collect();
        let entries = pairs
            .par_iter()
            .map(|&(i, j)| {
                adjusted_rand(&partitions[i], &partitions[j]).map(|ari| RandEntry {
                    k_a: runs[i].k,
                    rep_a: runs[i].replicate,
                    k_b: runs[j].k,
                    rep_b: runs[j].replicate,
                    ari,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { runs, entries })
    }

    /// Symmetric ARI matrix in run order.
    pub fn matrix(&self) -> Vec<Vec<f64>> {
        let n = self.runs.len();
        let mut m = vec![vec![1.0; n]; n];
        let mut it = self.entries.iter();
        for i in 0..n {
            for j in i + 1..n {
                let v = it.next().map(|e| e.ari).unwrap_or(f64::NAN);
                m[i][j] = v;
                m[j][i] = v;
            }
        }
        m
    }

    /// Mean pairwise ARI among the replicates of cluster count `k`.
    pub fn within_k_mean(&self, k: usize) -> Option<f64> {
        let vals: Vec<f64> = self
            .entries
            .iter()
            .filter(|e| e.k_a == k && e.k_b == k)
            .map(|e| e.ari)
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }

    pub fn ks(&self) -> Vec<usize> {
        let mut ks: Vec<usize> = self.runs.iter().map(|r| r.k).collect();
        ks.dedup();
        ks
    }
}

/// Clusters `ds` `replicates` times for every k in `ks`, each run with an
/// independent derived seed, and compares all resulting partitions.
pub fn rand_replicates(
    ds: &TrajectoryDataset,
    ks: &[usize],
    replicates: usize,
    params: &ClusterParams,
    seed: u64,
) -> Result<RandTable> {
    if replicates < 2 {
        return Err(Error::InvalidArgument(format!(
            "at least 2 replicates are required, got {replicates}"
        )));
    }
    let truth = ds
        .truth_labels()
        .map(Partition::new)
        .transpose()?;
    let jobs: Vec<(usize, usize)> = ks
        .iter()
        .flat_map(|&k| (1..=replicates).map(move |r| (k, r)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(k, replicate)| {
            let run_seed = replicate_seed(seed, k, replicate);
            let p = ClusterParams {
                k,
                seed: run_seed,
                ..params.clone()
            };
            let wrap = |source: Error| Error::Replicate {
                k,
                replicate,
                source: Box::new(source),
            };
            let res = cluster(ds, &p).map_err(wrap)?;
            let truth_ari = match &truth {
                Some(t) => Some(
                    adjusted_rand(&Partition::from_labels(&res.assignments)?, t).map_err(wrap)?,
                ),
                None => None,
            };
            Ok(ReplicateRun {
                k,
                replicate,
                seed: run_seed,
                live_clusters: res.centers.len(),
                iterations: res.iterations,
                converged: res.converged,
                assignments: res.assignments,
                truth_ari,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    RandTable::from_runs(runs)
}
