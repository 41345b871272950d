//! K-means over spline centers.
//!
//! One iteration fits a penalized spline to the pooled observations of every
//! live cluster, computes each subject's mean squared residual against every
//! center at the subject's own times, and moves each subject to its closest
//! center. Clusters that lose all subjects, or whose members do not provide
//! enough distinct times for a spline fit, are dropped; their subjects go to
//! the closest remaining center.
//!
//! Per-cluster fits and per-subject distances run on the ambient rayon pool.
//! Every reduction happens inside a single task, so results do not depend on
//! the number of worker threads.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{SubjectRecord, TrajectoryDataset};
use crate::rng;
use crate::spline::{make_basis_spec, select_lambda, SplineModel};
use crate::{Error, Result};

/// Cluster labels run from 1 to k.
pub type Label = usize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub k: usize,
    pub maxdf: usize,
    pub max_iter: usize,
    /// Iterations continue while more than this percentage of subjects
    /// switched clusters.
    pub conv_pct: f64,
    pub seed: u64,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self {
            k: 5,
            maxdf: 30,
            max_iter: 20,
            conv_pct: 0.5,
            seed: 12345,
        }
    }
}

impl ClusterParams {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        if self.max_iter < 1 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        if !(0.0..=100.0).contains(&self.conv_pct) {
            return Err(Error::InvalidArgument(format!(
                "conv_pct must lie in [0, 100], got {}",
                self.conv_pct
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropReason {
    Empty,
    InsufficientSupport,
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DropReason::Empty => "empty",
            DropReason::InsufficientSupport => "insufficient-support",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropEvent {
    pub iteration: usize,
    pub cluster: Label,
    pub reason: DropReason,
}

/// Subjects × live clusters matrix of mean squared distances, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    values: Vec<f64>,
    cluster_ids: Vec<Label>,
}

impl DistanceMatrix {
    pub fn from_rows(values: Vec<f64>, cluster_ids: Vec<Label>) -> Result<Self> {
        let k = cluster_ids.len();
        if k == 0 || values.len() % k != 0 {
            return Err(Error::InvalidArgument(
                "distance matrix shape does not match its cluster list".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidArgument(
                "distances must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            values,
            cluster_ids,
        })
    }

    pub fn cluster_ids(&self) -> &[Label] {
        &self.cluster_ids
    }

    pub fn n_subjects(&self) -> usize {
        self.values.len() / self.cluster_ids.len()
    }

    pub fn row(&self, subject: usize) -> &[f64] {
        let k = self.cluster_ids.len();
        &self.values[subject * k..(subject + 1) * k]
    }

    pub fn get(&self, subject: usize, cluster: Label) -> Option<f64> {
        let col = self.cluster_ids.iter().position(|&c| c == cluster)?;
        Some(self.row(subject)[col])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub switch_pct: f64,
    pub dropped: Vec<DropEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    pub params: ClusterParams,
    /// Subject ids in dataset order.
    pub subject_ids: Vec<String>,
    /// Cluster label of each subject, aligned with `subject_ids`.
    pub assignments: Vec<Label>,
    pub centers: BTreeMap<Label, SplineModel>,
    pub iterations: usize,
    pub trace: Vec<IterationRecord>,
    pub dropped: Vec<DropEvent>,
    pub converged: bool,
}

impl ClusterResult {
    pub fn changes_per_iter(&self) -> Vec<f64> {
        self.trace.iter().map(|r| r.switch_pct).collect()
    }

    pub fn live_clusters(&self) -> Vec<Label> {
        self.centers.keys().copied().collect()
    }

    pub fn cluster_sizes(&self) -> BTreeMap<Label, usize> {
        let mut sizes: BTreeMap<Label, usize> = self.centers.keys().map(|&k| (k, 0)).collect();
        for &a in &self.assignments {
            *sizes.entry(a).or_default() += 1;
        }
        sizes
    }

    /// Label of subject `id`, if present.
    pub fn assignment_of(&self, id: &str) -> Option<Label> {
        self.subject_ids
            .iter()
            .position(|s| s == id)
            .map(|i| self.assignments[i])
    }

    pub fn aic(&self) -> BTreeMap<Label, f64> {
        self.centers.iter().map(|(&k, m)| (k, m.aic())).collect()
    }
}

/// Uniform random labels in `1..=k`, one ChaCha8 draw per subject in dataset
/// order.
pub fn init_random(ds: &TrajectoryDataset, k: usize, seed: u64) -> Vec<Label> {
    let k = k.max(1) as u32;
    let mut rng = rng::stream(rng::derive_seed(seed, &[0x1A17]));
    (0..ds.len())
        .map(|_| rng.random_range(1..=k) as Label)
        .collect()
}

/// Result of fitting the centers for one assignment.
#[derive(Debug, Clone)]
pub struct CenterFits {
    pub centers: BTreeMap<Label, SplineModel>,
    /// Labels whose fit failed.
    pub failed: Vec<Label>,
}

/// Fits one spline per nonempty cluster from its members' pooled
/// observations. Clusters without enough distinct times, or whose fit fails,
/// are reported in `failed`.
pub fn fit_centers(
    ds: &TrajectoryDataset,
    assignments: &[Label],
    maxdf: usize,
) -> Result<CenterFits> {
    if assignments.len() != ds.len() {
        return Err(Error::LengthMismatch {
            left: assignments.len(),
            right: ds.len(),
        });
    }
    let mut members: BTreeMap<Label, Vec<usize>> = BTreeMap::new();
    for (i, &a) in assignments.iter().enumerate() {
        members.entry(a).or_default().push(i);
    }
    let members: Vec<(Label, Vec<usize>)> = members.into_iter().collect();
    let fits: Vec<(Label, Result<SplineModel>)> = members
        .par_iter()
        .map(|(label, idx)| (*label, fit_pooled(ds.subjects(), idx, maxdf)))
        .collect();

    let mut centers = BTreeMap::new();
    let mut failed = Vec::new();
    for (label, fit) in fits {
        match fit {
            Ok(m) => {
                centers.insert(label, m);
            }
            Err(Error::InsufficientSupport { .. } | Error::FitFailure(_)) => failed.push(label),
            Err(e) => return Err(e),
        }
    }
    if centers.is_empty() {
        return Err(Error::AllClustersDropped { iteration: 0 });
    }
    Ok(CenterFits { centers, failed })
}

fn fit_pooled(subjects: &[SubjectRecord], members: &[usize], maxdf: usize) -> Result<SplineModel> {
    let total: usize = members.iter().map(|&i| subjects[i].n_obs()).sum();
    let mut times = Vec::with_capacity(total);
    let mut responses = Vec::with_capacity(total);
    for &i in members {
        times.extend_from_slice(&subjects[i].times);
        responses.extend_from_slice(&subjects[i].responses);
    }
    let spec = make_basis_spec(&times, maxdf)?;
    select_lambda(&times, &responses, &spec).map(|(_, m)| m)
}

/// Mean squared residual of `subject` against `center` at the subject's times.
pub fn subject_distance(subject: &SubjectRecord, center: &SplineModel) -> f64 {
    let sum: f64 = subject
        .times
        .iter()
        .zip(&subject.responses)
        .map(|(&t, &y)| {
            let r = y - center.eval(t);
            r * r
        })
        .sum();
    sum / subject.n_obs() as f64
}

/// Distance of every subject to every center, columns in label order.
pub fn distances(
    ds: &TrajectoryDataset,
    centers: &BTreeMap<Label, SplineModel>,
) -> Result<DistanceMatrix> {
    if centers.is_empty() {
        return Err(Error::InvalidArgument("no live centers".into()));
    }
    let models: Vec<&SplineModel> = centers.values().collect();
    let k = models.len();
    let mut values = vec![0.0; ds.len() * k];
    values
        .par_chunks_mut(k)
        .zip(ds.subjects().par_iter())
        .for_each(|(row, subject)| {
            for (v, m) in row.iter_mut().zip(&models) {
                *v = subject_distance(subject, m);
            }
        });
    DistanceMatrix::from_rows(values, centers.keys().copied().collect())
}

fn argmin_with_tie(row: &[f64], ids: &[Label], current: Option<Label>) -> Label {
    let min = row.iter().copied().fold(f64::INFINITY, f64::min);
    if let Some(c) = current {
        if let Some(col) = ids.iter().position(|&x| x == c) {
            if row[col] == min {
                return c;
            }
        }
    }
    let col = row.iter().position(|&v| v == min).unwrap_or(0);
    ids[col]
}

/// Moves each subject to its closest center. Exact ties keep the current
/// cluster when it is among the closest, otherwise go to the lowest label.
/// Returns the new labels and the percentage of subjects that moved.
pub fn reassign(d: &DistanceMatrix, current: &[Label]) -> Result<(Vec<Label>, f64)> {
    if current.len() != d.n_subjects() {
        return Err(Error::LengthMismatch {
            left: current.len(),
            right: d.n_subjects(),
        });
    }
    let ids = d.cluster_ids();
    let next: Vec<Label> = current
        .iter()
        .enumerate()
        .map(|(i, &c)| argmin_with_tie(d.row(i), ids, Some(c)))
        .collect();
    let switched = next.iter().zip(current).filter(|(a, b)| a != b).count();
    let pct = if current.is_empty() {
        0.0
    } else {
        100.0 * switched as f64 / current.len() as f64
    };
    Ok((next, pct))
}

/// Runs the full fit / distance / reassign loop.
pub fn cluster(ds: &TrajectoryDataset, params: &ClusterParams) -> Result<ClusterResult> {
    params.validate()?;
    if ds.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut assignments = init_random(ds, params.k, params.seed);
    let mut live: Vec<Label> = (1..=params.k).collect();
    let mut trace = Vec::new();
    let mut dropped = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut centers = BTreeMap::new();

    for iteration in 1..=params.max_iter {
        iterations = iteration;
        let mut events = Vec::new();

        let mut occupied: Vec<bool> = vec![false; params.k + 1];
        for &a in &assignments {
            occupied[a] = true;
        }
        live.retain(|&c| {
            let keep = occupied[c];
            if !keep {
                events.push(DropEvent {
                    iteration,
                    cluster: c,
                    reason: DropReason::Empty,
                });
            }
            keep
        });

        let fits = fit_centers(ds, &assignments, params.maxdf)
            .map_err(|e| match e {
                Error::AllClustersDropped { .. } => Error::AllClustersDropped { iteration },
                e => e,
            })?;
        for &c in &fits.failed {
            events.push(DropEvent {
                iteration,
                cluster: c,
                reason: DropReason::InsufficientSupport,
            });
        }
        live.retain(|c| fits.centers.contains_key(c));
        centers = fits.centers;

        let d = distances(ds, &centers)?;
        let (next, pct) = reassign(&d, &assignments)?;
        debug_assert!(next.iter().enumerate().all(|(i, &a)| {
            let own = d.get(i, a).unwrap();
            d.row(i).iter().all(|&v| own <= v)
        }));
        assignments = next;
        dropped.extend(events.iter().cloned());
        trace.push(IterationRecord {
            iteration,
            switch_pct: pct,
            dropped: events,
        });
        if pct <= params.conv_pct {
            converged = true;
            break;
        }
    }

    // Refit so every center matches its final members. A refit can still
    // lose a cluster (emptied by the last reassignment, or short of support);
    // its subjects move to the closest surviving center and we refit again.
    let needs_refit = trace.last().map_or(true, |r| r.switch_pct > 0.0);
    if needs_refit {
        loop {
            let mut occupied: Vec<bool> = vec![false; params.k + 1];
            for &a in &assignments {
                occupied[a] = true;
            }
            for &c in live.iter().filter(|&&c| !occupied[c]) {
                dropped.push(DropEvent {
                    iteration: iterations,
                    cluster: c,
                    reason: DropReason::Empty,
                });
            }
            live.retain(|&c| occupied[c]);
            let fits = fit_centers(ds, &assignments, params.maxdf).map_err(|e| match e {
                Error::AllClustersDropped { .. } => Error::AllClustersDropped {
                    iteration: iterations,
                },
                e => e,
            })?;
            for &c in &fits.failed {
                dropped.push(DropEvent {
                    iteration: iterations,
                    cluster: c,
                    reason: DropReason::InsufficientSupport,
                });
            }
            live.retain(|c| fits.centers.contains_key(c));
            centers = fits.centers;
            if fits.failed.is_empty() {
                break;
            }
            let d = distances(ds, &centers)?;
            for (i, a) in assignments.iter_mut().enumerate() {
                if !centers.contains_key(a) {
                    *a = argmin_with_tie(d.row(i), d.cluster_ids(), None);
                }
            }
        }
    }

    Ok(ClusterResult {
        params: params.clone(),
        subject_ids: ds.subjects().iter().map(|s| s.id.clone()).collect(),
        assignments,
        centers,
        iterations,
        trace,
        dropped,
        converged,
    })
}

/// Closest center for a subject outside the clustered data; exact ties go
/// to the lowest label.
pub fn predict_assignment(result: &ClusterResult, subject: &SubjectRecord) -> Result<Label> {
    if subject.n_obs() == 0 {
        return Err(Error::InvalidArgument("subject has no observations".into()));
    }
    if result.centers.is_empty() {
        return Err(Error::InvalidArgument("no live centers".into()));
    }
    let ids: Vec<Label> = result.centers.keys().copied().collect();
    let row: Vec<f64> = result
        .centers
        .values()
        .map(|m| subject_distance(subject, m))
        .collect();
    Ok(argmin_with_tie(&row, &ids, None))
}
