use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::TrajectoryDataset;
use crate::trajectories::{distances, ClusterResult, DistanceMatrix, Label};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SilhouetteRow {
    pub id: String,
    pub cluster: Label,
    pub neighbor: Label,
    pub silhouette: f64,
}

/// Rows sorted by cluster, then by decreasing silhouette.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SilhouetteTable {
    pub rows: Vec<SilhouetteRow>,
}

impl SilhouetteTable {
    pub fn mean(&self) -> f64 {
        self.rows.iter().map(|r| r.silhouette).sum::<f64>() / self.rows.len() as f64
    }

    pub fn cluster_means(&self) -> BTreeMap<Label, f64> {
        let mut acc: BTreeMap<Label, (f64, usize)> = BTreeMap::new();
        for r in &self.rows {
            let e = acc.entry(r.cluster).or_default();
            e.0 += r.silhouette;
            e.1 += 1;
        }
        acc.into_iter()
            .map(|(k, (s, n))| (k, s / n as f64))
            .collect()
    }
}

/// Silhouettes against center curves. Distances are root mean squared
/// residuals `√D_ik`; `a` is the distance to the subject's own center and
/// `b` the smallest distance to any other center.
pub fn silhouette_from_distances(
    d: &DistanceMatrix,
    assignments: &[Label],
    ids: &[String],
) -> Result<SilhouetteTable> {
    let clusters = d.cluster_ids();
    if clusters.len() < 2 {
        return Err(Error::SingleCluster);
    }
    if assignments.len() != d.n_subjects() || ids.len() != assignments.len() {
        return Err(Error::LengthMismatch {
            left: assignments.len(),
            right: d.n_subjects(),
        });
    }
    let mut rows = Vec::with_capacity(assignments.len());
    for (i, (&own, id)) in assignments.iter().zip(ids).enumerate() {
        let row = d.row(i);
        let own_col = clusters.iter().position(|&c| c == own).ok_or_else(|| {
            Error::InvalidArgument(format!("subject {id} assigned to unknown cluster {own}"))
        })?;
        let a = row[own_col].sqrt();
        let (neighbor, b) = clusters
            .iter()
            .zip(row)
            .filter(|(&c, _)| c != own)
            .map(|(&c, &v)| (c, v.sqrt()))
            .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
        let scale = a.max(b);
        let s = if scale > 0.0 { (b - a) / scale } else { 0.0 };
        rows.push(SilhouetteRow {
            id: id.clone(),
            cluster: own,
            neighbor,
            silhouette: s.clamp(-1.0, 1.0),
        });
    }
    rows.sort_by(|x, y| {
        x.cluster
            .cmp(&y.cluster)
            .then(y.silhouette.total_cmp(&x.silhouette))
    });
    Ok(SilhouetteTable { rows })
}

pub fn silhouette(result: &ClusterResult, ds: &TrajectoryDataset) -> Result<SilhouetteTable> {
    if result.centers.len() < 2 {
        return Err(Error::SingleCluster);
    }
    if result.subject_ids.len() != ds.len()
        || result
            .subject_ids
            .iter()
            .zip(ds.subjects())
            .any(|(a, s)| *a != s.id)
    {
        return Err(Error::InvalidArgument(
            "clustering result does not belong to this dataset".into(),
        ));
    }
    let d = distances(ds, &result.centers)?;
    silhouette_from_distances(&d, &result.assignments, &result.subject_ids)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| i.to_string()).collect()
    }

    #[test]
    fn on_center_and_equidistant() {
        let d = DistanceMatrix::from_rows(vec![0.0, 25.0, 4.0, 4.0], vec![1, 2]).unwrap();
        let t = silhouette_from_distances(&d, &[1, 2], &ids(2)).unwrap();
        let s0 = t.rows.iter().find(|r| r.id == "0").unwrap();
        assert_eq!(s0.silhouette, 1.0);
        assert_eq!(s0.neighbor, 2);
        let s1 = t.rows.iter().find(|r| r.id == "1").unwrap();
        assert_eq!(s1.silhouette, 0.0);
        assert_eq!(s1.neighbor, 1);
    }

    #[test]
    fn single_cluster_is_an_error() {
        let d = DistanceMatrix::from_rows(vec![1.0, 2.0], vec![1]).unwrap();
        assert!(matches!(
            silhouette_from_distances(&d, &[1, 1], &ids(2)),
            Err(Error::SingleCluster)
        ));
    }

    #[test]
    fn sorted_for_plotting() {
        let d = DistanceMatrix::from_rows(
            vec![1.0, 4.0, 0.0, 9.0, 9.0, 1.0, 4.0, 1.0],
            vec![1, 2],
        )
        .unwrap();
        let t = silhouette_from_distances(&d, &[1, 1, 2, 2], &ids(4)).unwrap();
        let order: Vec<&str> = t.rows.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(order, ["1", "0", "2", "3"]);
        let means = t.cluster_means();
        assert!((means[&1] - 0.75).abs() < 1e-12);
    }
}
