//! Cluster-count selection and run-to-run comparison.

mod align;
mod hclust;
mod rand_index;
mod silhouette;

pub use align::{align_curves, align_labels, Alignment, LabeledCurve};
pub use hclust::{complete_linkage, hcluster_centers, DendrogramTree, Merge};
pub use rand_index::{
    adjusted_rand, rand_index, rand_replicates, replicate_seed, Partition, RandEntry, RandTable,
    ReplicateRun,
};
pub use silhouette::{silhouette, silhouette_from_distances, SilhouetteRow, SilhouetteTable};

use std::collections::BTreeMap;

use crate::spline::SplineModel;
use crate::trajectories::Label;

/// `n` equally spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Each center evaluated on `grid`, in label order.
pub fn center_curves(
    centers: &BTreeMap<Label, SplineModel>,
    grid: &[f64],
) -> Vec<LabeledCurve> {
    centers
        .iter()
        .map(|(&label, m)| LabeledCurve {
            label,
            values: m.predict(grid),
        })
        .collect()
}
