use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{center_curves, linspace};
use crate::spline::SplineModel;
use crate::trajectories::Label;
use crate::{Error, Result};

/// One agglomeration step. Leaves are nodes `0..n`; the node created by
/// step `s` (0-based) is `n + s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub node_a: usize,
    pub node_b: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DendrogramTree {
    /// Cluster label of each leaf node.
    pub leaves: Vec<Label>,
    pub merges: Vec<Merge>,
}

impl DendrogramTree {
    /// Clade index (0-based, numbered in order of first leaf) of every leaf
    /// after undoing the top `n_clades - 1` merges.
    pub fn cut(&self, n_clades: usize) -> Vec<usize> {
        let n = self.leaves.len();
        let n_clades = n_clades.clamp(1, n.max(1));
        let mut parent: Vec<usize> = (0..n + self.merges.len()).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for (step, m) in self.merges.iter().take(n - n_clades).enumerate() {
            let node = n + step;
            let ra = find(&mut parent, m.node_a);
            let rb = find(&mut parent, m.node_b);
            parent[ra] = node;
            parent[rb] = node;
        }
        let mut ids: BTreeMap<usize, usize> = BTreeMap::new();
        (0..n)
            .map(|leaf| {
                let root = find(&mut parent, leaf);
                let next = ids.len();
                *ids.entry(root).or_insert(next)
            })
            .collect()
    }

    /// Leaves in the left-to-right order of a drawn dendrogram.
    pub fn leaf_order(&self) -> Vec<usize> {
        let n = self.leaves.len();
        if self.merges.is_empty() {
            return (0..n).collect();
        }
        let mut order = Vec::with_capacity(n);
        let mut stack = vec![n + self.merges.len() - 1];
        while let Some(node) = stack.pop() {
            if node < n {
                order.push(node);
            } else {
                let m = &self.merges[node - n];
                stack.push(m.node_b);
                stack.push(m.node_a);
            }
        }
        order
    }
}

/// Complete-linkage agglomeration of a symmetric distance matrix. Ties pick
/// the pair with the smallest (row, column) among active clusters.
pub fn complete_linkage(dist: &[Vec<f64>]) -> Vec<Merge> {
    let n = dist.len();
    // Active clusters: (node id, size); `d` indexed by active slot.
    let mut nodes: Vec<(usize, usize)> = (0..n).map(|i| (i, 1)).collect();
    let mut d: Vec<Vec<f64>> = dist.to_vec();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    while nodes.len() > 1 {
        let mut best = (0, 1, f64::INFINITY);
        for i in 0..nodes.len() {
            for j in i + 1..nodes.len() {
                if d[i][j] < best.2 {
                    best = (i, j, d[i][j]);
                }
            }
        }
        let (i, j, h) = best;
        let (i, j) = if best.2.is_finite() { (i, j) } else { (0, 1) };
        let (na, sa) = nodes[i];
        let (nb, sb) = nodes[j];
        let (node_a, node_b) = if na < nb { (na, nb) } else { (nb, na) };
        merges.push(Merge {
            node_a,
            node_b,
            height: h,
            size: sa + sb,
        });
        // Lance–Williams update for complete linkage: max of the two rows.
        for k in 0..nodes.len() {
            let v = d[i][k].max(d[j][k]);
            d[i][k] = v;
            d[k][i] = v;
        }
        d[i][i] = 0.0;
        nodes[i] = (n + merges.len() - 1, sa + sb);
        nodes.remove(j);
        d.remove(j);
        for row in &mut d {
            row.remove(j);
        }
    }
    merges
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Evaluates every center on `grid_points` equally spaced times over
/// `time_range` and clusters the curves by Euclidean distance with complete
/// linkage.
pub fn hcluster_centers(
    centers: &BTreeMap<Label, SplineModel>,
    time_range: (f64, f64),
    grid_points: usize,
) -> Result<DendrogramTree> {
    if centers.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "hierarchical clustering needs at least 2 centers, got {}",
            centers.len()
        )));
    }
    let grid = linspace(time_range.0, time_range.1, grid_points.max(1));
    let curves = center_curves(centers, &grid);
    let dist: Vec<Vec<f64>> = curves
        .iter()
        .map(|a| curves.iter().map(|b| euclidean(&a.values, &b.values)).collect())
        .collect();
    Ok(DendrogramTree {
        leaves: curves.iter().map(|c| c.label).collect(),
        merges: complete_linkage(&dist),
    })
}
