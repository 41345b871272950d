use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{center_curves, linspace};
use crate::spline::SplineModel;
use crate::trajectories::Label;

/// A center evaluated on a shared time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledCurve {
    pub label: Label,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    /// `(label_a, label_b, manhattan distance)` in the order the pairs were
    /// matched (closest first).
    pub pairs: Vec<(Label, Label, f64)>,
    pub unmapped_a: Vec<Label>,
    pub unmapped_b: Vec<Label>,
}

impl Alignment {
    pub fn map(&self, label_a: Label) -> Option<Label> {
        self.pairs
            .iter()
            .find(|p| p.0 == label_a)
            .map(|p| p.1)
    }

    pub fn mapping(&self) -> BTreeMap<Label, Label> {
        self.pairs.iter().map(|&(a, b, _)| (a, b)).collect()
    }
}

fn manhattan(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Greedy matching on the Manhattan distance matrix between two sets of
/// curves: repeatedly take the smallest remaining entry, pair its row and
/// column, and strike both out. The smallest entry is searched column by
/// column, so equal distances resolve to the lowest column, then lowest row.
pub fn align_curves(a: &[LabeledCurve], b: &[LabeledCurve]) -> Alignment {
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .map(|ca| b.iter().map(|cb| manhattan(&ca.values, &cb.values)).collect())
        .collect();
    let mut pairs = Vec::new();
    for _ in 0..a.len().min(b.len()) {
        let mut best: Option<(usize, usize, f64)> = None;
        for j in 0..b.len() {
            for (i, row) in m.iter().enumerate() {
                let v = row[j];
                if v.is_finite() && best.is_none_or(|(_, _, bv)| v < bv) {
                    best = Some((i, j, v));
                }
            }
        }
        let Some((i, j, v)) = best else { break };
        pairs.push((a[i].label, b[j].label, v));
        for x in m[i].iter_mut() {
            *x = f64::INFINITY;
        }
        for row in m.iter_mut() {
            row[j] = f64::INFINITY;
        }
    }
    let unmapped_a = a
        .iter()
        .map(|c| c.label)
        .filter(|l| !pairs.iter().any(|p| p.0 == *l))
        .collect();
    let unmapped_b = b
        .iter()
        .map(|c| c.label)
        .filter(|l| !pairs.iter().any(|p| p.1 == *l))
        .collect();
    Alignment {
        pairs,
        unmapped_a,
        unmapped_b,
    }
}

/// Evaluates both center sets on `grid_points` times over `time_range` and
/// aligns them with [`align_curves`].
pub fn align_labels(
    centers_a: &BTreeMap<Label, SplineModel>,
    centers_b: &BTreeMap<Label, SplineModel>,
    time_range: (f64, f64),
    grid_points: usize,
) -> Alignment {
    let grid = linspace(time_range.0, time_range.1, grid_points.max(1));
    align_curves(&center_curves(centers_a, &grid), &center_curves(centers_b, &grid))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(label: Label, values: &[f64]) -> LabeledCurve {
        LabeledCurve {
            label,
            values: values.to_vec(),
        }
    }

    #[test]
    fn greedy_hand_trace() {
        // Distances (rows a, cols b):
        //   a1:  1  18   9
        //   a2:  0  17   8
        //   a3: 19   2  11
        // Greedy: (a2,b1)=0, then (a3,b2)=2, then (a1,b3)=9.
        let a = [curve(1, &[0.0]), curve(2, &[1.0]), curve(3, &[20.0])];
        let b = [curve(1, &[1.0]), curve(2, &[18.0]), curve(3, &[9.0])];
        let al = align_curves(&a, &b);
        let mapping: Vec<(Label, Label)> = al.pairs.iter().map(|p| (p.0, p.1)).collect();
        assert_eq!(mapping, vec![(2, 1), (3, 2), (1, 3)]);
        assert_eq!(al.pairs[0].2, 0.0);
        assert_eq!(al.pairs[1].2, 2.0);
        assert_eq!(al.pairs[2].2, 9.0);
    }

    #[test]
    fn size_mismatch_reports_unmapped() {
        let a = [curve(1, &[0.0, 0.0]), curve(2, &[5.0, 5.0])];
        let b: Vec<LabeledCurve> = (1..=5)
            .map(|l| curve(l, &[l as f64, l as f64]))
            .collect();
        let al = align_curves(&a, &b);
        assert_eq!(al.pairs.len(), 2);
        assert_eq!(al.map(2), Some(5));
        assert_eq!(al.map(1), Some(1));
        assert_eq!(al.unmapped_b, vec![2, 3, 4]);
        assert!(al.unmapped_a.is_empty());
    }
}
