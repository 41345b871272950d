//! Synthetic blood-pressure-like cohorts with known cluster structure.
//!
//! Every subject is drawn from its own ChaCha8 stream seeded from
//! `(spec.seed, subject index)`, so output is identical for any number of
//! worker threads.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{SubjectRecord, TrajectoryDataset};
use crate::rng;
use crate::{Error, Result};

/// Piecewise-smooth mean curve of one true cluster.
///
/// Before time zero the curve is `pre_level + pre_slope · t/365`. After it
/// drops towards `pre_level − drop_depth` with time constant `drop_days`,
/// then follows a quadratic trend in years since time zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterShape {
    pub pre_level: f64,
    pub pre_slope: f64,
    pub drop_depth: f64,
    pub drop_days: f64,
    pub post_slope: f64,
    pub post_curvature: f64,
}

impl CenterShape {
    pub fn flat(level: f64) -> Self {
        Self {
            pre_level: level,
            pre_slope: 0.0,
            drop_depth: 0.0,
            drop_days: 30.0,
            post_slope: 0.0,
            post_curvature: 0.0,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let years = t / 365.0;
        if t < 0.0 {
            self.pre_level + self.pre_slope * years
        } else {
            let drop = self.drop_depth * (1.0 - (-t / self.drop_days.max(1e-9)).exp());
            self.pre_level - drop + self.post_slope * years + self.post_curvature * years * years
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationModel {
    pub min_pre: usize,
    pub min_post: usize,
    /// Mean number of observations per subject.
    pub mean_obs: f64,
    /// Negative-binomial size parameter of the extra observations beyond the
    /// minima; smaller is more over-dispersed.
    pub dispersion: f64,
    /// Probability that an extra observation falls before time zero.
    pub pre_fraction: f64,
}

impl Default for ObservationModel {
    fn default() -> Self {
        Self {
            min_pre: 1,
            min_post: 3,
            // 1,353,910 rows over 80,000 subjects.
            mean_obs: 16.92,
            dispersion: 2.0,
            pre_fraction: 1.0 / 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub n_subjects: usize,
    pub cluster_weights: Vec<f64>,
    pub shapes: Vec<CenterShape>,
    pub time_range: (f64, f64),
    pub obs_model: ObservationModel,
    pub noise_sd: f64,
    /// Standard deviation of a per-subject random intercept.
    #[serde(default)]
    pub subject_sd: f64,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("invalid generator spec: {m}")));
        if self.n_subjects < 1 {
            return bad("n_subjects must be at least 1");
        }
        if self.cluster_weights.is_empty() || self.cluster_weights.len() != self.shapes.len() {
            return bad("need one weight per shape");
        }
        if self.cluster_weights.iter().any(|w| !(*w >= 0.0)) {
            return bad("weights must be nonnegative");
        }
        let total: f64 = self.cluster_weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return bad("weights must sum to 1");
        }
        if !(self.noise_sd >= 0.0) || !(self.subject_sd >= 0.0) {
            return bad("noise standard deviations must be nonnegative");
        }
        let (lo, hi) = self.time_range;
        if !(lo < 0.0 && hi > 0.0) {
            return bad("time range must straddle zero");
        }
        let o = &self.obs_model;
        if o.min_pre + o.min_post < 4 {
            return bad("at least 4 observations per subject are required");
        }
        if !(o.mean_obs >= (o.min_pre + o.min_post) as f64) {
            return bad("mean_obs below the per-subject minimum");
        }
        if !(o.dispersion > 0.0) || !(0.0..=1.0).contains(&o.pre_fraction) {
            return bad("dispersion must be positive and pre_fraction in [0, 1]");
        }
        Ok(())
    }

    pub fn n_clusters(&self) -> usize {
        self.shapes.len()
    }
}

/// Named generator presets: `bp5`, `clean2`, `clean5`.
pub fn preset(name: &str) -> Result<GeneratorSpec> {
    let base = |weights: Vec<f64>, shapes: Vec<CenterShape>, noise_sd: f64| GeneratorSpec {
        n_subjects: 10_000,
        cluster_weights: weights,
        shapes,
        time_range: (-365.0, 730.0),
        obs_model: ObservationModel::default(),
        noise_sd,
        subject_sd: 0.0,
        seed: 12345,
    };
    match name {
        "bp5" => {
            let shape = |pre_level, pre_slope, drop_depth, drop_days, post_slope, post_curvature| {
                CenterShape {
                    pre_level,
                    pre_slope,
                    drop_depth,
                    drop_days,
                    post_slope,
                    post_curvature,
                }
            };
            Ok(GeneratorSpec {
                subject_sd: BP5_SUBJECT_SD,
                ..base(
                    vec![0.30, 0.25, 0.20, 0.15, 0.10],
                    vec![
                        // Mild drop, then holds.
                        shape(140.0, 0.0, 10.0, 45.0, 0.0, 0.0),
                        // Large drop, keeps declining.
                        shape(162.0, 0.0, 32.0, 30.0, -6.0, 0.0),
                        // Drop, then steady rebound.
                        shape(152.0, 0.0, 18.0, 40.0, 16.0, 0.0),
                        // High and barely responding.
                        shape(180.0, 4.0, 8.0, 60.0, 0.0, 0.0),
                        // Deep fast drop, partial rebound.
                        shape(176.0, 0.0, 50.0, 20.0, 20.0, -5.0),
                    ],
                    BP5_NOISE_SD,
                )
            })
        }
        "clean2" => Ok(base(
            vec![0.5, 0.5],
            vec![CenterShape::flat(120.0), CenterShape::flat(160.0)],
            1.0,
        )),
        "clean5" => {
            let shapes = (0..5)
                .map(|i| CenterShape {
                    pre_level: 100.0 + 25.0 * i as f64,
                    pre_slope: 0.0,
                    drop_depth: 10.0,
                    drop_days: 40.0,
                    post_slope: 2.0,
                    post_curvature: 0.0,
                })
                .collect();
            Ok(base(vec![0.2; 5], shapes, 1.0))
        }
        other => Err(Error::UnknownPreset(other.to_string())),
    }
}

const BP5_NOISE_SD: f64 = 20.0;
const BP5_SUBJECT_SD: f64 = 0.0;

fn draw_subject(spec: &GeneratorSpec, index: usize) -> Result<SubjectRecord> {
    let mut rng = rng::stream(rng::derive_seed(spec.seed, &[index as u64]));

    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut group = spec.cluster_weights.len() - 1;
    for (g, w) in spec.cluster_weights.iter().enumerate() {
        acc += w;
        if u < acc {
            group = g;
            break;
        }
    }

    // Extra observations beyond the minima: negative binomial as a
    // gamma-Poisson mixture with mean `mean_obs − minima`.
    let o = &spec.obs_model;
    let minima = o.min_pre + o.min_post;
    let extra_mean = o.mean_obs - minima as f64;
    let extra = if extra_mean > 0.0 {
        let gamma = Gamma::new(o.dispersion, extra_mean / o.dispersion)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let rate: f64 = gamma.sample(&mut rng);
        if rate > 0.0 {
            Poisson::new(rate)
                .map_err(|e| Error::InvalidArgument(e.to_string()))?
                .sample(&mut rng) as u64
        } else {
            0
        }
    } else {
        0
    };
    let extra_pre = Binomial::new(extra, o.pre_fraction)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?
        .sample(&mut rng);
    let n_pre = o.min_pre + extra_pre as usize;
    let n_post = o.min_post + (extra - extra_pre) as usize;

    let (lo, hi) = spec.time_range;
    let mut times = Vec::with_capacity(n_pre + n_post);
    for _ in 0..n_pre {
        // [lo, 0)
        times.push(rng.random_range(lo..0.0));
    }
    for _ in 0..n_post {
        // (0, hi]
        times.push(hi - rng.random_range(0.0..hi));
    }
    times.sort_by(f64::total_cmp);

    let shape = &spec.shapes[group];
    let offset = if spec.subject_sd > 0.0 {
        Normal::new(0.0, spec.subject_sd)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?
            .sample(&mut rng)
    } else {
        0.0
    };
    let noise = Normal::new(0.0, spec.noise_sd).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let responses = times
        .iter()
        .map(|&t| {
            let eps = if spec.noise_sd > 0.0 {
                noise.sample(&mut rng)
            } else {
                0.0
            };
            shape.eval(t) + offset + eps
        })
        .collect();
    SubjectRecord::new(
        (index + 1).to_string(),
        times,
        responses,
        Some(group as i64 + 1),
    )
}

/// Draws a cohort; subject ids are `1..=n_subjects` and truth labels are
/// 1-based shape indices.
pub fn generate(spec: &GeneratorSpec) -> Result<TrajectoryDataset> {
    spec.validate()?;
    let subjects = (0..spec.n_subjects)
        .into_par_iter()
        .map(|i| draw_subject(spec, i))
        .collect::<Result<Vec<_>>>()?;
    TrajectoryDataset::from_subjects(subjects)
}
