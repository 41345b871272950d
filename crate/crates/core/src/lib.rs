//! K-means clustering of irregularly sampled longitudinal trajectories.
//!
//! Each cluster center is a penalized natural cubic regression spline fitted
//! to the pooled observations of the subjects currently in that cluster.
//! Subjects are moved to the center with the smallest mean squared residual
//! at their own observation times, and the fit/reassign loop repeats until
//! few enough subjects switch.
//!
//! Alongside the clustering loop the crate provides the usual cluster-count
//! diagnostics (Rand and adjusted Rand indices over replicate runs,
//! silhouettes against center curves, complete-linkage clustering of
//! center curves, greedy label alignment between runs) and a generator of
//! synthetic blood-pressure-like cohorts with known structure.

pub mod dataset;
pub mod diagnostics;
mod error;
pub mod rng;
pub mod simgen;
pub mod spline;
pub mod trajectories;

pub use dataset::{SubjectRecord, TrajectoryDataset};
pub use error::{Error, Result};
pub use spline::{SplineBasisSpec, SplineModel};
pub use trajectories::{ClusterParams, ClusterResult, DistanceMatrix};
