//! Hyperbolicity: 1-D analysis, plane covers, eigensplittings, cone fields
//! and the Julia-set partition.

pub mod cones;
pub mod cover;
pub mod one_d;
pub mod partition;
pub mod split;

pub use cover::{build_plane_cover, CellLabel, PlaneBox, PlaneCover};
pub use one_d::{
    classify_hyperbolic, divergence_threshold, eta_divergence_test, julia_cloud_1d, AttractingCycle,
    CriticalFate, DivergenceOutcome, HyperbolicityVerdict1D,
};
pub use partition::{julia_candidates, partition_julia, Partition, PartitionLabel, PartitionReport, Symbol};
pub use split::{adapted_norm, eigen_split, Splitting};
pub use cones::{certify_cones, search_cone_constants, ConeCheckReport, ConeParams};
