//! Demographic bias auditing for volumetric segmentation outputs.
//!
//! The crate is organised bottom-up:
//!
//! - [`volume`]: binary voxel masks, mask file formats, resampling, surface
//!   extraction and the exact Euclidean distance transform.
//! - [`metrics`]: per-case overlap (Dice, HD95) and morphometric features.
//! - [`stats`]: OLS, one-way ANOVA, Welch's t-test and the special functions
//!   behind their p-values.
//! - [`fairness`]: beneficial-outcome rates, DPD, DIR, fairness gap and
//!   cross-run gap comparisons.
//! - [`cohort`]: age grouping, quality tiers, balanced sampling and split
//!   manifests.
//! - [`embedding`]: PCA, exact t-SNE and clustering-agreement scores.
//! - [`synth`]: synthetic cohorts with injected label and prediction bias.

pub mod cohort;
pub mod embedding;
pub mod fairness;
pub mod metrics;
pub mod rng;
pub mod stats;
pub mod synth;
pub mod volume;

pub use cohort::{AgeGroup, CaseRecord, Difficulty, Rating, SplitManifest, Tier};
pub use fairness::{BiasComparison, FairnessReport, GroupOutcome};
pub use metrics::CaseMetrics;
pub use volume::{DistanceField, MaskFormat, SurfaceSet, VoxelMask};
