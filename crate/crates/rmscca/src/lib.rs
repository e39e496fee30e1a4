//! Resistant multiple sparse canonical correlation analysis.
//!
//! Given two sample-aligned datasets, this crate finds sequences of sparse
//! canonical pairs: per-dataset coefficient vectors whose projections are
//! maximally correlated, with soft-thresholding driving most coefficients to
//! exact zero. The pieces are
//!
//! * [`covariance`](mod@covariance) — Pearson or rank-based (Spearman)
//!   covariance estimates and the scaled cross-covariance matrix K,
//! * [`scca`] — one sparse pair via thresholded power iteration,
//! * [`mscca`] — multiple pairs via deflation with cross-validated penalty
//!   selection,
//! * [`significance`] — permutation cutoffs and the count of significant
//!   pairs,
//! * [`simulate`] — synthetic data with planted canonical groups and
//!   optional heavy tails,
//! * [`evaluate`] — recovery metrics against the planted ground truth.

pub mod covariance;
pub mod error;
pub mod evaluate;
pub mod mscca;
pub mod scca;
pub mod significance;
pub mod simulate;

pub use covariance::{build_k, covariance, rank_transform, DataPair, EstimatorMode, KMatrix};
pub use error::{Error, Result};
pub use evaluate::{
    batch_summary, compute_metrics, contains_complete_group, BatchSummary, MetricsReport, Quartiles,
};
pub use mscca::{
    cv_select, deflate, fit_pairs, make_folds, CvPlan, CvSelection, FitResult, FitSettings, GridCell,
};
pub use scca::{
    canonical_vectors, projected_correlation, soft_threshold, sparse_singular_pair, CanonicalPair,
    ProjectedCorrelation, SparsePairConfig,
};
pub use significance::{
    count_significant, permutation_distribution, permute_rows, quantile_type7, PermutationSummary,
};
pub use simulate::{build_b, generate, sigma_yy_entry, GroundTruth, SimulationSpec, TailDivisor, TailMode};
