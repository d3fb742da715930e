//! Point-set metrics in raw Euclidean space.

mod convergence;
mod distance;
pub mod knn;
mod marginal;
mod pr;

pub use convergence::{
    default_k_rule, pr_convergence_experiment, ConvergenceRow, OverlapFamily,
};
pub use distance::{
    frechet_from_moments, frechet_gaussian, hausdorff, hausdorff_brute, mean_and_covariance,
    PSD_TOLERANCE,
};
pub use marginal::{marginal_precision_curve, marginal_precision_from_scores, MarginalCurve};
pub use pr::{improved_pr, improved_pr_brute, KnnSupport, PrReport};

/// Default neighbourhood size for improved precision/recall.
pub const DEFAULT_K: usize = 3;
