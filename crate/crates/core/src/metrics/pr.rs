use alloc::vec::Vec;

use super::knn::{self, KdTree};
use crate::autodiff::Tensor;
use crate::data::SampleSet;
use crate::error::{Error, Result};

/// Improved precision and recall of `D_X` (model) against `D_Y` (target).
#[derive(Debug, Clone, PartialEq)]
pub struct PrReport {
    pub precision: f64,
    pub recall: f64,
    pub k: usize,
    pub n_x: usize,
    pub n_y: usize,
    /// Whether each point of `D_X` lies in some k-NN ball of `D_Y`.
    pub per_point_precision: Vec<bool>,
    /// Whether each point of `D_Y` lies in some k-NN ball of `D_X`.
    pub per_point_recall: Vec<bool>,
}

/// k-NN support estimate of a point set: the union of closed balls centred
/// at each point with radius equal to its k-th neighbour distance (the point
/// itself excluded).
#[derive(Debug, Clone)]
pub struct KnnSupport<'a> {
    tree: KdTree<'a>,
    k: usize,
    dim: usize,
}

impl<'a> KnnSupport<'a> {
    pub fn new(points: &'a Tensor, k: usize) -> Result<Self> {
        if k == 0 || k >= points.rows() {
            return Err(Error::Contract(alloc::format!(
                "k = {k} must satisfy 1 <= k < n = {}",
                points.rows()
            )));
        }
        let tree = KdTree::build(points);
        let radii = knn::self_kth_sq_dists(&tree, k);
        Ok(KnnSupport {
            tree: tree.with_radii(radii),
            k,
            dim: points.cols(),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn contains(&self, q: &[f64]) -> bool {
        self.tree.covered(q)
    }

    /// Per-row membership of `queries`.
    pub fn membership(&self, queries: &Tensor) -> Vec<bool> {
        queries.iter_rows().map(|q| self.contains(q)).collect()
    }

    /// Fraction of `queries` rows inside the support.
    pub fn coverage(&self, queries: &Tensor) -> f64 {
        fraction(&self.membership(queries))
    }
}

fn fraction(flags: &[bool]) -> f64 {
    if flags.is_empty() {
        return 0.0;
    }
    flags.iter().filter(|&&f| f).count() as f64 / flags.len() as f64
}

fn check_pair(x: &SampleSet, y: &SampleSet, k: usize) -> Result<()> {
    if x.dim() != y.dim() {
        return Err(Error::Dimension {
            expected: (y.len(), y.dim()),
            found: (x.len(), x.dim()),
        });
    }
    let n_min = x.len().min(y.len());
    if k == 0 || k >= n_min {
        return Err(Error::Contract(alloc::format!(
            "k = {k} must satisfy 1 <= k < min(n_x, n_y) = {n_min}"
        )));
    }
    Ok(())
}

/// Exact improved precision/recall using k-d trees.
pub fn improved_pr(x: &SampleSet, y: &SampleSet, k: usize) -> Result<PrReport> {
    check_pair(x, y, k)?;
    let support_y = KnnSupport::new(&y.points, k)?;
    let support_x = KnnSupport::new(&x.points, k)?;
    let per_point_precision = support_y.membership(&x.points);
    let per_point_recall = support_x.membership(&y.points);
    Ok(PrReport {
        precision: fraction(&per_point_precision),
        recall: fraction(&per_point_recall),
        k,
        n_x: x.len(),
        n_y: y.len(),
        per_point_precision,
        per_point_recall,
    })
}

/// O(n²) reference implementation of [`improved_pr`].
pub fn improved_pr_brute(x: &SampleSet, y: &SampleSet, k: usize) -> Result<PrReport> {
    check_pair(x, y, k)?;
    let ry = knn::self_kth_sq_dists_brute(&y.points, k);
    let rx = knn::self_kth_sq_dists_brute(&x.points, k);
    let inside = |q: &[f64], pts: &Tensor, radii: &[f64]| {
        pts.iter_rows()
            .zip(radii)
            .any(|(p, &r)| knn::sq_dist(q, p) <= r)
    };
    let per_point_precision: Vec<bool> = x
        .points
        .iter_rows()
        .map(|q| inside(q, &y.points, &ry))
        .collect();
    let per_point_recall: Vec<bool> = y
        .points
        .iter_rows()
        .map(|q| inside(q, &x.points, &rx))
        .collect();
    Ok(PrReport {
        precision: fraction(&per_point_precision),
        recall: fraction(&per_point_recall),
        k,
        n_x: x.len(),
        n_y: y.len(),
        per_point_precision,
        per_point_recall,
    })
}
