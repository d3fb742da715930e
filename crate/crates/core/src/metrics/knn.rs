//! Exact k-nearest-neighbour machinery over squared Euclidean distances.
//!
//! Every comparison goes through [`sq_dist`], so the tree and brute-force
//! paths see identical floating-point values and agree exactly.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::autodiff::Tensor;

const LEAF_SIZE: usize = 16;

#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct MaxF64(f64);

impl Eq for MaxF64 {}

impl PartialOrd for MaxF64 {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for MaxF64 {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[derive(Debug, Clone)]
struct Node {
    /// Range into `KdTree::order`.
    start: usize,
    end: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    /// Largest per-point query radius (squared) under this node.
    max_radius_sq: f64,
    children: Option<(usize, usize)>,
}

/// Static k-d tree over the rows of a matrix, with optional per-point ball
/// radii for "is this query inside any ball" lookups.
#[derive(Debug, Clone)]
pub struct KdTree<'a> {
    points: &'a Tensor,
    order: Vec<usize>,
    nodes: Vec<Node>,
    radii_sq: Option<Vec<f64>>,
}

impl<'a> KdTree<'a> {
    pub fn build(points: &'a Tensor) -> Self {
        let n = points.rows();
        let mut tree = KdTree {
            points,
            order: (0..n).collect(),
            nodes: Vec::new(),
            radii_sq: None,
        };
        if n > 0 {
            tree.build_node(0, n);
        }
        tree
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let dim = self.points.cols();
        let mut lo = alloc::vec![f64::INFINITY; dim];
        let mut hi = alloc::vec![f64::NEG_INFINITY; dim];
        for &i in &self.order[start..end] {
            for (d, &v) in self.points.row(i).iter().enumerate() {
                lo[d] = lo[d].min(v);
                hi[d] = hi[d].max(v);
            }
        }
        let id = self.nodes.len();
        self.nodes.push(Node {
            start,
            end,
            lo: lo.clone(),
            hi: hi.clone(),
            max_radius_sq: f64::INFINITY,
            children: None,
        });
        if end - start > LEAF_SIZE {
            let split_dim = (0..dim)
                .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
                .unwrap_or(0);
            if hi[split_dim] > lo[split_dim] {
                let pts = self.points;
                let mid = (start + end) / 2;
                self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
                    pts.get(a, split_dim)
                        .total_cmp(&pts.get(b, split_dim))
                        .then(a.cmp(&b))
                });
                let left = self.build_node(start, mid);
                let right = self.build_node(mid, end);
                self.nodes[id].children = Some((left, right));
            }
        }
        id
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.rows() == 0
    }

    /// Lower bound on the squared distance from `q` to anything in the box.
    fn box_sq_dist(node: &Node, q: &[f64]) -> f64 {
        let mut acc = 0.0;
        for ((&v, &lo), &hi) in q.iter().zip(&node.lo).zip(&node.hi) {
            let d = if v < lo {
                lo - v
            } else if v > hi {
                v - hi
            } else {
                0.0
            };
            acc += d * d;
        }
        acc
    }

    /// Squared distance from `q` to its `k`-th nearest stored point,
    /// skipping the stored point with index `exclude`.
    pub fn kth_sq_dist(&self, q: &[f64], k: usize, exclude: Option<usize>) -> f64 {
        assert!(k >= 1);
        let mut heap: BinaryHeap<MaxF64> = BinaryHeap::with_capacity(k + 1);
        if !self.nodes.is_empty() {
            self.knn_visit(0, q, k, exclude, &mut heap);
        }
        if heap.len() < k {
            return f64::INFINITY;
        }
        heap.peek().map_or(f64::INFINITY, |m| m.0)
    }

    fn knn_visit(
        &self,
        id: usize,
        q: &[f64],
        k: usize,
        exclude: Option<usize>,
        heap: &mut BinaryHeap<MaxF64>,
    ) {
        let node = &self.nodes[id];
        if heap.len() == k && Self::box_sq_dist(node, q) > heap.peek().map_or(f64::INFINITY, |m| m.0)
        {
            return;
        }
        match node.children {
            None => {
                for &i in &self.order[node.start..node.end] {
                    if Some(i) == exclude {
                        continue;
                    }
                    let d = sq_dist(q, self.points.row(i));
                    if heap.len() < k {
                        heap.push(MaxF64(d));
                    } else if d < heap.peek().map_or(f64::INFINITY, |m| m.0) {
                        heap.pop();
                        heap.push(MaxF64(d));
                    }
                }
            }
            Some((l, r)) => {
                let dl = Self::box_sq_dist(&self.nodes[l], q);
                let dr = Self::box_sq_dist(&self.nodes[r], q);
                let (first, second) = if dl <= dr { (l, r) } else { (r, l) };
                self.knn_visit(first, q, k, exclude, heap);
                self.knn_visit(second, q, k, exclude, heap);
            }
        }
    }

    /// Attaches a squared radius to every stored point (indexed like the
    /// rows of the matrix), enabling [`KdTree::covered`].
    pub fn with_radii(mut self, radii_sq: Vec<f64>) -> Self {
        assert_eq!(radii_sq.len(), self.len());
        for id in (0..self.nodes.len()).rev() {
            let node = &self.nodes[id];
            let m = match node.children {
                None => self.order[node.start..node.end]
                    .iter()
                    .map(|&i| radii_sq[i])
                    .fold(f64::NEG_INFINITY, f64::max),
                Some((l, r)) => self.nodes[l].max_radius_sq.max(self.nodes[r].max_radius_sq),
            };
            self.nodes[id].max_radius_sq = m;
        }
        self.radii_sq = Some(radii_sq);
        self
    }

    /// True iff some stored point `y` has `‖q − y‖² ≤ radius²(y)`.
    pub fn covered(&self, q: &[f64]) -> bool {
        let radii = self
            .radii_sq
            .as_ref()
            .expect("covered() needs radii; call with_radii first");
        !self.nodes.is_empty() && self.covered_visit(0, q, radii)
    }

    fn covered_visit(&self, id: usize, q: &[f64], radii: &[f64]) -> bool {
        let node = &self.nodes[id];
        if Self::box_sq_dist(node, q) > node.max_radius_sq {
            return false;
        }
        match node.children {
            None => self.order[node.start..node.end]
                .iter()
                .any(|&i| sq_dist(q, self.points.row(i)) <= radii[i]),
            Some((l, r)) => {
                let dl = Self::box_sq_dist(&self.nodes[l], q);
                let dr = Self::box_sq_dist(&self.nodes[r], q);
                let (first, second) = if dl <= dr { (l, r) } else { (r, l) };
                self.covered_visit(first, q, radii) || self.covered_visit(second, q, radii)
            }
        }
    }

    /// Squared distance to the nearest stored point.
    pub fn nearest_sq_dist(&self, q: &[f64]) -> f64 {
        self.kth_sq_dist(q, 1, None)
    }
}

/// `k`-th neighbour squared distance of every row within its own set,
/// excluding the row itself.
pub fn self_kth_sq_dists(tree: &KdTree<'_>, k: usize) -> Vec<f64> {
    (0..tree.len())
        .map(|i| tree.kth_sq_dist(tree.points.row(i), k, Some(i)))
        .collect()
}

/// O(n²) reference for [`self_kth_sq_dists`].
pub fn self_kth_sq_dists_brute(points: &Tensor, k: usize) -> Vec<f64> {
    let n = points.rows();
    let mut buf = Vec::with_capacity(n);
    (0..n)
        .map(|i| {
            buf.clear();
            buf.extend(
                (0..n)
                    .filter(|&j| j != i)
                    .map(|j| sq_dist(points.row(i), points.row(j))),
            );
            if buf.len() < k {
                return f64::INFINITY;
            }
            let (_, kth, _) = buf.select_nth_unstable_by(k - 1, f64::total_cmp);
            *kth
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn random_points(n: usize, dim: usize, seed: u64) -> Tensor {
        let mut rng = Rng::new(seed);
        let mut t = Tensor::zeros(n, dim);
        for v in t.data_mut() {
            *v = rng.normal();
        }
        t
    }

    #[test]
    fn tree_matches_brute_force_knn() {
        for (dim, k) in [(1, 1), (2, 3), (3, 5)] {
            let pts = random_points(257, dim, dim as u64);
            let tree = KdTree::build(&pts);
            assert_eq!(self_kth_sq_dists(&tree, k), self_kth_sq_dists_brute(&pts, k));
        }
    }

    #[test]
    fn duplicate_points_are_handled() {
        let pts = Tensor::from_rows(&[[0.0, 0.0]; 40]).unwrap();
        let tree = KdTree::build(&pts);
        assert!(self_kth_sq_dists(&tree, 3).iter().all(|&d| d == 0.0));
    }

    #[test]
    fn covered_matches_brute_force() {
        let pts = random_points(300, 2, 1);
        let queries = random_points(200, 2, 2);
        let radii: Vec<f64> = (0..300).map(|i| 0.001 * (i % 17) as f64).collect();
        let tree = KdTree::build(&pts).with_radii(radii.clone());
        for q in queries.iter_rows() {
            let brute = (0..300).any(|i| sq_dist(q, pts.row(i)) <= radii[i]);
            assert_eq!(tree.covered(q), brute);
        }
    }
}
