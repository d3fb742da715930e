use alloc::vec::Vec;

use super::knn::{self, KdTree};
use crate::autodiff::{matmul, Tensor};
use crate::data::SampleSet;
use crate::error::{Error, Result};
use crate::linalg;

/// Relative tolerance for negative eigenvalues of the symmetrised
/// covariance product before it is considered not PSD.
pub const PSD_TOLERANCE: f64 = 1e-8;

fn check_nonempty_pair(a: &SampleSet, b: &SampleSet) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Contract("distance between empty point sets".into()));
    }
    if a.dim() != b.dim() {
        return Err(Error::Dimension {
            expected: (a.len(), a.dim()),
            found: (b.len(), b.dim()),
        });
    }
    Ok(())
}

fn directed_hausdorff(from: &Tensor, to: &Tensor) -> f64 {
    let tree = KdTree::build(to);
    from.iter_rows()
        .map(|p| tree.nearest_sq_dist(p))
        .fold(0.0, f64::max)
}

/// `max(max_a min_b ‖a−b‖, max_b min_a ‖a−b‖)`.
pub fn hausdorff(a: &SampleSet, b: &SampleSet) -> Result<f64> {
    check_nonempty_pair(a, b)?;
    let d = directed_hausdorff(&a.points, &b.points).max(directed_hausdorff(&b.points, &a.points));
    Ok(libm::sqrt(d))
}

/// O(n·m) reference for [`hausdorff`].
pub fn hausdorff_brute(a: &SampleSet, b: &SampleSet) -> Result<f64> {
    check_nonempty_pair(a, b)?;
    let directed = |x: &Tensor, y: &Tensor| {
        x.iter_rows()
            .map(|p| {
                y.iter_rows()
                    .map(|q| knn::sq_dist(p, q))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    Ok(libm::sqrt(
        directed(&a.points, &b.points).max(directed(&b.points, &a.points)),
    ))
}

/// Sample mean and unbiased covariance of the rows.
pub fn mean_and_covariance(points: &Tensor) -> Result<(Vec<f64>, Tensor)> {
    let (n, d) = (points.rows(), points.cols());
    if n < d + 1 || n < 2 {
        return Err(Error::Contract(alloc::format!(
            "need at least dim + 1 = {} points for a covariance, got {n}",
            d + 1
        )));
    }
    let mut mean = alloc::vec![0.0; d];
    for r in points.iter_rows() {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut cov = Tensor::zeros(d, d);
    for r in points.iter_rows() {
        for i in 0..d {
            let di = r[i] - mean[i];
            for j in 0..=i {
                let v = cov.get(i, j) + di * (r[j] - mean[j]);
                cov.set(i, j, v);
            }
        }
    }
    for i in 0..d {
        for j in 0..=i {
            let v = cov.get(i, j) / (n - 1) as f64;
            cov.set(i, j, v);
            cov.set(j, i, v);
        }
    }
    Ok((mean, cov))
}

/// Fréchet distance between Gaussian fits of two point sets:
/// `‖m_A − m_B‖² + Tr(Σ_A + Σ_B − 2 (Σ_A Σ_B)^{1/2})`.
///
/// The trace of the square root is taken from the symmetric PSD matrix
/// `Σ_A^{1/2} Σ_B Σ_A^{1/2}`, which has the same eigenvalues as `Σ_A Σ_B`.
/// Slightly negative eigenvalues are clamped to zero.
pub fn frechet_gaussian(a: &SampleSet, b: &SampleSet) -> Result<f64> {
    check_nonempty_pair(a, b)?;
    let (ma, ca) = mean_and_covariance(&a.points)?;
    let (mb, cb) = mean_and_covariance(&b.points)?;
    frechet_from_moments(&ma, &ca, &mb, &cb)
}

pub fn frechet_from_moments(ma: &[f64], ca: &Tensor, mb: &[f64], cb: &Tensor) -> Result<f64> {
    let mean_term: f64 = ma.iter().zip(mb).map(|(x, y)| (x - y) * (x - y)).sum();
    let trace = |t: &Tensor| (0..t.rows()).map(|i| t.get(i, i)).sum::<f64>();
    let sqrt_a = linalg::symmetric_map(ca, |l| libm::sqrt(l.max(0.0)))?;
    let inner = matmul(&matmul(&sqrt_a, cb, false, false)?, &sqrt_a, false, false)?;
    let sym = inner.zip_map(&inner.transpose(), |x, y| 0.5 * (x + y));
    let (vals, _) = linalg::symmetric_eigen(&sym)?;
    let scale = vals.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut tr_sqrt = 0.0;
    for &l in &vals {
        if l < -PSD_TOLERANCE * scale {
            return Err(Error::Domain(alloc::format!(
                "covariance product has eigenvalue {l}, not PSD"
            )));
        }
        tr_sqrt += libm::sqrt(l.max(0.0));
    }
    Ok(mean_term + trace(ca) + trace(cb) - 2.0 * tr_sqrt)
}
