//! Small dense linear algebra: symmetric eigendecomposition and spectral
//! norms. Sizes here are tiny (≤ a few dozen), so simple methods suffice.

use alloc::vec::Vec;

use crate::autodiff::{matmul, Tensor};
use crate::error::{Error, Result};

const JACOBI_SWEEPS: usize = 100;

/// Eigenvalues and eigenvectors (as columns) of a symmetric matrix by
/// cyclic Jacobi rotations. Eigenvalues are sorted ascending.
pub fn symmetric_eigen(a: &Tensor) -> Result<(Vec<f64>, Tensor)> {
    let n = a.rows();
    a.check_shape(n, n)?;
    let mut m = a.clone();
    let mut v = identity(n);
    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);
    for _ in 0..JACOBI_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += m.get(p, q) * m.get(p, q);
            }
        }
        if libm::sqrt(off) <= 1e-15 * scale {
            return Ok(sorted_pairs(&m, &v));
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let theta = (m.get(q, q) - m.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    Err(Error::NoConvergence {
        what: "Jacobi eigenvalue iteration",
        iterations: JACOBI_SWEEPS,
    })
}

fn sorted_pairs(m: &Tensor, v: &Tensor) -> (Vec<f64>, Tensor) {
    let n = m.rows();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| m.get(a, a).total_cmp(&m.get(b, b)));
    let values = idx.iter().map(|&i| m.get(i, i)).collect();
    let mut vecs = Tensor::zeros(n, n);
    for (new, &old) in idx.iter().enumerate() {
        for r in 0..n {
            vecs.set(r, new, v.get(r, old));
        }
    }
    (values, vecs)
}

pub fn identity(n: usize) -> Tensor {
    let mut t = Tensor::zeros(n, n);
    for i in 0..n {
        t.set(i, i, 1.0);
    }
    t
}

/// `V diag(f(λ)) Vᵀ` for a symmetric matrix.
pub fn symmetric_map(a: &Tensor, f: impl Fn(f64) -> f64) -> Result<Tensor> {
    let (vals, vecs) = symmetric_eigen(a)?;
    let n = a.rows();
    let mut scaled = vecs.clone();
    for r in 0..n {
        for (c, &l) in vals.iter().enumerate() {
            scaled.set(r, c, vecs.get(r, c) * f(l));
        }
    }
    matmul(&scaled, &vecs, false, true)
}

/// Largest singular value by power iteration on `AᵀA`, stopping when the
/// estimate changes by less than `rel_tol` relatively.
pub fn spectral_norm(a: &Tensor, rel_tol: f64, max_iter: usize) -> Result<f64> {
    if !a.is_finite() {
        return Err(Error::NonFinite("spectral norm input".into()));
    }
    let n = a.cols();
    if a.frobenius_norm() == 0.0 {
        return Ok(0.0);
    }
    // Start from the row-sum direction plus a small tilt so that the start
    // is not orthogonal to the top singular vector for structured inputs.
    let mut v: Vec<f64> = (0..n)
        .map(|j| {
            let col: f64 = (0..a.rows()).map(|i| a.get(i, j).abs()).sum();
            col + 1e-3 * (j + 1) as f64
        })
        .collect();
    normalize(&mut v);
    let mut sigma = 0.0;
    for _ in 0..max_iter {
        let av: Vec<f64> = (0..a.rows())
            .map(|i| a.row(i).iter().zip(&v).map(|(x, y)| x * y).sum())
            .collect();
        let mut atav: Vec<f64> = (0..n)
            .map(|j| (0..a.rows()).map(|i| a.get(i, j) * av[i]).sum())
            .collect();
        let norm_av = libm::sqrt(av.iter().map(|x| x * x).sum());
        let next = norm_av;
        let nrm = normalize(&mut atav);
        if nrm == 0.0 {
            return Ok(next);
        }
        v = atav;
        if (next - sigma).abs() <= rel_tol * next {
            // one more matvec with the refined vector
            let av: f64 = (0..a.rows())
                .map(|i| {
                    let s: f64 = a.row(i).iter().zip(&v).map(|(x, y)| x * y).sum();
                    s * s
                })
                .sum();
            return Ok(libm::sqrt(av).max(next));
        }
        sigma = next;
    }
    Err(Error::NoConvergence {
        what: "spectral-norm power iteration",
        iterations: max_iter,
    })
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = libm::sqrt(v.iter().map(|x| x * x).sum());
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
    n
}
