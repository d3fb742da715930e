//! Synthetic targets: equally weighted 2-D Gaussian mixtures whose modes are
//! at least `D` apart, and the standard Gaussian latent sampler.

use alloc::vec::Vec;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Default component standard deviation as a fraction of the mode spacing.
pub const DEFAULT_STD_FRACTION: f64 = 0.075;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixtureSpec {
    centers: Vec<[f64; 2]>,
    component_std: f64,
    min_distance: f64,
}

impl GaussianMixtureSpec {
    /// `m` modes on a `√m × √m` axis-aligned grid with the given spacing,
    /// centred at the origin. `component_std` defaults to `0.075 · spacing`.
    pub fn grid(m: usize, spacing: f64, component_std: Option<f64>) -> Result<Self> {
        let side = libm::sqrt(m as f64) as usize;
        let side = (side.saturating_sub(1)..=side + 1)
            .find(|s| s * s == m)
            .ok_or_else(|| {
                Error::Contract(alloc::format!(
                    "grid mixtures need a perfect-square mode count, got {m}"
                ))
            })?;
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::Contract(alloc::format!(
                "mode spacing must be positive, got {spacing}"
            )));
        }
        let offset = (side as f64 - 1.0) / 2.0;
        let mut centers = Vec::with_capacity(m);
        for i in 0..side {
            for j in 0..side {
                centers.push([
                    (i as f64 - offset) * spacing,
                    (j as f64 - offset) * spacing,
                ]);
            }
        }
        let std = component_std.unwrap_or(DEFAULT_STD_FRACTION * spacing);
        let mut spec = Self::from_centers(centers, std)?;
        if m == 1 {
            spec.min_distance = spacing;
        }
        Ok(spec)
    }

    /// Mixture with explicit centers; the minimum pairwise distance is
    /// computed (infinite for a single center).
    pub fn from_centers(centers: Vec<[f64; 2]>, component_std: f64) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::Contract("a mixture needs at least one center".into()));
        }
        if !(component_std > 0.0 && component_std.is_finite()) {
            return Err(Error::Contract(alloc::format!(
                "component std must be positive, got {component_std}"
            )));
        }
        if centers.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("mixture center".into()));
        }
        let mut min_distance = f64::INFINITY;
        for (i, a) in centers.iter().enumerate() {
            for b in &centers[i + 1..] {
                let d = libm::hypot(a[0] - b[0], a[1] - b[1]);
                min_distance = min_distance.min(d);
            }
        }
        if min_distance == 0.0 {
            return Err(Error::Contract("mixture centers must be distinct".into()));
        }
        Ok(GaussianMixtureSpec {
            centers,
            component_std,
            min_distance,
        })
    }

    pub fn modes(&self) -> usize {
        self.centers.len()
    }

    pub fn centers(&self) -> &[[f64; 2]] {
        &self.centers
    }

    pub fn component_std(&self) -> f64 {
        self.component_std
    }

    /// Smallest pairwise center distance `D`.
    pub fn min_distance(&self) -> f64 {
        self.min_distance
    }

    pub fn weights(&self) -> Vec<f64> {
        alloc::vec![1.0 / self.modes() as f64; self.modes()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatentSpec {
    pub dim: usize,
}

impl LatentSpec {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Contract("latent dimension must be at least 1".into()));
        }
        Ok(LatentSpec { dim })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Real,
    Generated,
}

/// `n × dim` points plus where they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub points: Tensor,
    pub origin: Origin,
    pub seed: u64,
}

impl SampleSet {
    pub fn new(points: Tensor, origin: Origin, seed: u64) -> Result<Self> {
        if !points.is_finite() {
            return Err(Error::NonFinite("sample set".into()));
        }
        Ok(SampleSet {
            points,
            origin,
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.points.row(i)
    }
}

/// Draws `n` points and their component labels.
///
/// Per point: label `rng.below(M)`, then two Box–Muller normals for x and y.
pub fn sample_mixture_labeled(
    spec: &GaussianMixtureSpec,
    n: usize,
    seed: u64,
) -> Result<(SampleSet, Vec<usize>)> {
    let mut rng = Rng::new(seed);
    let (points, labels) = draw_mixture(spec, n, &mut rng)?;
    Ok((SampleSet::new(points, Origin::Real, seed)?, labels))
}

pub fn sample_mixture(spec: &GaussianMixtureSpec, n: usize, seed: u64) -> Result<SampleSet> {
    sample_mixture_labeled(spec, n, seed).map(|(s, _)| s)
}

/// Mixture draw from an existing stream; used by the training loop.
pub fn draw_mixture(
    spec: &GaussianMixtureSpec,
    n: usize,
    rng: &mut Rng,
) -> Result<(Tensor, Vec<usize>)> {
    if n == 0 {
        return Err(Error::Contract("sample size must be at least 1".into()));
    }
    let mut points = Tensor::zeros(n, 2);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = rng.below(spec.modes());
        let center = spec.centers[c];
        let x = center[0] + spec.component_std * rng.normal();
        let y = center[1] + spec.component_std * rng.normal();
        points.row_mut(i).copy_from_slice(&[x, y]);
        labels.push(c);
    }
    Ok((points, labels))
}

pub fn sample_latent(spec: LatentSpec, n: usize, seed: u64) -> Result<SampleSet> {
    let mut rng = Rng::new(seed);
    let points = draw_latent(spec, n, &mut rng)?;
    SampleSet::new(points, Origin::Generated, seed)
}

/// i.i.d. `N(0, I)` rows drawn in row-major order.
pub fn draw_latent(spec: LatentSpec, n: usize, rng: &mut Rng) -> Result<Tensor> {
    if spec.dim == 0 {
        return Err(Error::Contract("latent dimension must be at least 1".into()));
    }
    let mut z = Tensor::zeros(n, spec.dim);
    for v in z.data_mut() {
        *v = rng.normal();
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_square_grid() {
        assert!(GaussianMixtureSpec::grid(8, 1.0, None).is_err());
        assert!(GaussianMixtureSpec::grid(9, 0.0, None).is_err());
        assert!(GaussianMixtureSpec::grid(9, 1.0, Some(-1.0)).is_err());
    }

    #[test]
    fn nine_mode_grid_spacing() {
        let spec = GaussianMixtureSpec::grid(9, 9.0, None).unwrap();
        assert_eq!(spec.modes(), 9);
        assert_eq!(spec.min_distance(), 9.0);
        assert_eq!(spec.component_std(), DEFAULT_STD_FRACTION * 9.0);
        let sum: f64 = spec.weights().iter().sum();
        assert!((sum - 1.0).abs() < 1e-15);
        // centred at the origin
        let cx: f64 = spec.centers().iter().map(|c| c[0]).sum();
        assert_eq!(cx, 0.0);
    }

    #[test]
    fn degenerate_single_mode() {
        let spec = GaussianMixtureSpec::grid(1, 1.0, Some(1e-12)).unwrap();
        let s = sample_mixture(&spec, 3, 5).unwrap();
        for p in s.points.iter_rows() {
            assert!(p[0].abs() < 1e-9 && p[1].abs() < 1e-9);
        }
    }

    #[test]
    fn latent_dim_zero_is_rejected() {
        assert!(LatentSpec::new(0).is_err());
    }

    #[test]
    fn same_seed_same_latents() {
        let spec = LatentSpec::new(3).unwrap();
        assert_eq!(
            sample_latent(spec, 50, 9).unwrap(),
            sample_latent(spec, 50, 9).unwrap()
        );
        assert_ne!(
            sample_latent(spec, 50, 9).unwrap().points,
            sample_latent(spec, 50, 10).unwrap().points
        );
    }
}
