use alloc::vec::Vec;

use super::pr::improved_pr;
use crate::autodiff::Tensor;
use crate::data::{Origin, SampleSet};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, Rng};

/// Pairs of 1-D uniform laws whose support overlap is known in closed form.
/// `X ~ U[0, 1]`, `Y ~ U[o, 1 + o]`, and the limiting precision of `X`
/// against `Y` is the fraction of `[0, 1]` covered by `Y`'s support.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OverlapFamily {
    Identical,
    HalfOverlap,
    Disjoint,
}

impl OverlapFamily {
    pub fn offset(self) -> f64 {
        match self {
            OverlapFamily::Identical => 0.0,
            OverlapFamily::HalfOverlap => 0.5,
            OverlapFamily::Disjoint => 2.0,
        }
    }

    /// Limiting precision (and, by symmetry, recall).
    pub fn target(self) -> f64 {
        match self {
            OverlapFamily::Identical => 1.0,
            OverlapFamily::HalfOverlap => 0.5,
            OverlapFamily::Disjoint => 0.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            OverlapFamily::Identical => "identical",
            OverlapFamily::HalfOverlap => "half-overlap",
            OverlapFamily::Disjoint => "disjoint",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub k: usize,
    pub seeds: usize,
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub target: f64,
    pub abs_error: f64,
}

/// `k = ⌈(ln n)^1.5⌉`, which satisfies `k / ln n → ∞` and `k / n → 0`.
pub fn default_k_rule(n: usize) -> usize {
    libm::ceil(libm::pow(libm::log(n as f64), 1.5)) as usize
}

fn uniform_set(n: usize, offset: f64, rng: &mut Rng, seed: u64) -> Result<SampleSet> {
    let data = (0..n).map(|_| offset + rng.uniform()).collect();
    SampleSet::new(Tensor::from_vec(n, 1, data)?, Origin::Generated, seed)
}

/// Seed-averaged `|α_k^n − ᾱ|` for each `n` in `n_grid`.
pub fn pr_convergence_experiment(
    family: OverlapFamily,
    n_grid: &[usize],
    seeds: &[u64],
    k_rule: impl Fn(usize) -> usize,
) -> Result<Vec<ConvergenceRow>> {
    if seeds.is_empty() {
        return Err(Error::Contract("at least one seed is required".into()));
    }
    n_grid
        .iter()
        .map(|&n| {
            let k = k_rule(n);
            let mut sum_p = 0.0;
            let mut sum_r = 0.0;
            for &seed in seeds {
                let s = derive_seed(seed, n as u64);
                let mut rng = Rng::new(s);
                let x = uniform_set(n, 0.0, &mut rng, s)?;
                let y = uniform_set(n, family.offset(), &mut rng, s)?;
                let report = improved_pr(&x, &y, k)?;
                sum_p += report.precision;
                sum_r += report.recall;
            }
            let mean_precision = sum_p / seeds.len() as f64;
            Ok(ConvergenceRow {
                n,
                k,
                seeds: seeds.len(),
                mean_precision,
                mean_recall: sum_r / seeds.len() as f64,
                target: family.target(),
                abs_error: (mean_precision - family.target()).abs(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_rule_values() {
        assert_eq!(default_k_rule(10_000), 28);
        assert_eq!(default_k_rule(100), 10);
    }

    #[test]
    fn small_run_is_deterministic() {
        let a = pr_convergence_experiment(OverlapFamily::HalfOverlap, &[500], &[1, 2], default_k_rule)
            .unwrap();
        let b = pr_convergence_experiment(OverlapFamily::HalfOverlap, &[500], &[1, 2], default_k_rule)
            .unwrap();
        assert_eq!(a, b);
        assert!(a[0].abs_error < 0.1);
    }
}
