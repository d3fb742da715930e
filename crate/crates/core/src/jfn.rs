//! Jacobian Frobenius norm (JFN) of a generator, Jacobian-based truncation
//! (JBT) and Lipschitz upper bounds.
//!
//! Points `G(z)` where `‖J_G(z)‖_F` is large sit on steep transitions between
//! modes; JBT drops the highest-JFN fraction of a batch.

use alloc::vec::Vec;

use crate::autodiff::{matmul, Mlp, Tensor};
use crate::data::{Origin, SampleSet};
use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::{derive_seed, domain, Rng};

pub const DEFAULT_SIGMA: f64 = 1e-3;
pub const DEFAULT_PROBES: usize = 10;
/// Default admissible probe-std range.
pub const SIGMA_RANGE: (f64, f64) = (1e-4, 1e-2);

const POWER_ITER_TOL: f64 = 1e-8;
const POWER_ITER_MAX: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JfnMethod {
    Exact,
    Stochastic { sigma: f64, probes: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct JfnEstimate {
    pub value: f64,
    pub z: Vec<f64>,
    pub method: JfnMethod,
}

/// Jacobians `∂G(z)/∂z` (shape `out × in`) for every latent row, by
/// forward-mode propagation of the input basis.
pub fn jacobians(gen: &Mlp, latents: &Tensor) -> Result<Vec<Tensor>> {
    let (_, pres) = gen.forward_with_preactivations(latents)?;
    let d_in = gen.input_dim();
    let mut out = Vec::with_capacity(latents.rows());
    for r in 0..latents.rows() {
        // tangent: d_in × width, row j = ∂h/∂z_j
        let mut tangent = linalg::identity(d_in);
        for (i, layer) in gen.layers().iter().enumerate() {
            tangent = matmul(&tangent, &layer.weight, false, true)?;
            let act = gen.activation_of(i);
            let pre = pres[i].row(r);
            for j in 0..d_in {
                for (t, &p) in tangent.row_mut(j).iter_mut().zip(pre) {
                    *t *= act.derivative(p);
                }
            }
        }
        out.push(tangent.transpose());
    }
    Ok(out)
}

pub fn jacobian(gen: &Mlp, z: &[f64]) -> Result<Tensor> {
    let t = Tensor::from_vec(1, z.len(), z.to_vec())?;
    Ok(jacobians(gen, &t)?.remove(0))
}

/// Exact `‖J_G(z)‖_F`.
pub fn jfn_exact(gen: &Mlp, z: &[f64]) -> Result<f64> {
    Ok(jacobian(gen, z)?.frobenius_norm())
}

pub fn jfn_exact_batch(gen: &Mlp, latents: &Tensor) -> Result<Vec<f64>> {
    Ok(jacobians(gen, latents)?
        .iter()
        .map(Tensor::frobenius_norm)
        .collect())
}

/// `sqrt( (1/N) Σᵢ ‖G(z + εᵢ) − G(z)‖² / σ² )` with `εᵢ ~ N(0, σ² I)`.
///
/// The mean is unbiased for `‖J‖²_F` when `G` is linear; the square root is
/// returned so the value is on the same scale as [`jfn_exact`].
pub fn jfn_stochastic(gen: &Mlp, z: &[f64], sigma: f64, probes: usize, seed: u64) -> Result<f64> {
    let t = Tensor::from_vec(1, z.len(), z.to_vec())?;
    stochastic_rows(gen, &t, sigma, probes, |_| Rng::new(seed)).map(|v| v[0])
}

/// Stochastic JFN of every latent row. Row `i` draws its probes from the
/// stream `derive_seed(seed, i)`, so the result does not depend on batching.
pub fn jfn_stochastic_batch(
    gen: &Mlp,
    latents: &Tensor,
    sigma: f64,
    probes: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    stochastic_rows(gen, latents, sigma, probes, |i| {
        Rng::new(derive_seed(seed, i as u64))
    })
}

fn stochastic_rows(
    gen: &Mlp,
    latents: &Tensor,
    sigma: f64,
    probes: usize,
    rng_for_row: impl Fn(usize) -> Rng,
) -> Result<Vec<f64>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Contract(alloc::format!("probe std must be positive, got {sigma}")));
    }
    if probes == 0 {
        return Err(Error::Contract("at least one probe is required".into()));
    }
    let base = gen.forward(latents)?;
    let (n, d) = (latents.rows(), latents.cols());
    let mut perturbed = Tensor::zeros(n * probes, d);
    for i in 0..n {
        let mut rng = rng_for_row(i);
        for p in 0..probes {
            let row = perturbed.row_mut(i * probes + p);
            for (v, &z) in row.iter_mut().zip(latents.row(i)) {
                *v = z + sigma * rng.normal();
            }
        }
    }
    let outs = gen.forward(&perturbed)?;
    Ok((0..n)
        .map(|i| {
            let g0 = base.row(i);
            let mean = (0..probes)
                .map(|p| {
                    outs.row(i * probes + p)
                        .iter()
                        .zip(g0)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                })
                .sum::<f64>()
                / (probes as f64 * sigma * sigma);
            libm::sqrt(mean)
        })
        .collect())
}

/// JFN of every latent row by the chosen method.
pub fn jfn_values(gen: &Mlp, latents: &Tensor, method: JfnMethod, seed: u64) -> Result<Vec<f64>> {
    match method {
        JfnMethod::Exact => jfn_exact_batch(gen, latents),
        JfnMethod::Stochastic { sigma, probes } => {
            jfn_stochastic_batch(gen, latents, sigma, probes, derive_seed(seed, domain::PROBES))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JbtConfig {
    pub keep_ratio: f64,
    pub method: JfnMethod,
    /// Seed for the probe stream, kept apart from latent sampling.
    pub seed: u64,
}

impl Default for JbtConfig {
    fn default() -> Self {
        JbtConfig {
            keep_ratio: 0.7,
            method: JfnMethod::Stochastic {
                sigma: DEFAULT_SIGMA,
                probes: DEFAULT_PROBES,
            },
            seed: 42,
        }
    }
}

impl JbtConfig {
    /// Checks ranges. `strict_sigma` enforces the default σ window.
    pub fn validate(&self, strict_sigma: bool) -> Result<()> {
        if !(self.keep_ratio > 0.0 && self.keep_ratio <= 1.0) {
            return Err(Error::Contract(alloc::format!(
                "keep ratio must be in (0, 1], got {}",
                self.keep_ratio
            )));
        }
        if let JfnMethod::Stochastic { sigma, probes } = self.method {
            if probes == 0 {
                return Err(Error::Contract("at least one probe is required".into()));
            }
            let ok = if strict_sigma {
                (SIGMA_RANGE.0..=SIGMA_RANGE.1).contains(&sigma)
            } else {
                sigma > 0.0 && sigma.is_finite()
            };
            if !ok {
                return Err(Error::Contract(alloc::format!(
                    "probe std {sigma} outside [{}, {}]",
                    SIGMA_RANGE.0,
                    SIGMA_RANGE.1
                )));
            }
        }
        Ok(())
    }
}

/// `⌈ratio · n⌉`, ignoring representation error below 1e-9.
pub fn kept_count(ratio: f64, n: usize) -> usize {
    let x = ratio * n as f64;
    (libm::ceil(x - 1e-9) as usize).min(n)
}

/// Indices sorted by ascending score, ties by index.
pub fn rank_by_score(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    idx
}

#[derive(Debug, Clone, PartialEq)]
pub struct JbtResult {
    /// Generator outputs of every latent, in input order.
    pub outputs: Tensor,
    pub jfn_values: Vec<f64>,
    pub kept_mask: Vec<bool>,
    /// Kept outputs in input order.
    pub kept: SampleSet,
    /// Rejected outputs in input order.
    pub rejected: SampleSet,
}

/// Keeps the outputs of the `⌈keep_ratio · n⌉` latents with the smallest JFN.
pub fn jbt_filter(gen: &Mlp, latents: &SampleSet, cfg: &JbtConfig) -> Result<JbtResult> {
    cfg.validate(false)?;
    let n = latents.len();
    let out_dim = gen.output_dim();
    if n == 0 {
        let empty = SampleSet::new(Tensor::zeros(0, out_dim), Origin::Generated, latents.seed)?;
        return Ok(JbtResult {
            outputs: Tensor::zeros(0, out_dim),
            jfn_values: Vec::new(),
            kept_mask: Vec::new(),
            kept: empty.clone(),
            rejected: empty,
        });
    }
    let outputs = gen.forward(&latents.points)?;
    let jfn_values = jfn_values(gen, &latents.points, cfg.method, cfg.seed)?;
    let kept_mask = truncation_mask(&jfn_values, cfg.keep_ratio);
    let (kept_idx, rejected_idx): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| kept_mask[i]);
    Ok(JbtResult {
        kept: SampleSet::new(
            outputs.select_rows(&kept_idx),
            Origin::Generated,
            latents.seed,
        )?,
        rejected: SampleSet::new(
            outputs.select_rows(&rejected_idx),
            Origin::Generated,
            latents.seed,
        )?,
        outputs,
        jfn_values,
        kept_mask,
    })
}

/// Mask of the `⌈ratio · n⌉` lowest scores (ties by index).
pub fn truncation_mask(scores: &[f64], ratio: f64) -> Vec<bool> {
    let order = rank_by_score(scores);
    let keep = kept_count(ratio, scores.len());
    let mut mask = alloc::vec![false; scores.len()];
    for &i in &order[..keep] {
        mask[i] = true;
    }
    mask
}

/// Product of layer spectral norms: a Lipschitz upper bound when every
/// activation is 1-Lipschitz.
pub fn lipschitz_upper(net: &Mlp) -> Result<f64> {
    for i in 0..net.layers().len() {
        if !net.activation_of(i).is_contraction() {
            return Err(Error::Contract(alloc::format!(
                "activation of layer {i} is not 1-Lipschitz"
            )));
        }
    }
    net.layers().iter().try_fold(1.0, |acc, l| {
        Ok(acc * linalg::spectral_norm(&l.weight, POWER_ITER_TOL, POWER_ITER_MAX)?)
    })
}

/// Operator 2-norm of the Jacobian at `z`; a pointwise lower bound on the
/// network's Lipschitz constant.
pub fn jacobian_operator_norm(gen: &Mlp, z: &[f64]) -> Result<f64> {
    linalg::spectral_norm(&jacobian(gen, z)?, POWER_ITER_TOL, POWER_ITER_MAX)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{Activation, Layer};
    use alloc::vec;

    fn linear_gen(a: &[[f64; 2]; 2]) -> Mlp {
        Mlp::from_layers(
            vec![Layer {
                weight: Tensor::from_rows(a).unwrap(),
                bias: Tensor::from_rows(&[[0.5, -1.0]]).unwrap(),
            }],
            Activation::Relu,
            Activation::Identity,
        )
        .unwrap()
    }

    #[test]
    fn linear_generator_exact_jfn() {
        let gen = linear_gen(&[[1.0, 2.0], [3.0, 4.0]]);
        let v = jfn_exact(&gen, &[0.3, -2.0]).unwrap();
        assert!((v - libm::sqrt(30.0)).abs() < 1e-14);
    }

    #[test]
    fn constant_generator_is_zero() {
        let gen = linear_gen(&[[0.0, 0.0], [0.0, 0.0]]);
        assert_eq!(jfn_exact(&gen, &[1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(jfn_stochastic(&gen, &[1.0, 1.0], 1e-3, 10, 4).unwrap(), 0.0);
    }

    #[test]
    fn kept_count_rounding() {
        assert_eq!(kept_count(0.7, 2500), 1750);
        assert_eq!(kept_count(1.0, 7), 7);
        assert_eq!(kept_count(0.5, 3), 2);
        assert_eq!(kept_count(0.1, 2500), 250);
    }

    #[test]
    fn all_ties_keep_first_indices() {
        let mask = truncation_mask(&[1.0; 5], 0.6);
        assert_eq!(mask, vec![true, true, true, false, false]);
    }

    #[test]
    fn jbt_config_validation() {
        let mut cfg = JbtConfig::default();
        assert!(cfg.validate(true).is_ok());
        cfg.keep_ratio = 0.0;
        assert!(cfg.validate(true).is_err());
        cfg.keep_ratio = 1.0;
        cfg.method = JfnMethod::Stochastic {
            sigma: 0.5,
            probes: 10,
        };
        assert!(cfg.validate(true).is_err());
        assert!(cfg.validate(false).is_ok());
    }

    #[test]
    fn jbt_empty_input() {
        let gen = linear_gen(&[[1.0, 0.0], [0.0, 1.0]]);
        let latents = SampleSet::new(Tensor::zeros(0, 2), Origin::Generated, 0).unwrap();
        let r = jbt_filter(&gen, &latents, &JbtConfig::default()).unwrap();
        assert!(r.kept.is_empty() && r.rejected.is_empty());
    }

    #[test]
    fn lipschitz_of_diag() {
        let gen = Mlp::from_layers(
            vec![Layer {
                weight: Tensor::from_rows(&[[3.0, 0.0], [0.0, 1.0]]).unwrap(),
                bias: Tensor::zeros(1, 2),
            }],
            Activation::Relu,
            Activation::Identity,
        )
        .unwrap();
        assert!((lipschitz_upper(&gen).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn lipschitz_rejects_expanding_activation() {
        let mut rng = Rng::new(1);
        let net = Mlp::init(&[2, 3, 1], Activation::LeakyRelu(2.0), Activation::Identity, &mut rng)
            .unwrap();
        assert!(lipschitz_upper(&net).is_err());
    }
}
