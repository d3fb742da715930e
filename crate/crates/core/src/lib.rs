//! Numerics for training small WGAN-GP models on disconnected 2-D Gaussian
//! mixtures and studying their off-manifold samples.
//!
//! The crate is `no_std` (with `alloc`) and performs no IO. It contains:
//!
//! - [`autodiff`]: dense reverse-mode AD over 2-D tensors, with support for
//!   differentiating through a backward pass (needed by the gradient penalty).
//! - [`data`]: seeded mixtures of Gaussians on a grid and the latent sampler.
//! - [`train`]: the WGAN-GP loop with Adam.
//! - [`jfn`]: Jacobian Frobenius norms (exact and stochastic), Jacobian-based
//!   truncation and Lipschitz upper bounds.
//! - [`metrics`]: improved precision/recall, marginal precision, Hausdorff and
//!   Fréchet distances.
//! - [`bounds`]: Gaussian isoperimetric precision bounds and the special
//!   functions they need (Φ, Φ⁻¹, Lambert W).
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod autodiff;
pub mod bounds;
pub mod data;
mod error;
pub mod jfn;
pub mod linalg;
pub mod metrics;
pub mod rng;
pub mod stats;
pub mod train;

pub use autodiff::{Activation, Mlp, Tape, Tensor, Var};
pub use data::{GaussianMixtureSpec, LatentSpec, Origin, SampleSet};
pub use error::{Error, Result};
pub use rng::Rng;
