//! WGAN-GP training for the 2-D synthetic setting.
//!
//! Defaults follow the small synthetic MLP setup: two hidden layers of 20
//! ReLU units in both networks, batch 32, penalty weight 10, Adam with
//! `lr = 2e-4`, `β₁ = β₂ = 0.5`, five critic updates per generator update
//! and He-uniform weight initialisation.

use alloc::boxed::Box;
use alloc::vec::Vec;
use core::fmt;

use crate::autodiff::{
    param_grads, record_gradient_penalty, Activation, Gradients, Init, Mlp, Tape, Tensor,
};
use crate::data::{self, GaussianMixtureSpec, LatentSpec, Origin, SampleSet};
use crate::error::{Error, Result};
use crate::jfn;
use crate::metrics::improved_pr;
use crate::rng::{derive_seed, domain, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub gen_hidden: Vec<usize>,
    pub disc_hidden: Vec<usize>,
    pub gen_activation: Activation,
    pub disc_activation: Activation,
    pub init: Init,
    pub batch_size: usize,
    pub gp_weight: f64,
    pub lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Generator updates.
    pub steps: usize,
    pub disc_steps_per_gen_step: usize,
    pub latent_dim: usize,
    pub seed: u64,
    /// Trace interval in generator steps; 0 disables the trace.
    pub eval_interval: usize,
    pub eval_samples: usize,
    pub eval_k: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gen_hidden: alloc::vec![20, 20],
            disc_hidden: alloc::vec![20, 20],
            gen_activation: Activation::Relu,
            disc_activation: Activation::Relu,
            init: Init::HeUniform,
            batch_size: 32,
            gp_weight: 10.0,
            lr: 2e-4,
            adam_beta1: 0.5,
            adam_beta2: 0.5,
            adam_eps: 1e-8,
            steps: 100_000,
            disc_steps_per_gen_step: 5,
            latent_dim: 2,
            seed: 42,
            eval_interval: 5_000,
            eval_samples: 2_500,
            eval_k: 3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Contract(alloc::format!("invalid train config: {what}")));
        if self.gen_hidden.contains(&0) || self.disc_hidden.contains(&0) {
            return bad("hidden widths must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if !(self.gp_weight >= 0.0 && self.gp_weight.is_finite()) {
            return bad("gradient penalty weight must be non-negative");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("learning rate must be positive");
        }
        for b in [self.adam_beta1, self.adam_beta2] {
            if !(0.0..1.0).contains(&b) {
                return bad("Adam betas must lie in [0, 1)");
            }
        }
        if self.adam_eps.is_nan() || self.adam_eps <= 0.0 {
            return bad("Adam epsilon must be positive");
        }
        if self.disc_steps_per_gen_step == 0 {
            return bad("at least one discriminator step per generator step");
        }
        if self.latent_dim == 0 {
            return bad("latent dimension must be positive");
        }
        if self.eval_interval > 0 && self.eval_k + 1 > self.eval_samples {
            return bad("evaluation needs more samples than k");
        }
        Ok(())
    }

    pub fn gen_dims(&self, out_dim: usize) -> Vec<usize> {
        let mut d = alloc::vec![self.latent_dim];
        d.extend(&self.gen_hidden);
        d.push(out_dim);
        d
    }

    pub fn disc_dims(&self, in_dim: usize) -> Vec<usize> {
        let mut d = alloc::vec![in_dim];
        d.extend(&self.disc_hidden);
        d.push(1);
        d
    }
}

/// Initial generator and discriminator for a config, each from its own
/// seed domain.
pub fn init_models(cfg: &TrainConfig, data_dim: usize) -> Result<(Mlp, Mlp)> {
    let mut rg = Rng::new(derive_seed(cfg.seed, domain::INIT_GEN));
    let mut rd = Rng::new(derive_seed(cfg.seed, domain::INIT_DISC));
    let gen = Mlp::init_with(
        &cfg.gen_dims(data_dim),
        cfg.gen_activation,
        Activation::Identity,
        cfg.init,
        &mut rg,
    )?;
    let disc = Mlp::init_with(
        &cfg.disc_dims(data_dim),
        cfg.disc_activation,
        Activation::Identity,
        cfg.init,
        &mut rd,
    )?;
    Ok((gen, disc))
}

/// Adam moments for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Gradients,
    pub v: Gradients,
    pub t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(net: &Mlp, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        AdamState {
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
            t: 0,
            lr,
            beta1,
            beta2,
            eps,
        }
    }

    pub fn from_config(net: &Mlp, cfg: &TrainConfig) -> Self {
        Self::new(net, cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    }

    /// One bias-corrected Adam step, in place.
    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients) {
        self.t += 1;
        let c1 = 1.0 - libm::pow(self.beta1, self.t as f64);
        let c2 = 1.0 - libm::pow(self.beta2, self.t as f64);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                p[i] -= lr * mh / (libm::sqrt(vh) + eps);
            }
        };
        for (i, layer) in net.layers_mut().iter_mut().enumerate() {
            update(
                layer.weight.data_mut(),
                grads.weights[i].data(),
                self.m.weights[i].data_mut(),
                self.v.weights[i].data_mut(),
            );
            update(
                layer.bias.data_mut(),
                grads.biases[i].data(),
                self.m.biases[i].data_mut(),
                self.v.biases[i].data_mut(),
            );
        }
    }
}

/// `x̂ = u·real + (1 − u)·fake` with one `u` per row.
pub fn interpolate(real: &Tensor, fake: &Tensor, u: &[f64]) -> Tensor {
    let mut out = real.clone();
    for (r, &ui) in u.iter().enumerate() {
        for (o, &f) in out.row_mut(r).iter_mut().zip(fake.row(r)) {
            *o = ui * *o + (1.0 - ui) * f;
        }
    }
    out
}

/// Critic loss `mean D(fake) − mean D(real) + λ · mean (‖∇D(x̂)‖ − 1)²` and
/// its gradient in the discriminator parameters.
pub fn disc_loss_and_grads(
    disc: &Mlp,
    real: &Tensor,
    fake: &Tensor,
    u: &[f64],
    gp_weight: f64,
) -> Result<(f64, Gradients)> {
    if real.shape() != fake.shape() || u.len() != real.rows() {
        return Err(Error::Dimension {
            expected: (real.rows(), real.cols()),
            found: (fake.rows(), fake.cols()),
        });
    }
    let mut tape = Tape::new();
    let params = disc.bind(&mut tape, true);
    let rv = tape.constant(real.clone());
    let fv = tape.constant(fake.clone());
    let d_real = disc.forward_on_tape(&mut tape, &params, rv)?;
    let d_fake = disc.forward_on_tape(&mut tape, &params, fv)?;
    let m_real = tape.mean(d_real)?;
    let m_fake = tape.mean(d_fake)?;
    let mut loss = tape.sub(m_fake, m_real)?;
    if gp_weight != 0.0 {
        let x_hat = interpolate(real, fake, u);
        let pen = record_gradient_penalty(disc, &mut tape, &params, &x_hat)?;
        let pen = tape.scale(pen, gp_weight)?;
        loss = tape.add(loss, pen)?;
    }
    let value = tape.value(loss).get(0, 0);
    let grads = param_grads(disc, &mut tape, &params, loss)?;
    Ok((value, grads))
}

/// Generator loss `−mean D(G(z))` and its gradient in the generator
/// parameters.
pub fn gen_loss_and_grads(gen: &Mlp, disc: &Mlp, z: &Tensor) -> Result<(f64, Gradients)> {
    let mut tape = Tape::new();
    let gp = gen.bind(&mut tape, true);
    let dp = disc.bind(&mut tape, false);
    let zv = tape.constant(z.clone());
    let fake = gen.forward_on_tape(&mut tape, &gp, zv)?;
    let d = disc.forward_on_tape(&mut tape, &dp, fake)?;
    let m = tape.mean(d)?;
    let loss = tape.scale(m, -1.0)?;
    let value = tape.value(loss).get(0, 0);
    let grads = param_grads(gen, &mut tape, &gp, loss)?;
    Ok((value, grads))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub loss: f64,
    pub grad_norm: f64,
}

fn check_finite(what: &'static str, loss: f64, grads: &Gradients) -> Result<StepStats> {
    let grad_norm = grads.norm();
    if !loss.is_finite() || !grads.is_finite() {
        return Err(Error::NonFinite(alloc::format!(
            "{what}: loss {loss}, gradient norm {grad_norm}"
        )));
    }
    Ok(StepStats { loss, grad_norm })
}

/// One critic update on `real_batch`. Latents and interpolation weights are
/// drawn from `rng` (latents first, row-major, then one `u` per row).
pub fn disc_step(
    gen: &Mlp,
    disc: &mut Mlp,
    real_batch: &Tensor,
    adam: &mut AdamState,
    cfg: &TrainConfig,
    rng: &mut Rng,
) -> Result<StepStats> {
    if real_batch.rows() != cfg.batch_size {
        return Err(Error::Contract(alloc::format!(
            "real batch has {} rows, expected {}",
            real_batch.rows(),
            cfg.batch_size
        )));
    }
    let z = data::draw_latent(LatentSpec { dim: cfg.latent_dim }, cfg.batch_size, rng)?;
    let u: Vec<f64> = (0..cfg.batch_size).map(|_| rng.uniform()).collect();
    let fake = gen.forward(&z)?;
    let (loss, grads) = disc_loss_and_grads(disc, real_batch, &fake, &u, cfg.gp_weight)?;
    let stats = check_finite("discriminator step", loss, &grads)?;
    adam.step(disc, &grads);
    Ok(stats)
}

/// One generator update on fresh latents from `rng`.
pub fn gen_step(
    gen: &mut Mlp,
    disc: &Mlp,
    adam: &mut AdamState,
    cfg: &TrainConfig,
    rng: &mut Rng,
) -> Result<StepStats> {
    let z = data::draw_latent(LatentSpec { dim: cfg.latent_dim }, cfg.batch_size, rng)?;
    let (loss, grads) = gen_loss_and_grads(gen, disc, &z)?;
    let stats = check_finite("generator step", loss, &grads)?;
    adam.step(gen, &grads);
    Ok(stats)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    /// Mean critic loss over the interval.
    pub disc_loss: f64,
    /// Mean generator loss over the interval.
    pub gen_loss: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub generator: Mlp,
    pub discriminator: Mlp,
    pub trace: Vec<TraceRow>,
    /// Product of the generator's layer spectral norms.
    pub lipschitz_upper: f64,
}

#[derive(Debug, Clone)]
pub enum TrainError {
    Invalid(Error),
    Diverged {
        step: usize,
        detail: Error,
        disc_grad_norm: f64,
        gen_grad_norm: f64,
        last_good: Box<Mlp>,
    },
}

impl fmt::Display for TrainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainError::Invalid(e) => write!(f, "{e}"),
            TrainError::Diverged {
                step,
                detail,
                disc_grad_norm,
                gen_grad_norm,
            ..
            } => write!(
                f,
                "training diverged at step {step}: {detail} \
                 (last discriminator grad norm {disc_grad_norm}, last generator grad norm {gen_grad_norm})"
            ),
        }
    }
}

impl core::error::Error for TrainError {}

impl From<Error> for TrainError {
    fn from(e: Error) -> Self {
        TrainError::Invalid(e)
    }
}

/// Fixed evaluation sets used for every trace row of a run.
pub struct EvalSets {
    pub real: SampleSet,
    pub latents: SampleSet,
}

impl EvalSets {
    pub fn new(spec: &GaussianMixtureSpec, cfg: &TrainConfig) -> Result<Self> {
        let real = data::sample_mixture(
            spec,
            cfg.eval_samples,
            derive_seed(cfg.seed, domain::EVAL_REAL),
        )?;
        let latents = data::sample_latent(
            LatentSpec::new(cfg.latent_dim)?,
            cfg.eval_samples,
            derive_seed(cfg.seed, domain::EVAL_LATENT),
        )?;
        Ok(EvalSets { real, latents })
    }

    pub fn evaluate(&self, gen: &Mlp, k: usize) -> Result<(f64, f64)> {
        let fake = SampleSet::new(gen.forward(&self.latents.points)?, Origin::Generated, 0)?;
        let r = improved_pr(&fake, &self.real, k)?;
        Ok((r.precision, r.recall))
    }
}

/// Full training run. Reproducible bit-for-bit from `(spec, cfg)`.
pub fn train(spec: &GaussianMixtureSpec, cfg: &TrainConfig) -> core::result::Result<TrainOutcome, TrainError> {
    train_with(spec, cfg, |_| {})
}

/// [`train`] with a callback invoked on every trace row.
pub fn train_with(
    spec: &GaussianMixtureSpec,
    cfg: &TrainConfig,
    mut on_row: impl FnMut(&TraceRow),
) -> core::result::Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    let (mut gen, mut disc) = init_models(cfg, 2)?;
    let mut adam_g = AdamState::from_config(&gen, cfg);
    let mut adam_d = AdamState::from_config(&disc, cfg);
    let mut rng = Rng::new(derive_seed(cfg.seed, domain::TRAIN));
    let eval = if cfg.eval_interval > 0 && cfg.steps > 0 {
        Some(EvalSets::new(spec, cfg)?)
    } else {
        None
    };

    let mut trace = Vec::new();
    let (mut sum_d, mut sum_g, mut count) = (0.0, 0.0, 0usize);
    let (mut last_dn, mut last_gn) = (0.0, 0.0);
    for step in 1..=cfg.steps {
        let diverged = |detail: Error, gen: &Mlp, dn: f64, gn: f64| TrainError::Diverged {
            step,
            detail,
            disc_grad_norm: dn,
            gen_grad_norm: gn,
            last_good: Box::new(gen.clone()),
        };
        let mut d_loss = 0.0;
        for _ in 0..cfg.disc_steps_per_gen_step {
            let (real, _) = data::draw_mixture(spec, cfg.batch_size, &mut rng)?;
            match disc_step(&gen, &mut disc, &real, &mut adam_d, cfg, &mut rng) {
                Ok(s) => {
                    d_loss = s.loss;
                    last_dn = s.grad_norm;
                }
                Err(e @ Error::NonFinite(_)) => return Err(diverged(e, &gen, last_dn, last_gn)),
                Err(e) => return Err(e.into()),
            }
        }
        let g = match gen_step(&mut gen, &disc, &mut adam_g, cfg, &mut rng) {
            Ok(s) => s,
            Err(e @ Error::NonFinite(_)) => return Err(diverged(e, &gen, last_dn, last_gn)),
            Err(e) => return Err(e.into()),
        };
        last_gn = g.grad_norm;
        sum_d += d_loss;
        sum_g += g.loss;
        count += 1;

        if let Some(eval) = &eval {
            if step % cfg.eval_interval == 0 || step == cfg.steps {
                let (precision, recall) = eval.evaluate(&gen, cfg.eval_k)?;
                let row = TraceRow {
                    step,
                    disc_loss: sum_d / count as f64,
                    gen_loss: sum_g / count as f64,
                    precision,
                    recall,
                };
                on_row(&row);
                trace.push(row);
                (sum_d, sum_g, count) = (0.0, 0.0, 0);
            }
        }
    }
    let lipschitz_upper = jfn::lipschitz_upper(&gen)?;
    Ok(TrainOutcome {
        generator: gen,
        discriminator: disc,
        trace,
        lipschitz_upper,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Layer;
    use alloc::vec;

    fn linear_disc(w: [f64; 2]) -> Mlp {
        Mlp::from_layers(
            vec![Layer {
                weight: Tensor::from_rows(&[w]).unwrap(),
                bias: Tensor::scalar(0.1),
            }],
            Activation::Relu,
            Activation::Identity,
        )
        .unwrap()
    }

    #[test]
    fn default_config_is_valid() {
        let cfg = TrainConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.gen_dims(2), vec![2, 20, 20, 2]);
        assert_eq!(cfg.disc_dims(2), vec![2, 20, 20, 1]);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = TrainConfig::default();
        cfg.batch_size = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = TrainConfig::default();
        cfg.adam_beta2 = 1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = TrainConfig::default();
        cfg.lr = -1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn symmetric_batches_cancel_without_penalty() {
        let disc = linear_disc([0.4, -1.3]);
        let batch = Tensor::from_rows(&[[1.0, 2.0], [-0.5, 0.25]]).unwrap();
        let (loss, _) = disc_loss_and_grads(&disc, &batch, &batch, &[0.3, 0.6], 0.0).unwrap();
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn unit_gradient_disc_has_no_penalty_contribution() {
        let disc = linear_disc([0.6, 0.8]);
        let real = Tensor::from_rows(&[[1.0, 2.0], [-0.5, 0.25]]).unwrap();
        let fake = Tensor::from_rows(&[[0.0, 1.0], [3.0, -2.0]]).unwrap();
        let (with, _) = disc_loss_and_grads(&disc, &real, &fake, &[0.3, 0.6], 10.0).unwrap();
        let (without, _) = disc_loss_and_grads(&disc, &real, &fake, &[0.3, 0.6], 0.0).unwrap();
        assert!((with - without).abs() < 1e-14);
    }

    #[test]
    fn constant_disc_gives_zero_generator_gradient() {
        let disc = Mlp::from_layers(
            vec![Layer {
                weight: Tensor::zeros(1, 2),
                bias: Tensor::scalar(2.5),
            }],
            Activation::Relu,
            Activation::Identity,
        )
        .unwrap();
        let mut rng = Rng::new(1);
        let gen = Mlp::init(&[2, 8, 2], Activation::Relu, Activation::Identity, &mut rng).unwrap();
        let z = data::draw_latent(LatentSpec { dim: 2 }, 16, &mut rng).unwrap();
        let (loss, g) = gen_loss_and_grads(&gen, &disc, &z).unwrap();
        assert_eq!(loss, -2.5);
        assert_eq!(g.norm(), 0.0);
    }

    #[test]
    fn zero_steps_return_initialisation() {
        let spec = GaussianMixtureSpec::grid(9, 9.0, None).unwrap();
        let cfg = TrainConfig {
            steps: 0,
            ..TrainConfig::default()
        };
        let out = train(&spec, &cfg).unwrap();
        let (g0, d0) = init_models(&cfg, 2).unwrap();
        assert_eq!(out.generator, g0);
        assert_eq!(out.discriminator, d0);
        assert!(out.trace.is_empty());
    }

    #[test]
    fn wrong_batch_size_is_rejected() {
        let cfg = TrainConfig::default();
        let (gen, mut disc) = init_models(&cfg, 2).unwrap();
        let mut adam = AdamState::from_config(&disc, &cfg);
        let mut rng = Rng::new(0);
        let batch = Tensor::zeros(3, 2);
        assert!(disc_step(&gen, &mut disc, &batch, &mut adam, &cfg, &mut rng).is_err());
    }

    fn fd_check(net: &Mlp, grads: &Gradients, f: impl Fn(&Mlp) -> f64) {
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for l in 0..net.layers().len() {
            for which in 0..2 {
                let n = if which == 0 { net.layers()[l].weight.len() } else { net.layers()[l].bias.len() };
                for i in 0..n {
                    let bump = |d: f64| {
                        let mut m = net.clone();
                        let t = if which == 0 { &mut m.layers_mut()[l].weight } else { &mut m.layers_mut()[l].bias };
                        t.data_mut()[i] += d;
                        f(&m)
                    };
                    let fd = (bump(h) - bump(-h)) / (2.0 * h);
                    let g = if which == 0 { grads.weights[l].data()[i] } else { grads.biases[l].data()[i] };
                    worst = worst.max((fd - g).abs() / (1e-3 + fd.abs().max(g.abs())));
                }
            }
        }
        assert!(worst < 1e-5, "worst relative error {worst}");
    }

    #[test]
    fn losses_match_finite_differences() {
        let cfg = TrainConfig { disc_activation: Activation::Tanh, gen_activation: Activation::Tanh, ..TrainConfig::default() };
        let (gen, disc) = init_models(&cfg, 2).unwrap();
        let mut rng = Rng::new(5);
        let z = data::draw_latent(LatentSpec { dim: 2 }, 8, &mut rng).unwrap();
        let real = data::draw_latent(LatentSpec { dim: 2 }, 8, &mut rng).unwrap();
        let fake = gen.forward(&z).unwrap();
        let u: Vec<f64> = (0..8).map(|_| rng.uniform()).collect();
        let (_, gd) = disc_loss_and_grads(&disc, &real, &fake, &u, 10.0).unwrap();
        fd_check(&disc, &gd, |d| disc_loss_and_grads(d, &real, &fake, &u, 10.0).unwrap().0);
        let (_, gg) = gen_loss_and_grads(&gen, &disc, &z).unwrap();
        fd_check(&gen, &gg, |g| gen_loss_and_grads(g, &disc, &z).unwrap().0);
    }
}
