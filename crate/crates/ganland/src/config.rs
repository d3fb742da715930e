//! Experiment configuration, read from TOML or JSON.

use std::path::{Path, PathBuf};

use ganland_core::autodiff::Init;
use ganland_core::jfn::{JbtConfig, JfnMethod, DEFAULT_PROBES, DEFAULT_SIGMA};
use ganland_core::train::TrainConfig;
use ganland_core::GaussianMixtureSpec;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{activation_name, parse_activation};
use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub mixture: MixtureSection,
    pub train: TrainSection,
    pub jbt: JbtSection,
    pub metrics: MetricsSection,
}

/// Square grid of `modes` Gaussians with spacing `distance`; `std`
/// defaults to a fixed fraction of the spacing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixtureSection {
    pub modes: usize,
    pub distance: f64,
    pub std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub gen_hidden: Vec<usize>,
    pub disc_hidden: Vec<usize>,
    pub gen_activation: String,
    pub disc_activation: String,
    /// `he_uniform` or `uniform`.
    pub init: String,
    pub batch_size: usize,
    pub gp_weight: f64,
    pub lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub steps: usize,
    pub disc_steps_per_gen_step: usize,
    pub latent_dim: usize,
    pub eval_interval: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodName {
    Exact,
    Stochastic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JbtSection {
    pub keep_ratio: f64,
    pub method: MethodName,
    pub sigma: f64,
    pub probes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSection {
    pub k: usize,
    pub n_eval: usize,
    /// Buckets of the marginal-precision curve.
    pub buckets: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 42,
            output_dir: PathBuf::from("out"),
            mixture: MixtureSection::default(),
            train: TrainSection::default(),
            jbt: JbtSection::default(),
            metrics: MetricsSection::default(),
        }
    }
}

impl Default for MixtureSection {
    fn default() -> Self {
        MixtureSection { modes: 9, distance: 9.0, std: None }
    }
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            gen_hidden: t.gen_hidden,
            disc_hidden: t.disc_hidden,
            gen_activation: activation_name(t.gen_activation),
            disc_activation: activation_name(t.disc_activation),
            init: init_name(t.init).into(),
            batch_size: t.batch_size,
            gp_weight: t.gp_weight,
            lr: t.lr,
            adam_beta1: t.adam_beta1,
            adam_beta2: t.adam_beta2,
            adam_eps: t.adam_eps,
            steps: t.steps,
            disc_steps_per_gen_step: t.disc_steps_per_gen_step,
            latent_dim: t.latent_dim,
            eval_interval: t.eval_interval,
        }
    }
}

impl Default for JbtSection {
    fn default() -> Self {
        JbtSection { keep_ratio: 0.7, method: MethodName::Stochastic, sigma: DEFAULT_SIGMA, probes: DEFAULT_PROBES }
    }
}

impl Default for MetricsSection {
    fn default() -> Self {
        MetricsSection { k: 3, n_eval: 2500, buckets: 10 }
    }
}

fn init_name(i: Init) -> &'static str {
    match i {
        Init::Uniform => "uniform",
        Init::HeUniform => "he_uniform",
    }
}

impl JbtSection {
    pub fn method(&self) -> JfnMethod {
        match self.method {
            MethodName::Exact => JfnMethod::Exact,
            MethodName::Stochastic => JfnMethod::Stochastic { sigma: self.sigma, probes: self.probes },
        }
    }
}

/// Validated, core-typed view of an [`ExperimentConfig`].
#[derive(Debug, Clone)]
pub struct Resolved {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub mixture: GaussianMixtureSpec,
    pub train: TrainConfig,
    pub jbt: JbtConfig,
    pub k: usize,
    pub n_eval: usize,
    pub buckets: usize,
}

impl ExperimentConfig {
    /// Parses JSON when the extension is `.json`, TOML otherwise.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config file {}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let parsed = if is_json {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        } else {
            toml::from_str(&text).map_err(|e| e.to_string())
        };
        parsed.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn resolve(&self) -> Result<Resolved> {
        let bad = |m: String| CliError::Config(m);
        let m = &self.mixture;
        let mixture = GaussianMixtureSpec::grid(m.modes, m.distance, m.std).map_err(|e| bad(e.to_string()))?;
        let t = &self.train;
        let act = |s: &str| parse_activation(s).ok_or_else(|| bad(format!("unknown activation {s:?}")));
        let init = match t.init.as_str() {
            "uniform" => Init::Uniform,
            "he_uniform" => Init::HeUniform,
            other => return Err(bad(format!("unknown init {other:?}"))),
        };
        let mt = &self.metrics;
        if mt.n_eval < mt.k + 1 {
            return Err(bad(format!("metrics.n_eval ({}) must be at least k + 1 ({})", mt.n_eval, mt.k + 1)));
        }
        if mt.k == 0 || mt.buckets == 0 {
            return Err(bad("metrics.k and metrics.buckets must be positive".into()));
        }
        let train = TrainConfig {
            gen_hidden: t.gen_hidden.clone(),
            disc_hidden: t.disc_hidden.clone(),
            gen_activation: act(&t.gen_activation)?,
            disc_activation: act(&t.disc_activation)?,
            init,
            batch_size: t.batch_size,
            gp_weight: t.gp_weight,
            lr: t.lr,
            adam_beta1: t.adam_beta1,
            adam_beta2: t.adam_beta2,
            adam_eps: t.adam_eps,
            steps: t.steps,
            disc_steps_per_gen_step: t.disc_steps_per_gen_step,
            latent_dim: t.latent_dim,
            seed: self.seed,
            eval_interval: t.eval_interval,
            eval_samples: mt.n_eval,
            eval_k: mt.k,
        };
        train.validate().map_err(|e| bad(e.to_string()))?;
        let jbt = JbtConfig { keep_ratio: self.jbt.keep_ratio, method: self.jbt.method(), seed: self.seed };
        jbt.validate(false).map_err(|e| bad(e.to_string()))?;
        Ok(Resolved {
            seed: self.seed,
            output_dir: self.output_dir.clone(),
            mixture,
            train,
            jbt,
            k: mt.k,
            n_eval: mt.n_eval,
            buckets: mt.buckets,
        })
    }
}

impl Resolved {
    /// Evenly spaced kept ratios `1/b, 2/b, ..., 1`.
    pub fn ratio_grid(&self) -> Vec<f64> {
        ratio_grid(self.buckets)
    }
}

pub fn ratio_grid(buckets: usize) -> Vec<f64> {
    (1..=buckets).map(|i| i as f64 / buckets as f64).collect()
}
