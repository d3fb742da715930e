//! JSON checkpoints for [`Mlp`] networks.

use std::path::Path;

use ganland_core::autodiff::Layer;
use ganland_core::{Activation, Mlp, Tensor};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{CliError, Result};
use crate::io::write_atomic;

/// Serialized network. Weights are row-major `(out, in)` per layer and
/// `activations` has one entry per layer. Floats round-trip bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub layer_dims: Vec<usize>,
    pub activations: Vec<String>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub seed: u64,
    #[serde(default)]
    pub meta: Map<String, Value>,
}

pub fn activation_name(a: Activation) -> String {
    match a {
        Activation::Identity => "identity".into(),
        Activation::Relu => "relu".into(),
        Activation::Tanh => "tanh".into(),
        Activation::LeakyRelu(s) => format!("leaky_relu:{s}"),
    }
}

pub fn parse_activation(s: &str) -> Option<Activation> {
    match s {
        "identity" => Some(Activation::Identity),
        "relu" => Some(Activation::Relu),
        "tanh" => Some(Activation::Tanh),
        "leaky_relu" => Some(Activation::LeakyRelu(0.2)),
        _ => {
            let slope = s.strip_prefix("leaky_relu:")?.parse::<f64>().ok()?;
            slope.is_finite().then_some(Activation::LeakyRelu(slope))
        }
    }
}

impl Checkpoint {
    pub fn from_mlp(net: &Mlp, seed: u64, meta: Map<String, Value>) -> Self {
        let layers = net.layers();
        Checkpoint {
            layer_dims: net.layer_dims(),
            activations: (0..layers.len()).map(|i| activation_name(net.activation_of(i))).collect(),
            weights: layers.iter().map(|l| l.weight.data().to_vec()).collect(),
            biases: layers.iter().map(|l| l.bias.data().to_vec()).collect(),
            seed,
            meta,
        }
    }

    pub fn to_mlp(&self) -> std::result::Result<Mlp, String> {
        let n = self.layer_dims.len().checked_sub(1).filter(|&n| n > 0).ok_or("need at least two layer dims")?;
        if self.activations.len() != n || self.weights.len() != n || self.biases.len() != n {
            return Err(format!("expected {n} activations, weight and bias arrays"));
        }
        let acts = self
            .activations
            .iter()
            .map(|s| parse_activation(s).ok_or_else(|| format!("unknown activation {s:?}")))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if acts[..n - 1].windows(2).any(|w| w[0] != w[1]) {
            return Err("hidden layers must share one activation".into());
        }
        let layers = (0..n)
            .map(|i| {
                let (fan_in, fan_out) = (self.layer_dims[i], self.layer_dims[i + 1]);
                let weight = Tensor::from_vec(fan_out, fan_in, self.weights[i].clone())
                    .map_err(|e| format!("layer {i} weights: {e}"))?;
                let bias = Tensor::from_vec(1, fan_out, self.biases[i].clone())
                    .map_err(|e| format!("layer {i} biases: {e}"))?;
                Ok(Layer { weight, bias })
            })
            .collect::<std::result::Result<Vec<_>, String>>()?;
        let hidden = if n > 1 { acts[0] } else { Activation::Relu };
        Mlp::from_layers(layers, hidden, acts[n - 1]).map_err(|e| e.to_string())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("checkpoint serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::format(path, e.to_string()))
    }
}

/// Reads a checkpoint and rebuilds the network.
pub fn load_mlp(path: &Path) -> Result<(Mlp, Checkpoint)> {
    let ck = Checkpoint::load(path)?;
    let net = ck.to_mlp().map_err(|m| CliError::format(path, m))?;
    Ok((net, ck))
}
