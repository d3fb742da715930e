use alloc::vec::Vec;

use super::tape::{Tape, Var};
use super::tensor::{self, Tensor};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Identity,
    Relu,
    LeakyRelu(f64),
    Tanh,
}

/// Weight initialisation. Biases are always uniform in `±1/√fan_in`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Init {
    /// Weights uniform in `±1/√fan_in`.
    #[default]
    Uniform,
    /// Weights uniform in `±√(6/fan_in)`.
    HeUniform,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => tensor::relu(x),
            Activation::LeakyRelu(s) => tensor::leaky_relu(x, s),
            Activation::Tanh => libm::tanh(x),
        }
    }

    /// Derivative, with the ReLU kink assigned the left slope.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => tensor::step(x, 0.0),
            Activation::LeakyRelu(s) => tensor::step(x, s),
            Activation::Tanh => {
                let t = libm::tanh(x);
                1.0 - t * t
            }
        }
    }

    /// True when the activation is 1-Lipschitz.
    pub fn is_contraction(self) -> bool {
        match self {
            Activation::LeakyRelu(s) => s.abs() <= 1.0,
            _ => true,
        }
    }

    fn on_tape(self, tape: &mut Tape, x: Var) -> Result<Var> {
        match self {
            Activation::Identity => Ok(x),
            Activation::Relu => tape.relu(x),
            Activation::LeakyRelu(s) => tape.leaky_relu(x, s),
            Activation::Tanh => tape.tanh(x),
        }
    }
}

/// One dense layer: `y = x Wᵀ + b` with `W` shaped `(out, in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Tensor,
    pub bias: Tensor,
}

/// Dense feed-forward network. Hidden layers share one activation; the last
/// layer has its own.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
    hidden_activation: Activation,
    output_activation: Activation,
}

/// Per-layer gradients (or any per-parameter quantity) mirroring an [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Tensor>,
    pub biases: Vec<Tensor>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Gradients {
            weights: net
                .layers
                .iter()
                .map(|l| Tensor::zeros(l.weight.rows(), l.weight.cols()))
                .collect(),
            biases: net
                .layers
                .iter()
                .map(|l| Tensor::zeros(1, l.bias.cols()))
                .collect(),
        }
    }

    pub fn tensors(&self) -> impl Iterator<Item = &Tensor> {
        self.weights.iter().chain(&self.biases)
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(
            self.tensors()
                .flat_map(|t| t.data())
                .map(|v| v * v)
                .sum::<f64>(),
        )
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().all(Tensor::is_finite)
    }
}

/// Tape handles for an MLP's parameters.
#[derive(Debug, Clone)]
pub struct BoundMlp {
    pub weights: Vec<Var>,
    pub biases: Vec<Var>,
}

impl BoundMlp {
    pub fn params(&self) -> Vec<Var> {
        self.weights.iter().chain(&self.biases).copied().collect()
    }
}

impl Mlp {
    /// Builds a network from explicit layers, checking that dims chain.
    pub fn from_layers(
        layers: Vec<Layer>,
        hidden_activation: Activation,
        output_activation: Activation,
    ) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Contract("an MLP needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            l.bias.check_shape(1, l.weight.rows())?;
            if i > 0 {
                let prev = layers[i - 1].weight.rows();
                if l.weight.cols() != prev {
                    return Err(Error::Dimension {
                        expected: (l.weight.rows(), prev),
                        found: (l.weight.rows(), l.weight.cols()),
                    });
                }
            }
            if !l.weight.is_finite() || !l.bias.is_finite() {
                return Err(Error::NonFinite(alloc::format!("parameters of layer {i}")));
            }
        }
        Ok(Mlp {
            layers,
            hidden_activation,
            output_activation,
        })
    }

    /// [`Init::Uniform`] initialisation.
    pub fn init(
        layer_dims: &[usize],
        hidden_activation: Activation,
        output_activation: Activation,
        rng: &mut Rng,
    ) -> Result<Self> {
        Self::init_with(layer_dims, hidden_activation, output_activation, Init::Uniform, rng)
    }

    /// Random initialisation, weights row-major then bias, layer by layer.
    pub fn init_with(
        layer_dims: &[usize],
        hidden_activation: Activation,
        output_activation: Activation,
        scheme: Init,
        rng: &mut Rng,
    ) -> Result<Self> {
        if layer_dims.len() < 2 || layer_dims.contains(&0) {
            return Err(Error::Contract(alloc::format!(
                "invalid layer dims {layer_dims:?}"
            )));
        }
        let layers = layer_dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = 1.0 / libm::sqrt(fan_in as f64);
                let w_bound = match scheme {
                    Init::Uniform => bound,
                    Init::HeUniform => libm::sqrt(6.0 / fan_in as f64),
                };
                let mut weight = Tensor::zeros(fan_out, fan_in);
                for v in weight.data_mut() {
                    *v = rng.uniform_in(-w_bound, w_bound);
                }
                let mut bias = Tensor::zeros(1, fan_out);
                for v in bias.data_mut() {
                    *v = rng.uniform_in(-bound, bound);
                }
                Layer { weight, bias }
            })
            .collect();
        Mlp::from_layers(layers, hidden_activation, output_activation)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden_activation
    }

    pub fn output_activation(&self) -> Activation {
        self.output_activation
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.layers.len() + 1);
        dims.push(self.input_dim());
        dims.extend(self.layers.iter().map(|l| l.weight.rows()));
        dims
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].weight.rows()
    }

    pub fn activation_of(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            self.output_activation
        } else {
            self.hidden_activation
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    /// Batch forward pass without a tape. Bit-identical to the taped pass.
    pub fn forward(&self, batch: &Tensor) -> Result<Tensor> {
        batch.check_shape(batch.rows(), self.input_dim())?;
        if !batch.is_finite() {
            return Err(Error::NonFinite("forward input".into()));
        }
        let mut h = batch.clone();
        for (i, l) in self.layers.iter().enumerate() {
            let pre = tensor::add_row(&tensor::matmul(&h, &l.weight, false, true)?, &l.bias)?;
            let act = self.activation_of(i);
            h = match act {
                Activation::Identity => pre,
                _ => pre.map(|x| act.apply(x)),
            };
        }
        Ok(h)
    }

    /// Forward pass that also returns every pre-activation, one per layer.
    pub fn forward_with_preactivations(&self, batch: &Tensor) -> Result<(Tensor, Vec<Tensor>)> {
        batch.check_shape(batch.rows(), self.input_dim())?;
        let mut pres = Vec::with_capacity(self.layers.len());
        let mut h = batch.clone();
        for (i, l) in self.layers.iter().enumerate() {
            let pre = tensor::add_row(&tensor::matmul(&h, &l.weight, false, true)?, &l.bias)?;
            let act = self.activation_of(i);
            h = pre.map(|x| act.apply(x));
            pres.push(pre);
        }
        Ok((h, pres))
    }

    /// Places the parameters on `tape`; `trainable` decides whether
    /// gradients flow into them.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> BoundMlp {
        let mut leaf = |t: &Tensor| {
            if trainable {
                tape.variable(t.clone())
            } else {
                tape.constant(t.clone())
            }
        };
        let weights = self.layers.iter().map(|l| leaf(&l.weight)).collect();
        let biases = self.layers.iter().map(|l| leaf(&l.bias)).collect();
        BoundMlp { weights, biases }
    }

    pub fn forward_on_tape(&self, tape: &mut Tape, params: &BoundMlp, x: Var) -> Result<Var> {
        tape.value(x).check_shape(tape.value(x).rows(), self.input_dim())?;
        let mut h = x;
        for i in 0..self.layers.len() {
            let pre = tape.matmul_nt(h, params.weights[i])?;
            let pre = tape.add_row(pre, params.biases[i])?;
            h = self.activation_of(i).on_tape(tape, pre)?;
        }
        Ok(h)
    }

    /// In-place `θ ← θ + scale · delta` over all parameters.
    pub fn axpy(&mut self, scale: f64, delta: &Gradients) {
        for (l, (dw, db)) in self
            .layers
            .iter_mut()
            .zip(delta.weights.iter().zip(&delta.biases))
        {
            for (p, d) in l.weight.data_mut().iter_mut().zip(dw.data()) {
                *p += scale * d;
            }
            for (p, d) in l.bias.data_mut().iter_mut().zip(db.data()) {
                *p += scale * d;
            }
        }
    }
}

/// Reads the gradients of a scalar `loss` with respect to every parameter
/// of `net` bound as `params`.
pub fn param_grads(
    net: &Mlp,
    tape: &mut Tape,
    params: &BoundMlp,
    loss: Var,
) -> Result<Gradients> {
    let vars = params.params();
    let g = tape.grad(loss, &vars)?;
    let n = net.layers.len();
    let weights = g[..n].iter().map(|&v| tape.value(v).clone()).collect();
    let biases = g[n..].iter().map(|&v| tape.value(v).clone()).collect();
    Ok(Gradients { weights, biases })
}

/// `∇ₓ net(x)` for every row of `x`, for a scalar-output network.
pub fn input_grad(net: &Mlp, x: &Tensor) -> Result<Tensor> {
    if net.output_dim() != 1 {
        return Err(Error::Contract(alloc::format!(
            "input gradient needs a scalar-output network, got {} outputs",
            net.output_dim()
        )));
    }
    let mut tape = Tape::new();
    let params = net.bind(&mut tape, false);
    let xv = tape.variable(x.clone());
    let y = net.forward_on_tape(&mut tape, &params, xv)?;
    // Rows are independent, so the gradient of the sum is the per-row gradient.
    let s = tape.sum_all(y)?;
    let g = tape.grad(s, &[xv])?[0];
    Ok(tape.value(g).clone())
}

/// Records `mean_i (‖∇ₓ D(x̂ᵢ)‖ − 1)²` on `tape`, differentiably in the
/// discriminator parameters.
pub fn record_gradient_penalty(
    disc: &Mlp,
    tape: &mut Tape,
    params: &BoundMlp,
    x_hat: &Tensor,
) -> Result<Var> {
    if disc.output_dim() != 1 {
        return Err(Error::Contract(
            "gradient penalty needs a scalar-output discriminator".into(),
        ));
    }
    let xv = tape.variable(x_hat.clone());
    let d = disc.forward_on_tape(tape, params, xv)?;
    let s = tape.sum_all(d)?;
    let gx = tape.grad(s, &[xv])?[0];
    let norms = tape.row_norms(gx)?;
    let dev = tape.add_scalar(norms, -1.0)?;
    let sq = tape.mul(dev, dev)?;
    tape.mean(sq)
}

/// Gradient penalty and its exact gradient with respect to the
/// discriminator's parameters (double backpropagation).
///
/// A row whose input gradient is exactly zero contributes penalty 1 and a
/// zero subgradient.
pub fn grad_penalty_grads(disc: &Mlp, x_hat: &Tensor) -> Result<(f64, Gradients)> {
    let mut tape = Tape::new();
    let params = disc.bind(&mut tape, true);
    let pen = record_gradient_penalty(disc, &mut tape, &params, x_hat)?;
    let value = tape.value(pen).get(0, 0);
    let grads = param_grads(disc, &mut tape, &params, pen)?;
    Ok((value, grads))
}
