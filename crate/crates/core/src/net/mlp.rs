//! Fully connected network with SiLU hidden layers and a linear output.

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `x * sigmoid(x)`.
pub fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

pub fn silu_derivative(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

/// Weights and biases in one flat vector. Layer `l` stores its
/// `out x in` weight matrix row-major followed by its `out` biases.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Activations recorded by [`Mlp::forward_trace`] for backpropagation.
#[derive(Clone, Debug)]
pub struct Trace {
    /// Input to every layer; `inputs[0]` is the network input.
    inputs: Vec<Vec<f64>>,
    /// Pre-activation of every hidden layer.
    pre: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::ShapeMismatch(format!("invalid layer sizes {sizes:?}")));
        }
        Ok(Mlp {
            sizes: sizes.to_vec(),
            params: vec![0.0; param_count(sizes)],
        })
    }

    /// Weights uniform in `+-sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn glorot(sizes: &[usize], seed: u64) -> Result<Self> {
        let mut mlp = Self::zeros(sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut offset = 0;
        for w in sizes.windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            let limit = (6.0 / (n_in + n_out) as f64).sqrt();
            for p in &mut mlp.params[offset..offset + n_in * n_out] {
                *p = rng.random_range(-limit..limit);
            }
            offset += n_in * n_out + n_out;
        }
        Ok(mlp)
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        let mut mlp = Self::zeros(sizes)?;
        if params.len() != mlp.params.len() {
            return Err(Error::LengthMismatch {
                expected: mlp.params.len(),
                got: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidInput("network parameters must be finite".into()));
        }
        mlp.params = params;
        Ok(mlp)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn input_size(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.sizes.last().expect("at least two layers")
    }

    /// `(weight offset, n_in, n_out)` per layer; biases follow the weights.
    fn layers(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let mut offset = 0;
        self.sizes.windows(2).map(move |w| {
            let at = offset;
            offset += w[0] * w[1] + w[1];
            (at, w[0], w[1])
        })
    }

    fn affine(&self, at: usize, n_in: usize, n_out: usize, x: &[f64]) -> Vec<f64> {
        let w = &self.params[at..at + n_in * n_out];
        let b = &self.params[at + n_in * n_out..at + n_in * n_out + n_out];
        (0..n_out)
            .map(|o| b[o] + w[o * n_in..(o + 1) * n_in].iter().zip(x).map(|(w, x)| w * x).sum::<f64>())
            .collect()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_size() {
            return Err(Error::ShapeMismatch(format!(
                "network expects {} inputs, got {}",
                self.input_size(),
                x.len()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_trace(x)?.output)
    }

    pub fn forward_trace(&self, x: &[f64]) -> Result<Trace> {
        self.check_input(x)?;
        let n_layers = self.sizes.len() - 1;
        let mut inputs = vec![x.to_vec()];
        let mut pre = Vec::with_capacity(n_layers - 1);
        let mut output = Vec::new();
        for (l, (at, n_in, n_out)) in self.layers().enumerate() {
            let z = self.affine(at, n_in, n_out, &inputs[l]);
            if l + 1 == n_layers {
                output = z;
            } else {
                inputs.push(z.iter().map(|&v| silu(v)).collect());
                pre.push(z);
            }
        }
        Ok(Trace { inputs, pre, output })
    }

    /// Adds the parameter gradient of `grad_output . output` to `grad`.
    pub fn backward(&self, trace: &Trace, grad_output: &[f64], grad: &mut [f64]) {
        let layers: Vec<_> = self.layers().collect();
        let mut delta = grad_output.to_vec();
        for (l, &(at, n_in, n_out)) in layers.iter().enumerate().rev() {
            let x = &trace.inputs[l];
            for o in 0..n_out {
                let row = &mut grad[at + o * n_in..at + (o + 1) * n_in];
                for (g, xi) in row.iter_mut().zip(x) {
                    *g += delta[o] * xi;
                }
                grad[at + n_in * n_out + o] += delta[o];
            }
            if l == 0 {
                break;
            }
            let w = &self.params[at..at + n_in * n_out];
            delta = (0..n_in)
                .map(|i| {
                    let back: f64 = (0..n_out).map(|o| w[o * n_in + i] * delta[o]).sum();
                    back * silu_derivative(trace.pre[l - 1][i])
                })
                .collect();
        }
    }
}
