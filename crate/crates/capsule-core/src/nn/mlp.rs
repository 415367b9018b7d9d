use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, CoreError, Result};
use crate::math;
use crate::rng::Stream;

/// Hidden-layer activation. The final layer is always linear.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    fn forward(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => math::tanh(z),
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
        }
    }

    /// Derivative expressed in terms of the activation output.
    #[inline]
    fn grad_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Architecture description. `hidden_dims` may be empty (a linear model).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
    pub init_seed: u64,
}

impl MlpSpec {
    pub fn new(
        input_dim: usize,
        hidden_dims: Vec<usize>,
        output_dim: usize,
        activation: Activation,
        init_seed: u64,
    ) -> Self {
        MlpSpec { input_dim, hidden_dims, output_dim, activation, init_seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(CoreError::Config(alloc::format!(
                "mlp dims must be >= 1 (input {}, output {})",
                self.input_dim,
                self.output_dim
            )));
        }
        if self.hidden_dims.iter().any(|&h| h == 0) {
            return Err(CoreError::Config("hidden dims must be >= 1".into()));
        }
        Ok(())
    }

    /// Layer sizes as (fan_in, fan_out) pairs, input to output.
    fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 1);
        let mut fan_in = self.input_dim;
        for &h in &self.hidden_dims {
            dims.push((fan_in, h));
            fan_in = h;
        }
        dims.push((fan_in, self.output_dim));
        dims
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims().iter().map(|&(i, o)| i * o + o).sum()
    }
}

/// A dense network with a flat parameter vector.
///
/// Layout: for each layer, row-major weights (out x in) followed by biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    spec: MlpSpec,
    params: Vec<f64>,
}

impl Mlp {
    /// Initializes weights uniformly in +-sqrt(6 / (fan_in + fan_out))
    /// (Glorot) and biases to zero, deterministically from `spec.init_seed`.
    pub fn init(spec: MlpSpec) -> Result<Self> {
        spec.validate()?;
        let mut stream = Stream::new(spec.init_seed);
        let mut params = Vec::with_capacity(spec.param_count());
        for (fan_in, fan_out) in spec.layer_dims() {
            let limit = math::sqrt(6.0 / (fan_in + fan_out) as f64);
            for _ in 0..fan_in * fan_out {
                params.push(stream.uniform_in(-limit, limit));
            }
            params.extend(core::iter::repeat(0.0).take(fan_out));
        }
        Ok(Mlp { spec, params })
    }

    /// Rebuilds a network from a previously exported spec and parameter vector.
    pub fn from_params(spec: MlpSpec, params: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        check_dim(params.len(), spec.param_count(), "mlp params")?;
        if !math::all_finite(&params) {
            return Err(CoreError::Numeric("mlp params contain non-finite entries".into()));
        }
        Ok(Mlp { spec, params })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
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

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.spec.output_dim
    }

    /// Runs the network, returning per-layer outputs (post-activation); the
    /// last entry is the linear final output.
    fn forward_trace(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let dims = self.spec.layer_dims();
        let n_layers = dims.len();
        let mut outs: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
        let mut offset = 0;
        for (l, &(fan_in, fan_out)) in dims.iter().enumerate() {
            let input: &[f64] = if l == 0 { x } else { &outs[l - 1] };
            let weights = &self.params[offset..offset + fan_in * fan_out];
            let biases = &self.params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            offset += fan_in * fan_out + fan_out;
            let mut out = vec![0.0; fan_out];
            for (o, out_v) in out.iter_mut().enumerate() {
                let mut z = biases[o];
                let row = &weights[o * fan_in..(o + 1) * fan_in];
                for (w, xi) in row.iter().zip(input) {
                    z += w * xi;
                }
                *out_v = if l + 1 == n_layers { z } else { self.spec.activation.forward(z) };
            }
            outs.push(out);
        }
        outs
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(x.len(), self.spec.input_dim, "mlp input")?;
        Ok(self.forward_trace(x).pop().expect("at least one layer"))
    }

    /// Exact reverse-mode gradients of `upstream . output` with respect to the
    /// parameters and the input. Returns (param_grads, input_grads).
    pub fn backward(&self, x: &[f64], upstream: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        check_dim(x.len(), self.spec.input_dim, "mlp input")?;
        check_dim(upstream.len(), self.spec.output_dim, "mlp upstream")?;
        let dims = self.spec.layer_dims();
        let outs = self.forward_trace(x);
        let mut param_grads = vec![0.0; self.params.len()];
        let mut d_out: Vec<f64> = upstream.to_vec();

        // Per-layer parameter offsets.
        let mut offsets = Vec::with_capacity(dims.len());
        let mut acc = 0;
        for &(fan_in, fan_out) in &dims {
            offsets.push(acc);
            acc += fan_in * fan_out + fan_out;
        }

        for l in (0..dims.len()).rev() {
            let (fan_in, fan_out) = dims[l];
            let offset = offsets[l];
            let input: &[f64] = if l == 0 { x } else { &outs[l - 1] };
            let last = l + 1 == dims.len();
            // d_z: gradient at the pre-activation of this layer.
            let mut d_z = d_out;
            if !last {
                for (dz, y) in d_z.iter_mut().zip(&outs[l]) {
                    *dz *= self.spec.activation.grad_from_output(*y);
                }
            }
            let mut d_in = vec![0.0; fan_in];
            let weights = &self.params[offset..offset + fan_in * fan_out];
            for o in 0..fan_out {
                let dz = d_z[o];
                param_grads[offset + fan_in * fan_out + o] = dz; // bias
                let w_row = &weights[o * fan_in..(o + 1) * fan_in];
                let g_row = &mut param_grads[offset + o * fan_in..offset + (o + 1) * fan_in];
                for i in 0..fan_in {
                    g_row[i] = dz * input[i];
                    d_in[i] += w_row[i] * dz;
                }
            }
            d_out = d_in;
        }
        Ok((param_grads, d_out))
    }

    /// Directional derivative of the output with respect to the parameters:
    /// returns J_params(x) . tangent via one exact forward tangent pass.
    pub fn jvp_params(&self, x: &[f64], tangent: &[f64]) -> Result<Vec<f64>> {
        check_dim(x.len(), self.spec.input_dim, "mlp input")?;
        check_dim(tangent.len(), self.params.len(), "mlp tangent")?;
        let dims = self.spec.layer_dims();
        let n_layers = dims.len();
        let mut offset = 0;
        let mut out: Vec<f64> = x.to_vec();
        let mut d_out: Vec<f64> = vec![0.0; x.len()];
        for (l, &(fan_in, fan_out)) in dims.iter().enumerate() {
            let weights = &self.params[offset..offset + fan_in * fan_out];
            let biases = &self.params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            let t_weights = &tangent[offset..offset + fan_in * fan_out];
            let t_biases = &tangent[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            offset += fan_in * fan_out + fan_out;
            let mut next = vec![0.0; fan_out];
            let mut d_next = vec![0.0; fan_out];
            for o in 0..fan_out {
                let mut z = biases[o];
                let mut dz = t_biases[o];
                let w_row = &weights[o * fan_in..(o + 1) * fan_in];
                let t_row = &t_weights[o * fan_in..(o + 1) * fan_in];
                for i in 0..fan_in {
                    z += w_row[i] * out[i];
                    dz += t_row[i] * out[i] + w_row[i] * d_out[i];
                }
                if l + 1 == n_layers {
                    next[o] = z;
                    d_next[o] = dz;
                } else {
                    let y = self.spec.activation.forward(z);
                    next[o] = y;
                    d_next[o] = self.spec.activation.grad_from_output(y) * dz;
                }
            }
            out = next;
            d_out = d_next;
        }
        Ok(d_out)
    }
}
