//! Fully connected network mapping Hamiltonian parameters to circuit angles.
//! Hidden layers use a sigmoid, the output layer is affine.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    /// Row-major `out x in` per layer.
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Mlp {
    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(Error::ShapeMismatch(format!("bad layer sizes {layer_sizes:?}")));
        }
        let weights = layer_sizes.windows(2).map(|w| vec![0.0; w[0] * w[1]]).collect();
        let biases = layer_sizes[1..].iter().map(|&n| vec![0.0; n]).collect();
        Ok(Self { layer_sizes: layer_sizes.to_vec(), weights, biases })
    }

    /// Weights uniform in `+-1/sqrt(fan_in)`, biases zero.
    pub fn random<R: Rng>(layer_sizes: &[usize], rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(layer_sizes)?;
        for (l, w) in net.weights.iter_mut().enumerate() {
            let bound = 1.0 / (layer_sizes[l] as f64).sqrt();
            for x in w.iter_mut() {
                *x = rng.gen_range(-bound..bound);
            }
        }
        Ok(net)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("at least two layers")
    }

    pub fn n_params(&self) -> usize {
        self.weights.iter().chain(&self.biases).map(Vec::len).sum()
    }

    /// Flattened as `W_0, b_0, W_1, b_1, ...`.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::LengthMismatch { expected: self.n_params(), found: flat.len() });
        }
        let mut at = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            let (nw, nb) = (w.len(), b.len());
            w.copy_from_slice(&flat[at..at + nw]);
            at += nw;
            b.copy_from_slice(&flat[at..at + nb]);
            at += nb;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.biases).flatten().all(|x| x.is_finite())
    }

    /// Activations of every layer, input first.
    fn activations(&self, input: &[f64]) -> Result<Vec<Vec<f64>>> {
        if input.len() != self.input_dim() {
            return Err(Error::ShapeMismatch(format!("input of length {} for width {}", input.len(), self.input_dim())));
        }
        let n_layers = self.weights.len();
        let mut acts = vec![input.to_vec()];
        for l in 0..n_layers {
            let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let x = &acts[l];
            let w = &self.weights[l];
            let y: Vec<f64> = (0..n_out)
                .map(|o| {
                    let z = self.biases[l][o] + (0..n_in).map(|i| w[o * n_in + i] * x[i]).sum::<f64>();
                    if l + 1 < n_layers {
                        sigmoid(z)
                    } else {
                        z
                    }
                })
                .collect();
            acts.push(y);
        }
        Ok(acts)
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.activations(input)?.pop().expect("output layer"))
    }

    /// Gradient of `sum_o grad_out[o] * y_o` with respect to the flattened
    /// parameters.
    pub fn backward(&self, input: &[f64], grad_out: &[f64]) -> Result<Vec<f64>> {
        if grad_out.len() != self.output_dim() {
            return Err(Error::ShapeMismatch(format!(
                "output gradient of length {} for width {}",
                grad_out.len(),
                self.output_dim()
            )));
        }
        let acts = self.activations(input)?;
        let n_layers = self.weights.len();
        let mut layer_grads: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(n_layers);
        // delta = dL/dz for the current layer
        let mut delta = grad_out.to_vec();
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let x = &acts[l];
            let mut gw = vec![0.0; n_in * n_out];
            for o in 0..n_out {
                for i in 0..n_in {
                    gw[o * n_in + i] = delta[o] * x[i];
                }
            }
            let gb = delta.clone();
            if l > 0 {
                let w = &self.weights[l];
                delta = (0..n_in)
                    .map(|i| {
                        let back: f64 = (0..n_out).map(|o| w[o * n_in + i] * delta[o]).sum();
                        back * x[i] * (1.0 - x[i])
                    })
                    .collect();
            }
            layer_grads.push((gw, gb));
        }
        layer_grads.reverse();
        let mut flat = Vec::with_capacity(self.n_params());
        for (gw, gb) in layer_grads {
            flat.extend(gw);
            flat.extend(gb);
        }
        Ok(flat)
    }
}
