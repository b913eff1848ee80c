//! Feed-forward layers followed by softmax.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mat::Mat;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// `activation(w · x + b)` with `w` stored out×in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub w: Mat,
    pub b: Vec<f64>,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FfnParams {
    pub layers: Vec<Dense>,
}

/// Per-layer inputs and pre-activations of one forward pass.
#[derive(Debug, Clone)]
pub struct FfnTrace {
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    logits: Vec<f64>,
}

impl FfnTrace {
    pub fn logits(&self) -> &[f64] {
        &self.logits
    }
}

/// Stable softmax.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

impl FfnParams {
    /// Layers mapping `dims[0] → dims[1] → … → dims[last]`; hidden layers use
    /// `hidden`, the final layer is linear (its output feeds softmax).
    pub fn init<R: Rng>(dims: &[usize], hidden: Activation, rng: &mut R) -> Self {
        assert!(dims.len() >= 2, "need at least input and output dims");
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| Dense {
                w: Mat::glorot(w[1], w[0], rng),
                b: vec![0.0; w[1]],
                activation: if i + 2 == dims.len() {
                    Activation::Identity
                } else {
                    hidden
                },
            })
            .collect();
        FfnParams { layers }
    }

    pub fn zeros_like(&self) -> Self {
        FfnParams {
            layers: self
                .layers
                .iter()
                .map(|l| Dense {
                    w: Mat::zeros(l.w.rows(), l.w.cols()),
                    b: vec![0.0; l.b.len()],
                    activation: l.activation,
                })
                .collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.w.cols())
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.w.rows())
    }

    pub fn validate(&self) -> Result<()> {
        for (i, pair) in self.layers.windows(2).enumerate() {
            if pair[0].w.rows() != pair[1].w.cols() {
                return Err(Error::Shape(format!(
                    "layer {i} outputs {} but layer {} expects {}",
                    pair[0].w.rows(),
                    i + 1,
                    pair[1].w.cols()
                )));
            }
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.b.len() != l.w.rows() {
                return Err(Error::Shape(format!("layer {i} bias length mismatch")));
            }
        }
        Ok(())
    }

    pub(crate) fn tensors(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.w.data(), l.b.as_slice()])
            .collect()
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.w.data_mut(), l.b.as_mut_slice()])
            .collect()
    }

    pub fn forward(&self, x: &[f64]) -> Result<FfnTrace> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "FFN input has {} components, expected {}",
                x.len(),
                self.input_dim()
            )));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut current = x.to_vec();
        for layer in &self.layers {
            let mut z = layer.b.clone();
            layer.w.matvec_add(&current, &mut z);
            let out = z.iter().map(|&v| layer.activation.apply(v)).collect();
            inputs.push(std::mem::replace(&mut current, out));
            pre.push(z);
        }
        Ok(FfnTrace {
            inputs,
            pre,
            logits: current,
        })
    }

    /// Final-layer outputs before softmax.
    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(x)?.logits)
    }

    /// Backpropagates `d_logits`, accumulating into `grad`; returns `dL/dx`.
    pub fn backward(&self, trace: &FfnTrace, d_logits: &[f64], grad: &mut FfnParams) -> Vec<f64> {
        let mut delta = d_logits.to_vec();
        for (k, layer) in self.layers.iter().enumerate().rev() {
            for (d, &z) in delta.iter_mut().zip(&trace.pre[k]) {
                *d *= layer.activation.derivative(z);
            }
            let g = &mut grad.layers[k];
            g.w.add_outer(&delta, &trace.inputs[k]);
            for (b, d) in g.b.iter_mut().zip(&delta) {
                *b += d;
            }
            let mut dx = vec![0.0; layer.w.cols()];
            layer.w.tr_matvec_add(&delta, &mut dx);
            delta = dx;
        }
        delta
    }
}

/// Class probabilities `softmax(ffn(x))`.
pub fn ffn_softmax(p: &FfnParams, x: &[f64]) -> Result<Vec<f64>> {
    p.validate()?;
    Ok(softmax(&p.logits(x)?))
}
