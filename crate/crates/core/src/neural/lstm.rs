//! LSTM cell with input, forget and output gates:
//!
//! ```text
//! i = σ(W_i x + U_i h + b_i)      f = σ(W_f x + U_f h + b_f)
//! o = σ(W_o x + U_o h + b_o)      c̃ = tanh(W_c x + U_c h + b_c)
//! c' = f ∘ c + i ∘ c̃              h' = o ∘ tanh(c')
//! ```

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mat::Mat;
use super::sigmoid;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input = 0,
    Forget = 1,
    Output = 2,
    Cell = 3,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Input, Gate::Forget, Gate::Output, Gate::Cell];
}

/// Weights of one gate: `w` is n×m (input), `u` is n×n (recurrent).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    pub w: Mat,
    pub u: Mat,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    n: usize,
    m: usize,
    gates: [GateParams; 4],
}

/// `4(nm + n² + n)`
pub fn lstm_param_count(n: usize, m: usize) -> usize {
    4 * (n * m + n * n + n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(n: usize) -> Self {
        LstmState {
            h: vec![0.0; n],
            c: vec![0.0; n],
        }
    }
}

#[derive(Debug, Clone)]
struct StepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    // i, f, o, c̃ activations
    act: [Vec<f64>; 4],
    tanh_c: Vec<f64>,
}

/// Activations of a forward run, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct LstmTrace {
    steps: Vec<StepCache>,
    hidden: Vec<Vec<f64>>,
}

impl LstmTrace {
    pub fn hidden(&self) -> &[Vec<f64>] {
        &self.hidden
    }

    pub fn last_hidden(&self) -> Option<&[f64]> {
        self.hidden.last().map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.hidden.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hidden.is_empty()
    }
}

impl LstmParams {
    pub fn zeros(n: usize, m: usize) -> Self {
        let gate = || GateParams {
            w: Mat::zeros(n, m),
            u: Mat::zeros(n, n),
            b: vec![0.0; n],
        };
        LstmParams {
            n,
            m,
            gates: [gate(), gate(), gate(), gate()],
        }
    }

    /// Glorot-uniform weights, zero biases except the forget gate at +1.
    pub fn init<R: Rng>(n: usize, m: usize, rng: &mut R) -> Self {
        let mut p = LstmParams::zeros(n, m);
        for (k, gate) in p.gates.iter_mut().enumerate() {
            gate.w = Mat::glorot(n, m, rng);
            gate.u = Mat::glorot(n, n, rng);
            if k == Gate::Forget as usize {
                gate.b.iter_mut().for_each(|b| *b = 1.0);
            }
        }
        p
    }

    pub fn hidden_dim(&self) -> usize {
        self.n
    }

    pub fn input_dim(&self) -> usize {
        self.m
    }

    pub fn gate(&self, gate: Gate) -> &GateParams {
        &self.gates[gate as usize]
    }

    pub fn gate_mut(&mut self, gate: Gate) -> &mut GateParams {
        &mut self.gates[gate as usize]
    }

    /// Actual number of stored scalars.
    pub fn element_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub(crate) fn tensors(&self) -> Vec<&[f64]> {
        self.gates
            .iter()
            .flat_map(|g| [g.w.data(), g.u.data(), g.b.as_slice()])
            .collect()
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.gates
            .iter_mut()
            .flat_map(|g| [g.w.data_mut(), g.u.data_mut(), g.b.as_mut_slice()])
            .collect()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.m {
            return Err(Error::Shape(format!(
                "LSTM input has {} components, expected {}",
                x.len(),
                self.m
            )));
        }
        Ok(())
    }

    fn step_cached(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> StepCache {
        let n = self.n;
        let act: [Vec<f64>; 4] = std::array::from_fn(|k| {
            let g = &self.gates[k];
            let mut a = g.b.clone();
            g.w.matvec_add(x, &mut a);
            g.u.matvec_add(h_prev, &mut a);
            if k == Gate::Cell as usize {
                a.iter_mut().for_each(|v| *v = v.tanh());
            } else {
                a.iter_mut().for_each(|v| *v = sigmoid(*v));
            }
            a
        });
        let c: Vec<f64> = (0..n)
            .map(|j| act[1][j] * c_prev[j] + act[0][j] * act[3][j])
            .collect();
        let tanh_c = c.iter().map(|v| v.tanh()).collect();
        StepCache {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            c_prev: c_prev.to_vec(),
            act,
            tanh_c,
        }
    }

    /// One cell update.
    pub fn lstm_step(&self, x: &[f64], state: &LstmState) -> Result<LstmState> {
        self.check_input(x)?;
        if state.h.len() != self.n || state.c.len() != self.n {
            return Err(Error::Shape(format!(
                "LSTM state has dims ({}, {}), expected {}",
                state.h.len(),
                state.c.len(),
                self.n
            )));
        }
        let cache = self.step_cached(x, &state.h, &state.c);
        let c: Vec<f64> = (0..self.n)
            .map(|j| cache.act[1][j] * state.c[j] + cache.act[0][j] * cache.act[3][j])
            .collect();
        let h = (0..self.n).map(|j| cache.act[2][j] * cache.tanh_c[j]).collect();
        Ok(LstmState { h, c })
    }

    /// Runs the sequence from a zero state, keeping the trace.
    pub fn forward(&self, xs: &[Vec<f64>]) -> Result<LstmTrace> {
        let mut steps = Vec::with_capacity(xs.len());
        let mut hidden = Vec::with_capacity(xs.len());
        let mut h = vec![0.0; self.n];
        let mut c = vec![0.0; self.n];
        for x in xs {
            self.check_input(x)?;
            let cache = self.step_cached(x, &h, &c);
            c = (0..self.n)
                .map(|j| cache.act[1][j] * cache.c_prev[j] + cache.act[0][j] * cache.act[3][j])
                .collect();
            h = (0..self.n).map(|j| cache.act[2][j] * cache.tanh_c[j]).collect();
            hidden.push(h.clone());
            steps.push(cache);
        }
        Ok(LstmTrace { steps, hidden })
    }

    /// Backpropagates `d_hidden[t]` (gradient of the loss w.r.t. each output
    /// hidden state) through the run, accumulating into `grad` and returning
    /// the gradient w.r.t. each input.
    pub fn backward(
        &self,
        trace: &LstmTrace,
        d_hidden: &[Vec<f64>],
        grad: &mut LstmParams,
    ) -> Vec<Vec<f64>> {
        let n = self.n;
        let len = trace.steps.len();
        let mut dxs = vec![vec![0.0; self.m]; len];
        let mut dh_next = vec![0.0; n];
        let mut dc_next = vec![0.0; n];
        let mut da: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; n]);

        for t in (0..len).rev() {
            let s = &trace.steps[t];
            let [i, f, o, g] = &s.act;
            for j in 0..n {
                let dh = d_hidden[t][j] + dh_next[j];
                let dc = dh * o[j] * (1.0 - s.tanh_c[j] * s.tanh_c[j]) + dc_next[j];
                da[0][j] = dc * g[j] * i[j] * (1.0 - i[j]);
                da[1][j] = dc * s.c_prev[j] * f[j] * (1.0 - f[j]);
                da[2][j] = dh * s.tanh_c[j] * o[j] * (1.0 - o[j]);
                da[3][j] = dc * i[j] * (1.0 - g[j] * g[j]);
                dc_next[j] = dc * f[j];
            }
            dh_next.iter_mut().for_each(|v| *v = 0.0);
            for k in 0..4 {
                let p = &self.gates[k];
                let gk = &mut grad.gates[k];
                gk.w.add_outer(&da[k], &s.x);
                gk.u.add_outer(&da[k], &s.h_prev);
                for (b, d) in gk.b.iter_mut().zip(&da[k]) {
                    *b += d;
                }
                p.w.tr_matvec_add(&da[k], &mut dxs[t]);
                p.u.tr_matvec_add(&da[k], &mut dh_next);
            }
        }
        dxs
    }
}

/// Concatenates forward and backward hidden states: `out[t] = [→h_t ; ←h_t]`.
pub fn run_bilstm(fwd: &LstmParams, bwd: &LstmParams, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let (f, b) = bilstm_traces(fwd, bwd, xs)?;
    Ok(concat_bidirectional(&f, &b))
}

pub(crate) fn bilstm_traces(
    fwd: &LstmParams,
    bwd: &LstmParams,
    xs: &[Vec<f64>],
) -> Result<(LstmTrace, LstmTrace)> {
    if fwd.n != bwd.n || fwd.m != bwd.m {
        return Err(Error::Shape(format!(
            "bidirectional halves differ: ({}, {}) vs ({}, {})",
            fwd.n, fwd.m, bwd.n, bwd.m
        )));
    }
    let reversed: Vec<Vec<f64>> = xs.iter().rev().cloned().collect();
    Ok((fwd.forward(xs)?, bwd.forward(&reversed)?))
}

/// Aligns a backward-direction trace (which ran on the reversed input) with
/// the forward one.
pub(crate) fn concat_bidirectional(fwd: &LstmTrace, bwd: &LstmTrace) -> Vec<Vec<f64>> {
    let len = fwd.len();
    (0..len)
        .map(|t| {
            let mut v = fwd.hidden[t].clone();
            v.extend_from_slice(&bwd.hidden[len - 1 - t]);
            v
        })
        .collect()
}
