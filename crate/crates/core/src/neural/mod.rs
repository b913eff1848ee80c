//! Differentiable building blocks with hand-written backward passes.
//!
//! Everything is `f64` and single-threaded. Forward passes that feed a
//! backward pass return a trace holding the intermediate activations.

pub mod container;
pub mod crf;
pub mod ffn;
pub mod gradcheck;
pub mod lstm;
mod mat;
pub mod train;

pub use crf::CrfParams;
pub use ffn::{ffn_softmax, softmax, Activation, Dense, FfnParams};
pub use gradcheck::{grad_check, GradCheck};
pub use lstm::{lstm_param_count, run_bilstm, Gate, LstmParams, LstmState};
pub use mat::Mat;
pub use train::{sgd_epoch, Differentiable, Dropout, EpochStats, LossKind, ParamSet, TrainConfig};

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable `log Σ exp(xs)`; `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(xs: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.into_iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}
