//! Per-example SGD with global-norm clipping and inverted dropout.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::crf::CrfParams;
use super::ffn::FfnParams;
use super::lstm::LstmParams;
use super::mat::Mat;
use crate::{seed, Error, Result};

/// A flat view over a model's trainable tensors. `tensors` and
/// `tensors_mut` must enumerate the same tensors in the same order.
pub trait ParamSet {
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;
    fn zeros_like(&self) -> Self;

    fn scalar_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn squared_norm(&self) -> f64 {
        self.tensors().iter().flat_map(|t| t.iter()).map(|v| v * v).sum()
    }

    /// `self += alpha * other`.
    fn add_scaled(&mut self, alpha: f64, other: &Self) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            super::mat::axpy(alpha, src, dst);
        }
    }
}

impl ParamSet for FfnParams {
    fn tensors(&self) -> Vec<&[f64]> {
        FfnParams::tensors(self)
    }
    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        FfnParams::tensors_mut(self)
    }
    fn zeros_like(&self) -> Self {
        FfnParams::zeros_like(self)
    }
}

impl ParamSet for LstmParams {
    fn tensors(&self) -> Vec<&[f64]> {
        LstmParams::tensors(self)
    }
    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        LstmParams::tensors_mut(self)
    }
    fn zeros_like(&self) -> Self {
        LstmParams::zeros(self.hidden_dim(), self.input_dim())
    }
}

impl ParamSet for CrfParams {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![self.transitions.data()]
    }
    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.transitions.data_mut()]
    }
    fn zeros_like(&self) -> Self {
        CrfParams::new(self.num_labels())
    }
}

impl ParamSet for Mat {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![self.data()]
    }
    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.data_mut()]
    }
    fn zeros_like(&self) -> Self {
        Mat::zeros(self.rows(), self.cols())
    }
}

/// Training objective of a tagger head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    CrossEntropy,
    Crf,
}

/// Inverted dropout: kept units are scaled by `1 / (1 - rate)` so the
/// expected activation is unchanged and inference needs no rescaling.
pub struct Dropout {
    rate: f64,
    rng: ChaCha8Rng,
}

impl Dropout {
    pub fn new(rate: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
        }
        Ok(Dropout {
            rate,
            rng: seed::rng(seed),
        })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn mask(&mut self, n: usize) -> Vec<f64> {
        if self.rate == 0.0 {
            return vec![1.0; n];
        }
        let keep = 1.0 / (1.0 - self.rate);
        (0..n)
            .map(|_| if self.rng.gen::<f64>() < self.rate { 0.0 } else { keep })
            .collect()
    }
}

/// A model trainable by [`sgd_epoch`].
pub trait Differentiable {
    type Example;
    type Params: ParamSet;

    fn params(&self) -> &Self::Params;
    fn params_mut(&mut self) -> &mut Self::Params;

    /// Loss without dropout.
    fn loss(&self, example: &Self::Example) -> Result<f64>;

    /// Loss and its gradient w.r.t. [`Self::params`]. Dropout applies only
    /// when `dropout` is given.
    fn loss_and_grad(
        &self,
        example: &Self::Example,
        dropout: Option<&mut Dropout>,
    ) -> Result<(f64, Self::Params)>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub dropout: f64,
    pub clip_norm: f64,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            dropout: 0.5,
            clip_norm: 5.0,
            max_epochs: 95,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate {} is invalid", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout rate {} outside [0, 1)", self.dropout)));
        }
        if self.clip_norm.is_nan() || self.clip_norm < 0.0 {
            return Err(Error::Config(format!("clip norm {} is invalid", self.clip_norm)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub clipped: usize,
    pub max_grad_norm: f64,
}

/// One pass of per-example SGD over `examples` in a shuffled order that
/// depends only on `(cfg.seed, epoch)`.
pub fn sgd_epoch<M: Differentiable>(
    model: &mut M,
    examples: &[M::Example],
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<EpochStats> {
    cfg.validate()?;
    if examples.is_empty() {
        return Err(Error::Empty("training examples"));
    }
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.shuffle(&mut seed::rng(seed::derive_indexed(cfg.seed, "shuffle", epoch as u64)));
    let mut dropout = if cfg.dropout > 0.0 {
        Some(Dropout::new(
            cfg.dropout,
            seed::derive_indexed(cfg.seed, "dropout", epoch as u64),
        )?)
    } else {
        None
    };

    let mut total = 0.0;
    let mut clipped = 0;
    let mut max_norm: f64 = 0.0;
    for &i in &order {
        let (loss, grad) = model.loss_and_grad(&examples[i], dropout.as_mut())?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { index: i });
        }
        let norm = grad.squared_norm().sqrt();
        if !norm.is_finite() {
            return Err(Error::NonFiniteLoss { index: i });
        }
        max_norm = max_norm.max(norm);
        let mut scale = cfg.learning_rate;
        if cfg.clip_norm > 0.0 && norm > cfg.clip_norm {
            scale *= cfg.clip_norm / norm;
            clipped += 1;
        }
        model.params_mut().add_scaled(-scale, &grad);
        total += loss;
    }
    Ok(EpochStats {
        epoch,
        mean_loss: total / examples.len() as f64,
        clipped,
        max_grad_norm: max_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Least squares on `w·x`: loss `(w·x - y)^2 / 2`.
    struct Linear {
        w: Mat,
    }

    impl Differentiable for Linear {
        type Example = (Vec<f64>, f64);
        type Params = Mat;

        fn params(&self) -> &Mat {
            &self.w
        }
        fn params_mut(&mut self) -> &mut Mat {
            &mut self.w
        }
        fn loss(&self, (x, y): &Self::Example) -> Result<f64> {
            let r = super::super::mat::dot(self.w.data(), x) - y;
            Ok(0.5 * r * r)
        }
        fn loss_and_grad(&self, ex: &Self::Example, _: Option<&mut Dropout>) -> Result<(f64, Mat)> {
            let r = super::super::mat::dot(self.w.data(), &ex.0) - ex.1;
            let g = Mat::from_vec(1, ex.0.len(), ex.0.iter().map(|x| r * x).collect())?;
            Ok((0.5 * r * r, g))
        }
    }

    fn data() -> Vec<(Vec<f64>, f64)> {
        (0..20)
            .map(|i| {
                let x = vec![1.0, i as f64 / 10.0];
                let y = 0.5 - 2.0 * x[1];
                (x, y)
            })
            .collect()
    }

    #[test]
    fn sgd_converges_on_linear_regression() {
        let mut m = Linear { w: Mat::zeros(1, 2) };
        let cfg = TrainConfig { learning_rate: 0.1, dropout: 0.0, ..Default::default() };
        let ex = data();
        let first = sgd_epoch(&mut m, &ex, &cfg, 0).unwrap().mean_loss;
        let mut last = first;
        for e in 1..200 {
            last = sgd_epoch(&mut m, &ex, &cfg, e).unwrap().mean_loss;
        }
        assert!(last < first * 1e-3);
        assert!((m.w.get(0, 0) - 0.5).abs() < 1e-2);
        assert!((m.w.get(0, 1) + 2.0).abs() < 1e-2);
    }

    #[test]
    fn epochs_are_reproducible() {
        let cfg = TrainConfig { learning_rate: 0.05, dropout: 0.0, seed: 3, ..Default::default() };
        let run = || {
            let mut m = Linear { w: Mat::zeros(1, 2) };
            for e in 0..5 {
                sgd_epoch(&mut m, &data(), &cfg, e).unwrap();
            }
            m.w
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn clipping_bounds_the_step() {
        let mut m = Linear { w: Mat::zeros(1, 1) };
        let cfg = TrainConfig { learning_rate: 1.0, dropout: 0.0, clip_norm: 5.0, ..Default::default() };
        let stats = sgd_epoch(&mut m, &[(vec![1.0], 100.0)], &cfg, 0).unwrap();
        assert_eq!(stats.clipped, 1);
        assert!((m.w.get(0, 0) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn zero_learning_rate_leaves_params() {
        let mut m = Linear { w: Mat::from_vec(1, 2, vec![0.3, -0.1]).unwrap() };
        let cfg = TrainConfig { learning_rate: 0.0, ..Default::default() };
        let stats = sgd_epoch(&mut m, &data(), &cfg, 0).unwrap();
        assert_eq!(m.w.data(), &[0.3, -0.1]);
        assert!(stats.mean_loss > 0.0);
    }

    #[test]
    fn invalid_config_rejected() {
        let mut m = Linear { w: Mat::zeros(1, 2) };
        let cfg = TrainConfig { dropout: 1.0, ..Default::default() };
        assert!(matches!(sgd_epoch(&mut m, &data(), &cfg, 0), Err(Error::Config(_))));
    }

    #[test]
    fn non_finite_loss_is_reported() {
        let mut m = Linear { w: Mat::zeros(1, 1) };
        let err = sgd_epoch(&mut m, &[(vec![1.0], 0.0), (vec![1.0], f64::NAN)], &TrainConfig::default(), 0);
        assert!(matches!(err, Err(Error::NonFiniteLoss { index: 1 })));
    }

    #[test]
    fn dropout_mask_is_inverted() {
        let mut d = Dropout::new(0.5, 1).unwrap();
        let m = d.mask(10_000);
        assert!(m.iter().all(|&v| v == 0.0 || v == 2.0));
        let mean = m.iter().sum::<f64>() / m.len() as f64;
        assert!((mean - 1.0).abs() < 0.05);
        assert!(Dropout::new(1.0, 0).is_err());
        assert_eq!(Dropout::new(0.0, 0).unwrap().mask(3), vec![1.0; 3]);
    }
}
