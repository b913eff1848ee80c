//! Linear-chain CRF over `K` labels.
//!
//! Transitions are a `(K+2)×(K+2)` matrix whose extra rows/columns are the
//! virtual START (`K`) and STOP (`K+1`) states. A path `y` over emissions `e`
//! scores
//!
//! ```text
//! T[START, y0] + Σ_t e[t, y_t] + Σ_t T[y_{t-1}, y_t] + T[y_{L-1}, STOP]
//! ```
//!
//! The START column and STOP row are never read; they are unreachable and
//! behave as `-inf`, although they are stored as zeros so the matrix stays
//! finite. All recursions run in log space.

use serde::{Deserialize, Serialize};

use super::log_sum_exp;
use super::mat::Mat;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrfParams {
    k: usize,
    pub transitions: Mat,
}

/// Forward and backward log-messages for one emission matrix.
struct Messages {
    alpha: Mat,
    beta: Mat,
    log_z: f64,
}

impl CrfParams {
    pub fn new(k: usize) -> Self {
        CrfParams {
            k,
            transitions: Mat::zeros(k + 2, k + 2),
        }
    }

    pub fn num_labels(&self) -> usize {
        self.k
    }

    pub fn start(&self) -> usize {
        self.k
    }

    pub fn stop(&self) -> usize {
        self.k + 1
    }

    fn t(&self, from: usize, to: usize) -> f64 {
        self.transitions.get(from, to)
    }

    fn check(&self, em: &Mat) -> Result<()> {
        if em.rows() == 0 {
            return Err(Error::Empty("CRF emission sequence"));
        }
        if em.cols() != self.k {
            return Err(Error::Shape(format!(
                "emissions have {} labels, CRF has {}",
                em.cols(),
                self.k
            )));
        }
        Ok(())
    }

    pub fn path_score(&self, em: &Mat, path: &[usize]) -> f64 {
        let mut score = self.t(self.start(), path[0]);
        for (t, &y) in path.iter().enumerate() {
            score += em.get(t, y);
            if t > 0 {
                score += self.t(path[t - 1], y);
            }
        }
        score + self.t(*path.last().unwrap(), self.stop())
    }

    fn messages(&self, em: &Mat) -> Messages {
        let (len, k) = (em.rows(), self.k);
        let mut alpha = Mat::zeros(len, k);
        for j in 0..k {
            alpha.set(0, j, self.t(self.start(), j) + em.get(0, j));
        }
        for t in 1..len {
            for j in 0..k {
                let prev = alpha.row(t - 1);
                let v = log_sum_exp((0..k).map(|i| prev[i] + self.t(i, j)));
                alpha.set(t, j, v + em.get(t, j));
            }
        }
        let mut beta = Mat::zeros(len, k);
        for i in 0..k {
            beta.set(len - 1, i, self.t(i, self.stop()));
        }
        for t in (0..len - 1).rev() {
            for i in 0..k {
                let v = log_sum_exp(
                    (0..k).map(|j| self.t(i, j) + em.get(t + 1, j) + beta.get(t + 1, j)),
                );
                beta.set(t, i, v);
            }
        }
        let last = alpha.row(len - 1);
        let log_z = log_sum_exp((0..k).map(|j| last[j] + self.t(j, self.stop())));
        Messages { alpha, beta, log_z }
    }

    /// `log Σ_paths exp(score)`.
    pub fn log_partition(&self, em: &Mat) -> Result<f64> {
        self.check(em)?;
        Ok(self.messages(em).log_z)
    }

    /// Highest-scoring path. Among equal scores the lowest label wins, first
    /// at the last position and then at each back-pointer.
    pub fn viterbi(&self, em: &Mat) -> Result<Vec<usize>> {
        self.check(em)?;
        let (len, k) = (em.rows(), self.k);
        let mut delta = vec![0.0; k];
        for (j, d) in delta.iter_mut().enumerate() {
            *d = self.t(self.start(), j) + em.get(0, j);
        }
        let mut back = vec![vec![0usize; k]; len];
        for t in 1..len {
            let mut next = vec![0.0; k];
            for j in 0..k {
                let mut best = (f64::NEG_INFINITY, 0);
                for (i, &d) in delta.iter().enumerate() {
                    let s = d + self.t(i, j);
                    if s > best.0 {
                        best = (s, i);
                    }
                }
                next[j] = best.0 + em.get(t, j);
                back[t][j] = best.1;
            }
            delta = next;
        }
        let mut best = (f64::NEG_INFINITY, 0);
        for (j, &d) in delta.iter().enumerate() {
            let s = d + self.t(j, self.stop());
            if s > best.0 {
                best = (s, j);
            }
        }
        let mut path = vec![best.1; len];
        for t in (1..len).rev() {
            path[t - 1] = back[t][path[t]];
        }
        Ok(path)
    }

    /// Per-position label posteriors from forward–backward.
    pub fn marginals(&self, em: &Mat) -> Result<Mat> {
        self.check(em)?;
        let msg = self.messages(em);
        let mut out = Mat::zeros(em.rows(), self.k);
        for t in 0..em.rows() {
            for j in 0..self.k {
                out.set(
                    t,
                    j,
                    (msg.alpha.get(t, j) + msg.beta.get(t, j) - msg.log_z).exp(),
                );
            }
        }
        Ok(out)
    }

    /// Negative log-likelihood of `gold`, its gradient w.r.t. the emissions,
    /// and its gradient w.r.t. the transitions (accumulated into `d_trans`).
    pub fn nll_and_grad(&self, em: &Mat, gold: &[usize], d_trans: &mut Mat) -> Result<(f64, Mat)> {
        self.check(em)?;
        if gold.len() != em.rows() {
            return Err(Error::Shape(format!(
                "{} gold labels for {} positions",
                gold.len(),
                em.rows()
            )));
        }
        let (len, k) = (em.rows(), self.k);
        let msg = self.messages(em);
        let nll = msg.log_z - self.path_score(em, gold);

        let mut d_em = Mat::zeros(len, k);
        for t in 0..len {
            for j in 0..k {
                let p = (msg.alpha.get(t, j) + msg.beta.get(t, j) - msg.log_z).exp();
                d_em.set(t, j, p);
            }
            let g = d_em.get(t, gold[t]);
            d_em.set(t, gold[t], g - 1.0);
        }

        let (start, stop) = (self.start(), self.stop());
        for j in 0..k {
            let p0 = d_em.get(0, j) + if gold[0] == j { 1.0 } else { 0.0 };
            let pl = d_em.get(len - 1, j) + if gold[len - 1] == j { 1.0 } else { 0.0 };
            d_trans.set(start, j, d_trans.get(start, j) + p0);
            d_trans.set(j, stop, d_trans.get(j, stop) + pl);
        }
        d_trans.set(start, gold[0], d_trans.get(start, gold[0]) - 1.0);
        d_trans.set(gold[len - 1], stop, d_trans.get(gold[len - 1], stop) - 1.0);
        for t in 1..len {
            for i in 0..k {
                let a = msg.alpha.get(t - 1, i);
                for j in 0..k {
                    let p = (a + self.t(i, j) + em.get(t, j) + msg.beta.get(t, j) - msg.log_z)
                        .exp();
                    d_trans.set(i, j, d_trans.get(i, j) + p);
                }
            }
            let (a, b) = (gold[t - 1], gold[t]);
            d_trans.set(a, b, d_trans.get(a, b) - 1.0);
        }
        Ok((nll, d_em))
    }
}
