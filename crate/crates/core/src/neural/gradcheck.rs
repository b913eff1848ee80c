//! Central-difference gradient checking for any [`Differentiable`] model.

use super::train::{Differentiable, ParamSet};
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub checked: usize,
    pub max_rel_error: f64,
    /// Flat parameter index of the worst coordinate.
    pub worst_index: usize,
}

impl GradCheck {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error <= tol
    }
}

/// Relative error `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

fn nudge<P: ParamSet>(p: &mut P, flat: usize, delta: f64) {
    let mut offset = flat;
    for t in p.tensors_mut() {
        if offset < t.len() {
            t[offset] += delta;
            return;
        }
        offset -= t.len();
    }
    panic!("parameter index {flat} out of range");
}

/// Compares the analytic gradient against central differences at the flat
/// parameter indices `indices` (all of them when `None`). The model is
/// restored before returning.
pub fn grad_check<M: Differentiable>(
    model: &mut M,
    example: &M::Example,
    eps: f64,
    indices: Option<&[usize]>,
) -> Result<GradCheck> {
    let (_, grad) = model.loss_and_grad(example, None)?;
    let flat: Vec<f64> = grad.tensors().iter().flat_map(|t| t.iter().copied()).collect();
    let all: Vec<usize>;
    let idx = match indices {
        Some(i) => i,
        None => {
            all = (0..flat.len()).collect();
            &all
        }
    };
    let mut out = GradCheck { checked: 0, max_rel_error: 0.0, worst_index: 0 };
    for &i in idx {
        nudge(model.params_mut(), i, eps);
        let up = model.loss(example);
        nudge(model.params_mut(), i, -2.0 * eps);
        let down = model.loss(example);
        nudge(model.params_mut(), i, eps);
        let numeric = (up? - down?) / (2.0 * eps);
        let err = relative_error(flat[i], numeric);
        if err > out.max_rel_error {
            out.max_rel_error = err;
            out.worst_index = i;
        }
        out.checked += 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{Dropout, Mat};

    struct Cubic(Mat);

    impl Differentiable for Cubic {
        type Example = ();
        type Params = Mat;
        fn params(&self) -> &Mat {
            &self.0
        }
        fn params_mut(&mut self) -> &mut Mat {
            &mut self.0
        }
        fn loss(&self, _: &()) -> Result<f64> {
            Ok(self.0.data().iter().map(|w| w * w * w).sum())
        }
        fn loss_and_grad(&self, _: &(), _: Option<&mut Dropout>) -> Result<(f64, Mat)> {
            let g = Mat::from_vec(1, 3, self.0.data().iter().map(|w| 3.0 * w * w).collect())?;
            Ok((self.loss(&())?, g))
        }
    }

    #[test]
    fn exact_gradient_passes_and_model_is_restored() {
        let w = Mat::from_vec(1, 3, vec![0.3, -1.2, 2.0]).unwrap();
        let mut m = Cubic(w.clone());
        let r = grad_check(&mut m, &(), 1e-5, None).unwrap();
        assert_eq!(r.checked, 3);
        assert!(r.passes(1e-6));
        for (a, b) in m.0.data().iter().zip(w.data()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(1.0, 1.1) - 0.1 / 1.1).abs() < 1e-15);
    }
}
