//! Finite-difference validation of tape gradients.

use super::Tensor;

/// Outcome of a [`grad_check`] run.
#[derive(Clone, Debug)]
pub struct GradCheck {
    /// Largest `|analytic − central difference|` over all checked elements.
    pub max_abs_diff: f64,
    /// `(param index, element index, analytic, numeric)` at the maximum.
    pub worst: Option<(usize, usize, f64, f64)>,
    /// Number of scalar parameters compared.
    pub checked: usize,
}

impl GradCheck {
    pub fn within(&self, tol: f64) -> bool {
        self.max_abs_diff <= tol
    }
}

/// Compares the gradient produced by `grad` against central finite
/// differences of `loss`, perturbing every element of every parameter by
/// `±eps`. Both closures see the same parameter slice and must be
/// deterministic functions of it (reseed any internal randomness on each
/// call).
pub fn grad_check(
    mut loss: impl FnMut(&[Tensor<f64>]) -> f64,
    mut grad: impl FnMut(&[Tensor<f64>]) -> Vec<Vec<f64>>,
    params: &[Tensor<f64>],
    eps: f64,
) -> GradCheck {
    let analytic = grad(params);
    assert_eq!(analytic.len(), params.len(), "grad returned wrong parameter count");
    let mut work: Vec<Tensor<f64>> = params.to_vec();
    let mut out = GradCheck { max_abs_diff: 0.0, worst: None, checked: 0 };
    for (pi, param) in params.iter().enumerate() {
        assert_eq!(analytic[pi].len(), param.len(), "grad {pi} has wrong length");
        for ei in 0..param.len() {
            let orig = param.data()[ei];
            work[pi].data_mut()[ei] = orig + eps;
            let up = loss(&work);
            work[pi].data_mut()[ei] = orig - eps;
            let down = loss(&work);
            work[pi].data_mut()[ei] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let diff = (analytic[pi][ei] - numeric).abs();
            if diff > out.max_abs_diff {
                out.max_abs_diff = diff;
                out.worst = Some((pi, ei, analytic[pi][ei], numeric));
            }
            out.checked += 1;
        }
    }
    out
}
