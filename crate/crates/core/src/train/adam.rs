//! Adam with bias correction.

use super::{TrainConfig, TrainError};
use crate::tensor::{Real, TensorError};

/// First/second moment estimates, one pair of arrays per parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<F> {
    m: Vec<Vec<F>>,
    v: Vec<Vec<F>>,
    t: u64,
}

impl<F: Real> AdamState<F> {
    pub fn new(lens: Vec<usize>) -> AdamState<F> {
        AdamState {
            m: lens.iter().map(|&n| vec![F::zero(); n]).collect(),
            v: lens.iter().map(|&n| vec![F::zero(); n]).collect(),
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn first_moments(&self) -> &[Vec<F>] {
        &self.m
    }

    pub fn second_moments(&self) -> &[Vec<F>] {
        &self.v
    }
}

/// One update: `m ← β₁m + (1−β₁)g`, `v ← β₂v + (1−β₂)g²`, bias-corrected,
/// then `θ ← θ − lr·m̂/(√v̂ + ε)`. The step counter increments first, so the
/// corrections at `t = 1` divide by `1 − β` exactly once.
pub fn adam_step<F: Real>(
    state: &mut AdamState<F>,
    params: &mut [&mut [F]],
    grads: &[Vec<F>],
    lr: f64,
    config: &TrainConfig,
) -> Result<(), TrainError> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(TensorError::ShapeMismatch {
            op: "adam_step",
            left: vec![params.len(), state.m.len()],
            right: vec![grads.len()],
        }
        .into());
    }
    for (i, p) in params.iter().enumerate() {
        if p.len() != grads[i].len() || p.len() != state.m[i].len() {
            return Err(TensorError::ShapeMismatch {
                op: "adam_step",
                left: vec![i, p.len()],
                right: vec![i, grads[i].len()],
            }
            .into());
        }
    }

    state.t += 1;
    let b1 = F::from_f64(config.beta1);
    let b2 = F::from_f64(config.beta2);
    let one = F::one();
    let corr1 = F::from_f64(1.0 - config.beta1.powi(state.t as i32));
    let corr2 = F::from_f64(1.0 - config.beta2.powi(state.t as i32));
    let lr = F::from_f64(lr);
    let eps = F::from_f64(config.epsilon);

    for ((p, g), (m, v)) in
        params.iter_mut().zip(grads).zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        for j in 0..p.len() {
            let gj = g[j];
            m[j] = b1 * m[j] + (one - b1) * gj;
            v[j] = b2 * v[j] + (one - b2) * gj * gj;
            let m_hat = m[j] / corr1;
            let v_hat = v[j] / corr2;
            p[j] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
