//! First-order optimizers over the flat parameter list of a model.

use serde::{Deserialize, Serialize};

use crate::nn::{Gradients, Param, ParamValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptimizerKind {
    #[serde(rename = "ADAM", alias = "adam", alias = "Adam")]
    Adam,
    #[serde(rename = "SGD_MOMENTUM", alias = "sgd_momentum", alias = "SgdMomentum")]
    SgdMomentum,
}

struct AdamState {
    m: Vec<ParamValue>,
    v: Vec<ParamValue>,
    t: u64,
}

enum State {
    Adam(AdamState),
    Momentum { velocity: Vec<ParamValue> },
}

/// Adam (β₁ = 0.9, β₂ = 0.999, ε = 1e-8, bias-corrected) or SGD with
/// momentum 0.9. With `learning_rate == 0` parameters are bitwise unchanged.
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    state: State,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;
const SGD_MOMENTUM: f64 = 0.9;

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64, params: &[Param]) -> Self {
        let zeros = || params.iter().map(|p| p.value.zeros_like()).collect::<Vec<_>>();
        let state = match kind {
            OptimizerKind::Adam => State::Adam(AdamState { m: zeros(), v: zeros(), t: 0 }),
            OptimizerKind::SgdMomentum => State::Momentum { velocity: zeros() },
        };
        Optimizer { kind, learning_rate, state }
    }

    /// Applies one update in place. `grads` must be index-aligned with
    /// `params` (as produced by `Model::backward`).
    pub fn step(&mut self, params: &mut [Param], grads: &Gradients) {
        assert_eq!(params.len(), grads.0.len(), "gradient/parameter list mismatch");
        let lr = self.learning_rate;
        match &mut self.state {
            State::Adam(adam) => {
                adam.t += 1;
                let bc1 = 1.0 - ADAM_BETA1.powi(adam.t as i32);
                let bc2 = 1.0 - ADAM_BETA2.powi(adam.t as i32);
                for i in 0..params.len() {
                    let p = params[i].value.as_slice_mut();
                    let g = grads.0[i].as_slice();
                    let m = adam.m[i].as_slice_mut();
                    let v = adam.v[i].as_slice_mut();
                    for j in 0..p.len() {
                        m[j] = ADAM_BETA1 * m[j] + (1.0 - ADAM_BETA1) * g[j];
                        v[j] = ADAM_BETA2 * v[j] + (1.0 - ADAM_BETA2) * g[j] * g[j];
                        let m_hat = m[j] / bc1;
                        let v_hat = v[j] / bc2;
                        p[j] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
                    }
                }
            }
            State::Momentum { velocity } => {
                for i in 0..params.len() {
                    let p = params[i].value.as_slice_mut();
                    let g = grads.0[i].as_slice();
                    let vel = velocity[i].as_slice_mut();
                    for j in 0..p.len() {
                        vel[j] = SGD_MOMENTUM * vel[j] + g[j];
                        p[j] -= lr * vel[j];
                    }
                }
            }
        }
    }
}
