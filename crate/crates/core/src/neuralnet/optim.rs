use serde::{Deserialize, Serialize};

use super::Parameters;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn check_step<T: Scalar>(params: &Parameters<T>, grads: &Parameters<T>, lr: f64) -> Result<()> {
    if !(lr.is_finite() && lr > 0.0) {
        return Err(Error::InvalidArgument(format!("learning rate must be positive, got {lr}")));
    }
    if !params.same_shape(grads) {
        return Err(Error::Shape("gradient shapes do not match parameters".into()));
    }
    if let Some((t, e)) = grads.first_non_finite() {
        let shape = &grads.shapes()[t];
        return Err(Error::NonFinite(format!(
            "gradient tensor {t} (shape {shape:?}) element {e}"
        )));
    }
    Ok(())
}

/// `params ← params − lr · grads`.
pub fn sgd_step<T: Scalar>(params: &mut Parameters<T>, grads: &Parameters<T>, lr: f64) -> Result<()> {
    check_step(params, grads, lr)?;
    params.add_scaled(grads, T::of(-lr))
}

/// Adam with bias correction.
#[derive(Clone, Debug)]
pub struct Adam<T: Scalar = f64> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    m: Parameters<T>,
    v: Parameters<T>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(params: &Parameters<T>, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }

    pub fn step(&mut self, params: &mut Parameters<T>, grads: &Parameters<T>) -> Result<()> {
        check_step(params, grads, self.lr)?;
        self.step += 1;
        let (b1, b2) = (T::of(self.beta1), T::of(self.beta2));
        let c1 = T::one() - b1.powi(self.step);
        let c2 = T::one() - b2.powi(self.step);
        let (lr, eps) = (T::of(self.lr), T::of(self.eps));
        let one = T::one();
        let iter = params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut());
        for (((p, g), m), v) in iter {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (one - b1) * g[i];
                v[i] = b2 * v[i] + (one - b2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] = p[i] - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// Optimizer state for one training run.
#[derive(Clone, Debug)]
pub enum Optimizer<T: Scalar = f64> {
    Sgd { lr: f64 },
    Adam(Adam<T>),
}

impl<T: Scalar> Optimizer<T> {
    pub fn new(kind: OptimizerKind, params: &Parameters<T>, lr: f64) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd { lr },
            OptimizerKind::Adam => Optimizer::Adam(Adam::new(params, lr)),
        }
    }

    pub fn step(&mut self, params: &mut Parameters<T>, grads: &Parameters<T>) -> Result<()> {
        match self {
            Optimizer::Sgd { lr } => sgd_step(params, grads, *lr),
            Optimizer::Adam(adam) => adam.step(params, grads),
        }
    }
}
