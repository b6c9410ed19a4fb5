use serde::{Deserialize, Serialize};

use crate::envsim::Task;
use crate::error::{Error, Result};
use crate::scalar::{argmax, Scalar};
use crate::simulation::{Execution, Simulation};

/// Supervision target for one task: the agent with the highest fuzzy quality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct OracleLabel<T: Scalar = f64> {
    pub task_id: u64,
    pub best_agent: usize,
    pub qualities: Vec<T>,
    /// `softmax(qualities / τ)` when a temperature is given, one-hot on `best_agent` otherwise.
    pub soft_targets: Vec<T>,
    pub executions: Vec<Execution<T>>,
}

impl<T: Scalar> OracleLabel<T> {
    /// Fuzzy confidence of the oracle agent on this task.
    pub fn observed_confidence(&self) -> T {
        self.executions[self.best_agent].scores.confidence
    }
}

/// Softmax of `values / temperature` with max subtraction.
pub fn tempered_softmax<T: Scalar>(values: &[T], temperature: f64) -> Vec<T> {
    let tau = T::of(temperature);
    let max = values.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    let exps: Vec<T> = values.iter().map(|&v| ((v - max) / tau).exp()).collect();
    let sum: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn oracle_label<T: Scalar>(task: &Task<T>, sim: &Simulation<T>, soft_temperature: Option<f64>) -> Result<OracleLabel<T>> {
    let executions = sim.execute_all(task)?;
    let qualities: Vec<T> = executions.iter().map(|e| e.scores.quality).collect();
    let best_agent = argmax(&qualities).ok_or_else(|| Error::NonFinite("agent qualities".into()))?;
    let soft_targets = match soft_temperature {
        Some(tau) => {
            if !(tau.is_finite() && tau > 0.0) {
                return Err(Error::InvalidArgument(format!("soft temperature must be positive, got {tau}")));
            }
            tempered_softmax(&qualities, tau)
        }
        None => {
            let mut one_hot = vec![T::zero(); qualities.len()];
            one_hot[best_agent] = T::one();
            one_hot
        }
    };
    Ok(OracleLabel {
        task_id: task.id,
        best_agent,
        qualities,
        soft_targets,
        executions,
    })
}
