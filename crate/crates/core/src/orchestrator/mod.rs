//! Agent histories, model-input encoding and the selection strategies.

mod history;
mod strategy;

pub use history::{empty_histories, HistoryRecord, HistoryWindow, HISTORY_FEATURES};
pub use strategy::{
    NeuralStrategy, OracleStrategy, RandomStrategy, RoundRobinStrategy, SelectionDecision, StaticBestStrategy,
    Strategy, StrategyKind,
};

use crate::envsim::Task;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Width of the encoded model input.
pub fn input_width(d: usize, c: usize, n_agents: usize) -> usize {
    c + d + HISTORY_FEATURES * n_agents
}

/// `context ++ task ++ per-agent history summary`, agents in id order.
pub fn encode_input<T: Scalar>(task: &Task<T>, histories: &[HistoryWindow<T>], n_agents: usize) -> Result<Vec<T>> {
    if histories.len() != n_agents {
        return Err(Error::Shape(format!(
            "{} histories supplied for {n_agents} agents",
            histories.len()
        )));
    }
    let mut out = Vec::with_capacity(input_width(task.task_vector.len(), task.context_vector.len(), n_agents));
    out.extend_from_slice(&task.context_vector);
    out.extend_from_slice(&task.task_vector);
    for (i, h) in histories.iter().enumerate() {
        if h.agent_id != i {
            return Err(Error::Shape(format!("history at position {i} belongs to agent {}", h.agent_id)));
        }
        out.extend_from_slice(&h.summary());
    }
    Ok(out)
}
