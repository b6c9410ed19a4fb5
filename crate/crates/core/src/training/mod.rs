//! Supervised feedback loop: oracle labelling, dual-head loss, batched
//! training, hyperparameter grid search and human-feedback injection.

mod feedback;
mod grid;
mod loss;
mod oracle;

pub use feedback::{
    inject_feedback, read_feedback_log, write_feedback_log, FeedbackAction, FeedbackRecord, InjectionReport,
};
pub use grid::{grid_results_csv, grid_search, GridPoint, GridResult, GridSettings, GridSpace};
pub use loss::{batch_loss, LabelMode, LossOutput, LossTarget, PROB_FLOOR};
pub use oracle::{oracle_label, tempered_softmax, OracleLabel};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::envsim::{split, Task, TaskStream};
use crate::error::{Error, Result};
use crate::neuralnet::{Mlp, Mode, NetworkConfig, Optimizer, OptimizerKind};
use crate::rng::{derive_key, Stream};
use crate::scalar::{argmax, Scalar};
use crate::simulation::Simulation;

/// Which agent's outcome feeds the history windows during training.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Executor {
    Oracle,
    Model,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub confidence_weight: f64,
    pub label_mode: LabelMode,
    pub soft_temperature: f64,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    pub executor: Executor,
    /// Full-batch steps taken by [`inject_feedback`].
    pub feedback_steps: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 500,
            batch_size: 64,
            learning_rate: 0.01,
            confidence_weight: 0.2,
            label_mode: LabelMode::Hard,
            soft_temperature: 0.1,
            seed: 7,
            optimizer: OptimizerKind::Adam,
            executor: Executor::Oracle,
            feedback_steps: 50,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if !(self.confidence_weight.is_finite() && self.confidence_weight >= 0.0) {
            return Err(Error::Config(format!(
                "confidence_weight must be >= 0, got {}",
                self.confidence_weight
            )));
        }
        if !(self.soft_temperature.is_finite() && self.soft_temperature > 0.0) {
            return Err(Error::Config(format!(
                "soft_temperature must be positive, got {}",
                self.soft_temperature
            )));
        }
        Ok(())
    }

    fn temperature(&self) -> Option<f64> {
        (self.label_mode == LabelMode::Soft).then_some(self.soft_temperature)
    }
}

/// Network architecture choices that the grid search varies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub hidden_dims: Vec<usize>,
    pub dropout: f64,
    pub confidence_head: bool,
    pub init_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden_dims: vec![128, 64],
            dropout: 0.0,
            confidence_head: true,
            init_seed: 11,
        }
    }
}

impl ModelConfig {
    pub fn network_config(&self, input_dim: usize, n_agents: usize) -> NetworkConfig {
        NetworkConfig {
            input_dim,
            hidden_dims: self.hidden_dims.clone(),
            n_agents,
            dropout_rate: self.dropout,
            confidence_head: self.confidence_head,
        }
    }

    pub fn build<T: Scalar>(&self, sim: &Simulation<T>) -> Result<Mlp<T>> {
        Mlp::init(self.network_config(sim.input_width(), sim.n_agents()), self.init_seed)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub iteration: usize,
    pub cross_entropy_loss: f64,
    pub confidence_loss: f64,
}

fn batch_matrix<T: Scalar>(rows: &[Vec<T>], width: usize) -> Result<Array2<T>> {
    let flat: Vec<T> = rows.iter().flatten().copied().collect();
    Array2::from_shape_vec((rows.len(), width), flat).map_err(|e| Error::Shape(e.to_string()))
}

fn divergence_dump<T: Scalar>(tasks: &[Task<T>], inputs: &Array2<T>) -> String {
    let ids: Vec<u64> = tasks.iter().map(|t| t.id).collect();
    let bad_rows: Vec<usize> = inputs
        .rows()
        .into_iter()
        .enumerate()
        .filter(|(_, r)| r.iter().any(|v| !v.is_finite()))
        .map(|(i, _)| i)
        .collect();
    format!("task ids {ids:?}; rows with non-finite inputs {bad_rows:?}")
}

/// Trains `model` on freshly generated, uniformly mixed tasks.
///
/// Each iteration samples a batch, labels it with the oracle, encodes inputs
/// from the current histories, takes one optimizer step, then executes each
/// task (oracle or model pick, per [`TrainConfig::executor`]) to advance the
/// histories.
pub fn train<T: Scalar>(sim: &Simulation<T>, model: Mlp<T>, config: &TrainConfig) -> Result<(Mlp<T>, Vec<TrainRecord>)> {
    config.validate()?;
    let mut model = model;
    if model.config().input_dim != sim.input_width() || model.config().n_agents != sim.n_agents() {
        return Err(Error::Shape(format!(
            "model expects {} inputs / {} agents, simulation provides {} / {}",
            model.config().input_dim,
            model.config().n_agents,
            sim.input_width(),
            sim.n_agents()
        )));
    }
    let mut records = Vec::with_capacity(config.iterations);
    if config.iterations == 0 {
        return Ok((model, records));
    }
    let env_config = sim.env.config().clone();
    let mut histories = sim.empty_histories()?;
    let mut stream = TaskStream::new(config.seed, split::TRAIN);
    let mut optimizer = Optimizer::new(config.optimizer, model.params(), config.learning_rate);
    let width = sim.input_width();

    for iteration in 0..config.iterations {
        let tasks: Vec<Task<T>> = stream.take_tasks(&env_config, config.batch_size);
        let labels = tasks
            .iter()
            .map(|t| oracle_label(t, sim, config.temperature()))
            .collect::<Result<Vec<_>>>()?;
        let rows = tasks
            .iter()
            .map(|t| sim.encode(t, &histories))
            .collect::<Result<Vec<_>>>()?;
        let inputs = batch_matrix(&rows, width)?;

        let dropout_seed = derive_key(config.seed, Stream::Iteration, &[iteration as u64]);
        let out = model.forward(inputs.view(), Mode::Train, dropout_seed)?;
        let targets: Vec<LossTarget<T>> = labels.iter().map(LossTarget::from).collect();
        let loss = batch_loss(
            out.selection_probs.view(),
            out.confidence.as_ref().map(|c| c.view()),
            &targets,
            config.confidence_weight,
            config.label_mode,
        )?;
        if !loss.total.is_finite() {
            return Err(Error::Diverged {
                iteration,
                detail: format!(
                    "ce {} conf {}; {}",
                    loss.cross_entropy,
                    loss.confidence,
                    divergence_dump(&tasks, &inputs)
                ),
            });
        }
        let grads = model.backward(
            &out.trace,
            loss.d_selection_logits.view(),
            loss.d_confidence_logits.as_ref().map(|g| g.view()),
        )?;
        optimizer.step(model.params_mut(), &grads).map_err(|e| Error::Diverged {
            iteration,
            detail: format!("{e}; {}", divergence_dump(&tasks, &inputs)),
        })?;

        for (i, label) in labels.iter().enumerate() {
            let executed = match config.executor {
                Executor::Oracle => label.best_agent,
                Executor::Model => argmax(&out.selection_probs.row(i).to_vec()).unwrap_or(label.best_agent),
            };
            histories[executed].push(&label.executions[executed].scores);
        }
        records.push(TrainRecord {
            iteration,
            cross_entropy_loss: loss.cross_entropy.as_f64(),
            confidence_loss: loss.confidence.as_f64(),
        });
    }
    Ok((model, records))
}

/// CSV with header `iteration,cross_entropy_loss,confidence_loss`.
pub fn records_to_csv(records: &[TrainRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["iteration", "cross_entropy_loss", "confidence_loss"])
        .map_err(|e| Error::Parse(e.to_string()))?;
    for r in records {
        w.write_record([
            r.iteration.to_string(),
            r.cross_entropy_loss.to_string(),
            r.confidence_loss.to_string(),
        ])
        .map_err(|e| Error::Parse(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
