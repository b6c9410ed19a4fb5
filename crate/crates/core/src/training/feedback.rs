use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{batch_loss, LabelMode, LossTarget, TrainConfig};
use crate::envsim::Domain;
use crate::error::{Error, Result};
use crate::neuralnet::{Mlp, Mode, Optimizer};
use crate::rng::{derive_key, Stream};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeedbackAction {
    Approve,
    Override,
}

/// One resolved human decision. Serialized as a single JSON line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRecord {
    pub decision_id: u64,
    pub task_id: u64,
    pub domain: Domain,
    pub model_choice: usize,
    pub human_choice: usize,
    pub action: FeedbackAction,
    pub timestamp_ms: u64,
    /// Encoded model input at decision time.
    pub input: Vec<f64>,
}

impl FeedbackRecord {
    pub fn validate(&self, n_agents: usize, input_dim: usize) -> Result<()> {
        if self.human_choice >= n_agents {
            return Err(Error::InvalidArgument(format!(
                "human_choice {} out of range for {n_agents} agents",
                self.human_choice
            )));
        }
        match self.action {
            FeedbackAction::Approve if self.human_choice != self.model_choice => {
                return Err(Error::InvalidArgument("approve requires human_choice == model_choice".into()));
            }
            FeedbackAction::Override if self.human_choice == self.model_choice => {
                return Err(Error::InvalidArgument("override requires human_choice != model_choice".into()));
            }
            _ => {}
        }
        if self.input.len() != input_dim {
            return Err(Error::Shape(format!(
                "input has {} values, model expects {input_dim}",
                self.input.len()
            )));
        }
        if self.input.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("input of decision {}", self.decision_id)));
        }
        Ok(())
    }
}

pub fn write_feedback_log(path: &Path, records: &[FeedbackRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| Error::Parse(e.to_string()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a JSON-lines log; blank lines are skipped, parse errors carry the line number.
pub fn read_feedback_log(path: &Path) -> Result<Vec<FeedbackRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line)
            .map_err(|e| Error::Parse(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(record);
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct InjectionReport {
    pub applied: usize,
    /// `(index in the log, reason)` per skipped record.
    pub rejected: Vec<(usize, String)>,
}

/// Fine-tunes `model` on human choices as hard labels.
///
/// Runs `config.feedback_steps` full-batch steps with the configured optimizer
/// and learning rate; the confidence term is disabled.
pub fn inject_feedback<T: Scalar>(
    records: &[FeedbackRecord],
    model: Mlp<T>,
    config: &TrainConfig,
) -> Result<(Mlp<T>, InjectionReport)> {
    config.validate()?;
    let mut model = model;
    let (n_agents, input_dim) = (model.config().n_agents, model.config().input_dim);
    let mut report = InjectionReport::default();
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    for (i, r) in records.iter().enumerate() {
        if let Err(e) = r.validate(n_agents, input_dim) {
            report.rejected.push((i, e.to_string()));
            continue;
        }
        rows.extend(r.input.iter().map(|&v| T::of(v)));
        let mut one_hot = vec![T::zero(); n_agents];
        one_hot[r.human_choice] = T::one();
        targets.push(LossTarget {
            best_agent: r.human_choice,
            soft_targets: one_hot,
            confidence: None,
        });
    }
    report.applied = targets.len();
    if targets.is_empty() || config.feedback_steps == 0 {
        return Ok((model, report));
    }
    let inputs = Array2::from_shape_vec((targets.len(), input_dim), rows).map_err(|e| Error::Shape(e.to_string()))?;
    let mut optimizer = Optimizer::new(config.optimizer, model.params(), config.learning_rate);
    for step in 0..config.feedback_steps {
        let seed = derive_key(config.seed, Stream::Iteration, &[u64::MAX, step as u64]);
        let out = model.forward(inputs.view(), Mode::Train, seed)?;
        let loss = batch_loss(out.selection_probs.view(), None, &targets, 0.0, LabelMode::Hard)?;
        if !loss.total.is_finite() {
            return Err(Error::Diverged {
                iteration: step,
                detail: "feedback batch loss is not finite".into(),
            });
        }
        let grads = model.backward(&out.trace, loss.d_selection_logits.view(), None)?;
        optimizer.step(model.params_mut(), &grads)?;
    }
    Ok((model, report))
}
