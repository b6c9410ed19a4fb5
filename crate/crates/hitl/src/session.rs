use std::collections::BTreeMap;
use std::path::PathBuf;

use orchestra::envsim::split;
use orchestra::orchestrator::{NeuralStrategy, Strategy};
use orchestra::training::write_feedback_log;
use orchestra::{ConfusionMatrix, FeedbackAction, FeedbackRecord, HistoryWindow, Network, Simulation, Task, TaskStream};
use serde::{Deserialize, Serialize};

use crate::error::HitlError;

/// Number of vector entries shown in a task summary.
pub const PREVIEW_LEN: usize = 4;
pub const DEFAULT_PENDING_CAP: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecisionState {
    Pending,
    Approved,
    Overridden,
    Expired,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSummary {
    pub id: u64,
    pub domain: orchestra::Domain,
    pub task_vector: Vec<f64>,
    pub context_vector: Vec<f64>,
    pub truncated: bool,
}

impl TaskSummary {
    fn of(task: &Task) -> Self {
        let head = |v: &[f64]| v.iter().take(PREVIEW_LEN).copied().collect::<Vec<_>>();
        Self {
            id: task.id,
            domain: task.domain,
            task_vector: head(&task.task_vector),
            context_vector: head(&task.context_vector),
            truncated: task.task_vector.len() > PREVIEW_LEN || task.context_vector.len() > PREVIEW_LEN,
        }
    }
}

/// Fuzzy evaluation of the agent that finally executed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExecutedOutcome {
    pub agent: usize,
    pub score: f64,
    pub completeness: f64,
    pub relevance: f64,
    pub confidence: f64,
    pub quality: f64,
    pub label: orchestra::QualityLabel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PendingDecision {
    pub decision_id: u64,
    pub task: TaskSummary,
    pub distribution: Vec<f64>,
    pub predicted_confidence: Option<f64>,
    pub model_choice: usize,
    /// Fuzzy quality every agent would achieve on this task.
    pub quality_preview: Vec<f64>,
    pub state: DecisionState,
    pub created_at_ms: u64,
    pub resolved_at_ms: Option<u64>,
    pub outcome: Option<ExecutedOutcome>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub checkpoint_id: String,
    pub n_agents: usize,
    pub agent_names: Vec<String>,
    pub pending: usize,
    pub approved: usize,
    pub overridden: usize,
    pub expired: usize,
    pub pending_cap: usize,
    /// Human/model agreement: trace over total of `confusion`, absent before any resolution.
    pub rolling_accuracy: Option<f64>,
    /// Rows are human choices, columns model choices.
    pub confusion: Vec<Vec<u64>>,
    pub next_task_id: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionRequest {
    pub action: FeedbackAction,
    #[serde(default)]
    pub agent: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct SessionConfig {
    pub task_seed: u64,
    pub pending_cap: usize,
    pub feedback_path: Option<PathBuf>,
    pub checkpoint_id: String,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            task_seed: 0,
            pending_cap: DEFAULT_PENDING_CAP,
            feedback_path: None,
            checkpoint_id: String::new(),
        }
    }
}

struct Entry {
    view: PendingDecision,
    task: Task,
    input: Vec<f64>,
}

/// Environment, histories, decision queue and feedback log of one serving session.
pub struct Session {
    sim: Simulation,
    strategy: NeuralStrategy<f64>,
    histories: Vec<HistoryWindow>,
    stream: TaskStream,
    entries: BTreeMap<u64, Entry>,
    feedback: Vec<FeedbackRecord>,
    confusion: ConfusionMatrix,
    next_id: u64,
    config: SessionConfig,
}

impl Session {
    pub fn new(sim: Simulation, model: Network, config: SessionConfig) -> Result<Self, HitlError> {
        if model.config().input_dim != sim.input_width() || model.config().n_agents != sim.n_agents() {
            return Err(HitlError::Invalid(format!(
                "checkpoint expects {} inputs and {} agents, environment provides {} and {}",
                model.config().input_dim,
                model.config().n_agents,
                sim.input_width(),
                sim.n_agents()
            )));
        }
        if config.pending_cap == 0 {
            return Err(HitlError::Invalid("pending cap must be at least 1".into()));
        }
        Ok(Self {
            histories: sim.empty_histories()?,
            confusion: ConfusionMatrix::new(sim.n_agents()),
            stream: TaskStream::new(config.task_seed, split::LIVE),
            strategy: NeuralStrategy::new(model),
            sim,
            entries: BTreeMap::new(),
            feedback: Vec::new(),
            next_id: 1,
            config,
        })
    }

    pub fn sim(&self) -> &Simulation {
        &self.sim
    }

    pub fn histories(&self) -> &[HistoryWindow] {
        &self.histories
    }

    pub fn has_feedback_path(&self) -> bool {
        self.config.feedback_path.is_some()
    }

    pub fn pending_count(&self) -> usize {
        self.entries.values().filter(|e| e.view.state == DecisionState::Pending).count()
    }

    pub fn step(&mut self, now_ms: u64) -> Result<PendingDecision, HitlError> {
        if self.pending_count() >= self.config.pending_cap {
            return Err(HitlError::QueueFull { cap: self.config.pending_cap });
        }
        let task: Task = self.stream.next_task(self.sim.env.config());
        let input = self.sim.encode(&task, &self.histories)?;
        let decision = self.strategy.select(&task, &self.histories)?;
        let quality_preview = self
            .sim
            .execute_all(&task)?
            .iter()
            .map(|e| e.scores.quality)
            .collect();
        let id = self.next_id;
        self.next_id += 1;
        let view = PendingDecision {
            decision_id: id,
            task: TaskSummary::of(&task),
            distribution: decision.distribution,
            predicted_confidence: decision.predicted_confidence,
            model_choice: decision.chosen_agent,
            quality_preview,
            state: DecisionState::Pending,
            created_at_ms: now_ms,
            resolved_at_ms: None,
            outcome: None,
        };
        self.entries.insert(id, Entry { view: view.clone(), task, input });
        Ok(view)
    }

    pub fn resolve(&mut self, id: u64, request: &DecisionRequest, now_ms: u64) -> Result<PendingDecision, HitlError> {
        let n_agents = self.sim.n_agents();
        let entry = self.entries.get(&id).ok_or(HitlError::NotFound(id))?;
        if entry.view.state != DecisionState::Pending {
            return Err(HitlError::Conflict(format!(
                "decision {id} is already {:?}",
                entry.view.state
            )));
        }
        let model_choice = entry.view.model_choice;
        let (human_choice, state) = match (request.action, request.agent) {
            (FeedbackAction::Approve, None) => (model_choice, DecisionState::Approved),
            (FeedbackAction::Approve, Some(a)) if a == model_choice => (model_choice, DecisionState::Approved),
            (FeedbackAction::Approve, Some(a)) => {
                return Err(HitlError::Invalid(format!(
                    "approve names agent {a} but the model chose {model_choice}"
                )))
            }
            (FeedbackAction::Override, None) => {
                return Err(HitlError::Invalid("override requires an agent index".into()))
            }
            (FeedbackAction::Override, Some(a)) if a >= n_agents => {
                return Err(HitlError::Invalid(format!("agent {a} out of range for {n_agents} agents")))
            }
            (FeedbackAction::Override, Some(a)) if a == model_choice => {
                return Err(HitlError::Invalid(format!(
                    "override must differ from the model's choice ({model_choice})"
                )))
            }
            (FeedbackAction::Override, Some(a)) => (a, DecisionState::Overridden),
        };
        self.finish(id, human_choice, state, now_ms)?;
        let entry = &self.entries[&id];
        self.feedback.push(FeedbackRecord {
            decision_id: id,
            task_id: entry.task.id,
            domain: entry.task.domain,
            model_choice,
            human_choice,
            action: request.action,
            timestamp_ms: now_ms,
            input: entry.input.clone(),
        });
        self.confusion.record(human_choice, model_choice);
        Ok(entry.view.clone())
    }

    /// Expires pending decisions created at or before `cutoff_ms`; the model's
    /// choice executes for each. Returns the expired ids.
    pub fn expire(&mut self, cutoff_ms: u64, now_ms: u64) -> Result<Vec<u64>, HitlError> {
        let stale: Vec<(u64, usize)> = self
            .entries
            .values()
            .filter(|e| e.view.state == DecisionState::Pending && e.view.created_at_ms <= cutoff_ms)
            .map(|e| (e.view.decision_id, e.view.model_choice))
            .collect();
        for &(id, choice) in &stale {
            self.finish(id, choice, DecisionState::Expired, now_ms)?;
        }
        Ok(stale.into_iter().map(|(id, _)| id).collect())
    }

    fn finish(&mut self, id: u64, agent: usize, state: DecisionState, now_ms: u64) -> Result<(), HitlError> {
        let entry = self.entries.get_mut(&id).ok_or(HitlError::NotFound(id))?;
        let exec = self.sim.execute(agent, &entry.task)?;
        self.histories[agent].push(&exec.scores);
        entry.view.state = state;
        entry.view.resolved_at_ms = Some(now_ms);
        entry.view.outcome = Some(ExecutedOutcome {
            agent,
            score: exec.outcome.score,
            completeness: exec.scores.completeness,
            relevance: exec.scores.relevance,
            confidence: exec.scores.confidence,
            quality: exec.scores.quality,
            label: exec.scores.label,
        });
        Ok(())
    }

    pub fn decision(&self, id: u64) -> Option<&PendingDecision> {
        self.entries.get(&id).map(|e| &e.view)
    }

    pub fn decisions(&self) -> Vec<PendingDecision> {
        self.entries.values().map(|e| e.view.clone()).collect()
    }

    pub fn feedback(&self) -> &[FeedbackRecord] {
        &self.feedback
    }

    pub fn state(&self) -> SessionState {
        let count = |s| self.entries.values().filter(|e| e.view.state == s).count();
        SessionState {
            checkpoint_id: self.config.checkpoint_id.clone(),
            n_agents: self.sim.n_agents(),
            agent_names: self.sim.agent_names(),
            pending: count(DecisionState::Pending),
            approved: count(DecisionState::Approved),
            overridden: count(DecisionState::Overridden),
            expired: count(DecisionState::Expired),
            pending_cap: self.config.pending_cap,
            rolling_accuracy: (self.confusion.total() > 0).then(|| self.confusion.accuracy()),
            confusion: self.confusion.counts().to_vec(),
            next_task_id: self.stream.next_id,
        }
    }

    /// Writes the whole feedback log; the in-memory log is kept either way.
    pub fn flush(&self) -> Result<FlushReport, HitlError> {
        let path = self
            .config
            .feedback_path
            .clone()
            .ok_or_else(|| HitlError::Conflict("no feedback path configured".into()))?;
        write_feedback_log(&path, &self.feedback).map_err(|e| HitlError::Io(format!("{}: {e}", path.display())))?;
        Ok(FlushReport {
            path: path.display().to_string(),
            records: self.feedback.len(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlushReport {
    pub path: String,
    pub records: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use orchestra::{EnvConfig, FuzzyEvaluator, ModelConfig};

    fn session(cap: usize) -> Session {
        let sim = Simulation::new(EnvConfig::default(), FuzzyEvaluator::default(), 10).unwrap();
        let model = ModelConfig {
            hidden_dims: vec![8],
            ..ModelConfig::default()
        }
        .build(&sim)
        .unwrap();
        let config = SessionConfig {
            pending_cap: cap,
            ..SessionConfig::default()
        };
        Session::new(sim, model, config).unwrap()
    }

    fn approve() -> DecisionRequest {
        DecisionRequest {
            action: FeedbackAction::Approve,
            agent: None,
        }
    }

    #[test]
    fn steps_get_increasing_ids_and_tasks() {
        let mut s = session(10);
        let a = s.step(0).unwrap();
        let b = s.step(0).unwrap();
        assert!(b.decision_id > a.decision_id);
        assert!(b.task.id > a.task.id);
        assert!((a.distribution.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(a.task.task_vector.len(), PREVIEW_LEN);
        assert!(a.task.truncated);
    }

    #[test]
    fn full_queue_rejects_without_side_effects() {
        let mut s = session(2);
        s.step(0).unwrap();
        s.step(0).unwrap();
        let before = s.state();
        assert!(matches!(s.step(0), Err(HitlError::QueueFull { cap: 2 })));
        assert_eq!(s.state(), before);
    }

    #[test]
    fn expiry_executes_the_model_choice_without_feedback() {
        let mut s = session(10);
        let d = s.step(5).unwrap();
        let late = s.step(50).unwrap();
        assert_eq!(s.expire(10, 60).unwrap(), vec![d.decision_id]);
        let expired = s.decision(d.decision_id).unwrap();
        assert_eq!(expired.state, DecisionState::Expired);
        assert_eq!(expired.outcome.as_ref().unwrap().agent, d.model_choice);
        assert!(s.feedback().is_empty());
        assert_eq!(s.histories()[d.model_choice].len(), 1);
        assert_eq!(s.decision(late.decision_id).unwrap().state, DecisionState::Pending);
        assert!(matches!(s.resolve(d.decision_id, &approve(), 70), Err(HitlError::Conflict(_))));
    }

    #[test]
    fn agreement_matches_confusion_trace() {
        let mut s = session(10);
        for i in 0..4 {
            let d = s.step(i).unwrap();
            let req = if i % 2 == 0 {
                approve()
            } else {
                DecisionRequest {
                    action: FeedbackAction::Override,
                    agent: Some((d.model_choice + 1) % 3),
                }
            };
            s.resolve(d.decision_id, &req, i).unwrap();
        }
        let st = s.state();
        assert_eq!((st.approved, st.overridden), (2, 2));
        assert_eq!(st.rolling_accuracy, Some(0.5));
    }

    #[test]
    fn flush_without_path_is_a_conflict() {
        assert!(matches!(session(1).flush(), Err(HitlError::Conflict(_))));
    }
}
