use serde::{Deserialize, Serialize};

use crate::envsim::{EnvConfig, Environment, RawOutcome, Task};
use crate::error::Result;
use crate::fuzzy::{FuzzyEvaluator, FuzzyScores};
use crate::orchestrator::{empty_histories, encode_input, input_width, HistoryWindow};
use crate::scalar::Scalar;

/// An outcome together with its fuzzy evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Execution<T: Scalar = f64> {
    pub outcome: RawOutcome<T>,
    pub scores: FuzzyScores<T>,
}

/// Environment, fuzzy evaluator and history window length: everything needed
/// to execute agents and build model inputs.
#[derive(Clone, Debug)]
pub struct Simulation<T: Scalar = f64> {
    pub env: Environment<T>,
    pub evaluator: FuzzyEvaluator,
    pub window: usize,
}

impl<T: Scalar> Simulation<T> {
    pub fn new(config: EnvConfig, evaluator: FuzzyEvaluator, window: usize) -> Result<Self> {
        evaluator.weights.validate()?;
        evaluator.thresholds.validate()?;
        let env = Environment::new(config)?;
        Ok(Self { env, evaluator, window })
    }

    pub fn with_evaluator(&self, evaluator: FuzzyEvaluator) -> Self {
        Self {
            env: self.env.clone(),
            evaluator,
            window: self.window,
        }
    }

    pub fn n_agents(&self) -> usize {
        self.env.n_agents()
    }

    pub fn input_width(&self) -> usize {
        let c = self.env.config();
        input_width(c.d, c.c, c.n_agents)
    }

    pub fn execute(&self, agent_id: usize, task: &Task<T>) -> Result<Execution<T>> {
        let outcome = self.env.raw_score(agent_id, task)?;
        let scores = self.evaluator.evaluate(&outcome, self.env.agent(agent_id)?)?;
        Ok(Execution { outcome, scores })
    }

    pub fn execute_all(&self, task: &Task<T>) -> Result<Vec<Execution<T>>> {
        (0..self.n_agents()).map(|a| self.execute(a, task)).collect()
    }

    pub fn empty_histories(&self) -> Result<Vec<HistoryWindow<T>>> {
        empty_histories(self.n_agents(), self.window)
    }

    pub fn encode(&self, task: &Task<T>, histories: &[HistoryWindow<T>]) -> Result<Vec<T>> {
        encode_input(task, histories, self.n_agents())
    }

    pub fn agent_names(&self) -> Vec<String> {
        self.env.agents().iter().map(|a| a.name.clone()).collect()
    }
}
