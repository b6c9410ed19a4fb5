use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::HistoryWindow;
use crate::envsim::Task;
use crate::error::{Error, Result};
use crate::neuralnet::Mlp;
use crate::rng::{keyed_rng, Stream};
use crate::scalar::{argmax, Scalar};
use crate::simulation::Simulation;
use crate::training::oracle_label;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyKind {
    Neural,
    Random,
    RoundRobin,
    StaticBest,
    /// Reference strategy that always picks the oracle label.
    Oracle,
}

impl StrategyKind {
    pub const BASELINES: [StrategyKind; 4] = [
        StrategyKind::Neural,
        StrategyKind::Random,
        StrategyKind::RoundRobin,
        StrategyKind::StaticBest,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::Neural => "neural",
            StrategyKind::Random => "random",
            StrategyKind::RoundRobin => "round-robin",
            StrategyKind::StaticBest => "static-best",
            StrategyKind::Oracle => "oracle",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "neural" => Ok(StrategyKind::Neural),
            "random" => Ok(StrategyKind::Random),
            "round-robin" => Ok(StrategyKind::RoundRobin),
            "static-best" => Ok(StrategyKind::StaticBest),
            "oracle" => Ok(StrategyKind::Oracle),
            other => Err(Error::Parse(format!(
                "unknown strategy `{other}` (expected neural, random, round-robin, static-best or oracle)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SelectionDecision<T: Scalar = f64> {
    pub task_id: u64,
    pub chosen_agent: usize,
    /// Model distribution for the neural strategy, uniform otherwise.
    pub distribution: Vec<T>,
    pub predicted_confidence: Option<T>,
    pub strategy: StrategyKind,
}

fn uniform<T: Scalar>(n: usize) -> Vec<T> {
    vec![T::one() / T::of(n as f64); n]
}

/// Common interface of all agent-selection policies.
pub trait Strategy<T: Scalar>: Send {
    fn kind(&self) -> StrategyKind;

    fn name(&self) -> String {
        self.kind().to_string()
    }

    fn select(&mut self, task: &Task<T>, histories: &[HistoryWindow<T>]) -> Result<SelectionDecision<T>>;
}

pub struct NeuralStrategy<T: Scalar = f64> {
    model: Mlp<T>,
    n_agents: usize,
}

impl<T: Scalar> NeuralStrategy<T> {
    pub fn new(model: Mlp<T>) -> Self {
        let n_agents = model.config().n_agents;
        Self { model, n_agents }
    }

    pub fn model(&self) -> &Mlp<T> {
        &self.model
    }
}

impl<T: Scalar> Strategy<T> for NeuralStrategy<T> {
    fn kind(&self) -> StrategyKind {
        StrategyKind::Neural
    }

    fn select(&mut self, task: &Task<T>, histories: &[HistoryWindow<T>]) -> Result<SelectionDecision<T>> {
        let input = super::encode_input(task, histories, self.n_agents)?;
        let (distribution, predicted_confidence) = self.model.predict(&input)?;
        let chosen_agent = argmax(&distribution).ok_or_else(|| Error::NonFinite("selection distribution".into()))?;
        Ok(SelectionDecision {
            task_id: task.id,
            chosen_agent,
            distribution,
            predicted_confidence,
            strategy: StrategyKind::Neural,
        })
    }
}

pub struct RandomStrategy {
    n_agents: usize,
    rng: ChaCha8Rng,
}

impl RandomStrategy {
    pub fn new(n_agents: usize, seed: u64) -> Self {
        Self {
            n_agents,
            rng: keyed_rng(seed, Stream::RandomStrategy, &[]),
        }
    }
}

impl<T: Scalar> Strategy<T> for RandomStrategy {
    fn kind(&self) -> StrategyKind {
        StrategyKind::Random
    }

    fn select(&mut self, task: &Task<T>, _histories: &[HistoryWindow<T>]) -> Result<SelectionDecision<T>> {
        Ok(SelectionDecision {
            task_id: task.id,
            chosen_agent: self.rng.random_range(0..self.n_agents),
            distribution: uniform(self.n_agents),
            predicted_confidence: None,
            strategy: StrategyKind::Random,
        })
    }
}

pub struct RoundRobinStrategy {
    n_agents: usize,
    counter: u64,
}

impl RoundRobinStrategy {
    pub fn new(n_agents: usize) -> Self {
        Self { n_agents, counter: 0 }
    }
}

impl<T: Scalar> Strategy<T> for RoundRobinStrategy {
    fn kind(&self) -> StrategyKind {
        StrategyKind::RoundRobin
    }

    fn select(&mut self, task: &Task<T>, _histories: &[HistoryWindow<T>]) -> Result<SelectionDecision<T>> {
        let chosen_agent = (self.counter % self.n_agents as u64) as usize;
        self.counter += 1;
        Ok(SelectionDecision {
            task_id: task.id,
            chosen_agent,
            distribution: uniform(self.n_agents),
            predicted_confidence: None,
            strategy: StrategyKind::RoundRobin,
        })
    }
}

/// Always the agent with the best mean quality on the calibration sample.
pub struct StaticBestStrategy {
    n_agents: usize,
    best: Option<usize>,
}

impl StaticBestStrategy {
    pub fn uncalibrated(n_agents: usize) -> Self {
        Self { n_agents, best: None }
    }

    pub fn calibrated(n_agents: usize, best: usize) -> Result<Self> {
        let mut s = Self::uncalibrated(n_agents);
        s.calibrate(best)?;
        Ok(s)
    }

    pub fn calibrate(&mut self, best: usize) -> Result<()> {
        if best >= self.n_agents {
            return Err(Error::InvalidArgument(format!("agent {best} out of range")));
        }
        self.best = Some(best);
        Ok(())
    }

    pub fn best(&self) -> Option<usize> {
        self.best
    }
}

impl<T: Scalar> Strategy<T> for StaticBestStrategy {
    fn kind(&self) -> StrategyKind {
        StrategyKind::StaticBest
    }

    fn select(&mut self, task: &Task<T>, _histories: &[HistoryWindow<T>]) -> Result<SelectionDecision<T>> {
        let chosen_agent = self
            .best
            .ok_or_else(|| Error::NotReady("static-best strategy used before warmup calibration".into()))?;
        Ok(SelectionDecision {
            task_id: task.id,
            chosen_agent,
            distribution: uniform(self.n_agents),
            predicted_confidence: None,
            strategy: StrategyKind::StaticBest,
        })
    }
}

/// Picks the oracle label; accuracy 1 by construction.
pub struct OracleStrategy<T: Scalar = f64> {
    sim: Simulation<T>,
}

impl<T: Scalar> OracleStrategy<T> {
    pub fn new(sim: Simulation<T>) -> Self {
        Self { sim }
    }
}

impl<T: Scalar> Strategy<T> for OracleStrategy<T> {
    fn kind(&self) -> StrategyKind {
        StrategyKind::Oracle
    }

    fn select(&mut self, task: &Task<T>, _histories: &[HistoryWindow<T>]) -> Result<SelectionDecision<T>> {
        let label = oracle_label(task, &self.sim, None)?;
        let mut distribution = vec![T::zero(); self.sim.n_agents()];
        distribution[label.best_agent] = T::one();
        Ok(SelectionDecision {
            task_id: task.id,
            chosen_agent: label.best_agent,
            distribution,
            predicted_confidence: None,
            strategy: StrategyKind::Oracle,
        })
    }
}
