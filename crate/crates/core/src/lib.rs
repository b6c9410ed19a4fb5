//! Neural orchestration of simulated agents: a task/agent environment, fuzzy
//! quality scoring, a hand-written MLP selector, training, evaluation.

pub mod envsim;
pub mod error;
pub mod evalreport;
pub mod fuzzy;
pub mod neuralnet;
pub mod orchestrator;
pub mod rng;
pub mod scalar;
pub mod simulation;
pub mod training;

pub use envsim::{split, AgentSpec, Domain, EnvConfig, RawOutcome, TaskStream};
pub use error::{Error, Result};
pub use evalreport::{compare, evaluate, warmup, Comparison, ConfusionMatrix, EvaluationReport, TaskRecord};
pub use fuzzy::{FuzzyEvaluator, FuzzyScores, FuzzyWeights, LabelThresholds, QualityLabel};
pub use neuralnet::{Mode, NetworkConfig, OptimizerKind};
pub use orchestrator::{SelectionDecision, Strategy, StrategyKind};
pub use scalar::Scalar;
pub use training::{train, FeedbackAction, FeedbackRecord, ModelConfig, TrainConfig, TrainRecord};

pub type Task = envsim::Task<f64>;
pub type Environment = envsim::Environment<f64>;
pub type Simulation = simulation::Simulation<f64>;
pub type Network = neuralnet::Mlp<f64>;
pub type HistoryWindow = orchestrator::HistoryWindow<f64>;

pub type Task32 = envsim::Task<f32>;
pub type Environment32 = envsim::Environment<f32>;
pub type Simulation32 = simulation::Simulation<f32>;
pub type Network32 = neuralnet::Mlp<f32>;
