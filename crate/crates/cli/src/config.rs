//! Flat run configuration. Every key is optional in the file; missing keys
//! take the defaults below, and command-line flags override both.
//!
//! ```toml
//! master_seed = 42          # environment instance
//! d = 8                     # skill dimension
//! c = 4                     # context dimension
//! n_agents = 3
//! alpha = 1.0
//! domain_bias = 1.0
//! reliability_min = 0.6
//! reliability_max = 0.95
//! window = 10               # history window per agent
//!
//! w_completeness = 0.4
//! w_relevance = 0.4
//! w_confidence = 0.2
//!
//! hidden_dims = [128, 64]
//! dropout = 0.0
//! confidence_head = true
//! init_seed = 11
//!
//! iterations = 500
//! batch_size = 64
//! learning_rate = 0.01
//! confidence_weight = 0.2
//! label_mode = "hard"       # or "soft"
//! soft_temperature = 0.1
//! train_seed = 7
//! optimizer = "adam"        # or "sgd"
//! executor = "oracle"       # or "model"
//! feedback_steps = 50
//!
//! strategies = ["neural", "random", "round-robin", "static-best"]
//! n_tasks = 300
//! eval_seed = 1
//! warmup_tasks = 100
//! warmup_seed = 1
//! random_seed = 1
//!
//! validation_tasks = 300
//! validation_seed = 21
//! grid_cap = 512
//! jobs = 0                  # 0 = one worker per core
//!
//! address = "127.0.0.1:8080"
//! task_seed = 0
//! pending_cap = 100
//! # auto_step_ms = 1000
//! # expire_after_ms = 30000
//!
//! # checkpoint = "runs/train/model.ckpt"
//! # feedback_log = "runs/serve/feedback.jsonl"
//! # static_dir = "dashboard/dist"
//! ```

use std::path::{Path, PathBuf};

use orchestra::evalreport::Warmup;
use orchestra::neuralnet::OptimizerKind;
use orchestra::training::{Executor, LabelMode};
use orchestra::{EnvConfig, FuzzyEvaluator, FuzzyWeights, LabelThresholds, ModelConfig, Simulation, StrategyKind, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SNAPSHOT_FILE: &str = "config.toml";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub master_seed: u64,
    pub d: usize,
    pub c: usize,
    pub n_agents: usize,
    pub alpha: f64,
    pub domain_bias: f64,
    pub reliability_min: f64,
    pub reliability_max: f64,
    pub window: usize,

    pub w_completeness: f64,
    pub w_relevance: f64,
    pub w_confidence: f64,

    pub hidden_dims: Vec<usize>,
    pub dropout: f64,
    pub confidence_head: bool,
    pub init_seed: u64,

    pub iterations: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub confidence_weight: f64,
    pub label_mode: LabelMode,
    pub soft_temperature: f64,
    pub train_seed: u64,
    pub optimizer: OptimizerKind,
    pub executor: Executor,
    pub feedback_steps: usize,

    pub strategies: Vec<StrategyKind>,
    pub n_tasks: usize,
    pub eval_seed: u64,
    pub warmup_tasks: usize,
    pub warmup_seed: u64,
    pub random_seed: u64,

    pub validation_tasks: usize,
    pub validation_seed: u64,
    pub grid_cap: usize,
    pub jobs: usize,

    pub address: String,
    pub task_seed: u64,
    pub pending_cap: usize,
    pub auto_step_ms: Option<u64>,
    pub expire_after_ms: Option<u64>,

    pub checkpoint: Option<PathBuf>,
    pub feedback_log: Option<PathBuf>,
    pub static_dir: Option<PathBuf>,
    #[serde(skip_serializing)]
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let env = EnvConfig::default();
        let weights = FuzzyWeights::default();
        let model = ModelConfig::default();
        let train = TrainConfig::default();
        Self {
            master_seed: env.master_seed,
            d: env.d,
            c: env.c,
            n_agents: env.n_agents,
            alpha: env.alpha,
            domain_bias: env.domain_bias,
            reliability_min: env.reliability_min,
            reliability_max: env.reliability_max,
            window: 10,
            w_completeness: weights.completeness,
            w_relevance: weights.relevance,
            w_confidence: weights.confidence,
            hidden_dims: model.hidden_dims,
            dropout: model.dropout,
            confidence_head: model.confidence_head,
            init_seed: model.init_seed,
            iterations: train.iterations,
            batch_size: train.batch_size,
            learning_rate: train.learning_rate,
            confidence_weight: train.confidence_weight,
            label_mode: train.label_mode,
            soft_temperature: train.soft_temperature,
            train_seed: train.seed,
            optimizer: train.optimizer,
            executor: train.executor,
            feedback_steps: train.feedback_steps,
            strategies: StrategyKind::BASELINES.to_vec(),
            n_tasks: 300,
            eval_seed: 1,
            warmup_tasks: 100,
            warmup_seed: 1,
            random_seed: 1,
            validation_tasks: 300,
            validation_seed: 21,
            grid_cap: 512,
            jobs: 0,
            address: "127.0.0.1:8080".into(),
            task_seed: 0,
            pending_cap: hitl::DEFAULT_PENDING_CAP,
            auto_step_ms: None,
            expire_after_ms: None,
            checkpoint: None,
            feedback_log: None,
            static_dir: None,
            out_dir: PathBuf::from("out"),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub iterations: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub confidence_weight: Option<f64>,
    pub strategies: Option<Vec<StrategyKind>>,
    pub n_tasks: Option<usize>,
    pub jobs: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub address: Option<String>,
    pub checkpoint: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(one_line(&e.to_string())))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {}", path.display(), one_line(&e.to_string()))))
    }

    /// File (if any) + flags, validated.
    pub fn resolve(file: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match file {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        macro_rules! set {
            ($($field:ident <- $src:ident),*) => {$(
                if let Some(v) = o.$src.clone() {
                    self.$field = v;
                }
            )*};
        }
        set!(master_seed <- seed, iterations <- iterations, batch_size <- batch_size,
             learning_rate <- learning_rate, confidence_weight <- confidence_weight,
             strategies <- strategies, n_tasks <- n_tasks, jobs <- jobs,
             out_dir <- out_dir, address <- address);
        if o.checkpoint.is_some() {
            self.checkpoint = o.checkpoint.clone();
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.env_config().validate()?;
        self.weights()?;
        self.train_config().validate()?;
        self.model_config().network_config(1, self.n_agents).validate()?;
        if self.window == 0 {
            return Err(CliError::Config("window must be at least 1".into()));
        }
        if self.n_tasks == 0 {
            return Err(CliError::Config("n_tasks must be at least 1".into()));
        }
        if self.warmup_tasks == 0 || self.validation_tasks == 0 {
            return Err(CliError::Config("warmup_tasks and validation_tasks must be at least 1".into()));
        }
        Ok(())
    }

    pub fn env_config(&self) -> EnvConfig {
        EnvConfig {
            d: self.d,
            c: self.c,
            n_agents: self.n_agents,
            alpha: self.alpha,
            domain_bias: self.domain_bias,
            master_seed: self.master_seed,
            reliability_min: self.reliability_min,
            reliability_max: self.reliability_max,
        }
    }

    pub fn weights(&self) -> Result<FuzzyWeights, CliError> {
        Ok(FuzzyWeights::new(self.w_completeness, self.w_relevance, self.w_confidence)?)
    }

    pub fn simulation(&self) -> Result<Simulation, CliError> {
        let evaluator = FuzzyEvaluator::new(self.weights()?, LabelThresholds::default())?;
        Ok(Simulation::new(self.env_config(), evaluator, self.window)?)
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            hidden_dims: self.hidden_dims.clone(),
            dropout: self.dropout,
            confidence_head: self.confidence_head,
            init_seed: self.init_seed,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            iterations: self.iterations,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            confidence_weight: self.confidence_weight,
            label_mode: self.label_mode,
            soft_temperature: self.soft_temperature,
            seed: self.train_seed,
            optimizer: self.optimizer,
            executor: self.executor,
            feedback_steps: self.feedback_steps,
        }
    }

    pub fn warmup(&self, sim: &Simulation) -> Result<Warmup, CliError> {
        Ok(orchestra::warmup(sim, self.warmup_tasks, self.warmup_seed)?)
    }

    /// TOML of everything except `out_dir`.
    pub fn snapshot(&self) -> String {
        format!(
            "# resolved configuration; rerun with --config\n{}",
            toml::to_string(self).expect("config serializes")
        )
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_round_trips() {
        let cfg = RunConfig {
            checkpoint: Some("a/b.ckpt".into()),
            auto_step_ms: Some(250),
            learning_rate: 0.001,
            ..RunConfig::default()
        };
        let back = RunConfig::from_toml(&cfg.snapshot()).unwrap();
        assert_eq!(back, RunConfig { out_dir: back.out_dir.clone(), ..cfg });
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        let err = RunConfig::from_toml("iterations = 5\nlearnig_rate = 0.1\n").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        assert!(!err.contains('\n'));
        let bad = RunConfig::from_toml("w_completeness = 0.9\n").unwrap();
        assert!(bad.validate().is_err());
        assert!(RunConfig::from_toml("strategies = [\"psychic\"]").is_err());
    }

    #[test]
    fn flags_override_the_file() {
        let mut cfg = RunConfig::from_toml("iterations = 5\nmaster_seed = 3\n").unwrap();
        cfg.apply(&Overrides {
            iterations: Some(9),
            strategies: Some(vec![StrategyKind::Random]),
            ..Overrides::default()
        });
        assert_eq!((cfg.iterations, cfg.master_seed), (9, 3));
        assert_eq!(cfg.strategies, vec![StrategyKind::Random]);
    }
}
