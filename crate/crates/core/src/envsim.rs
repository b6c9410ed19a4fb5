//! Synthetic task generation and simulated agents.
//!
//! An agent's raw performance on a task is
//! `-‖skill − task‖ + ε + α·cos(context, expertise)` where `ε ~ N(0, σ = 1 − reliability)`
//! is drawn once per (agent, task) from a keyed stream, so repeated evaluation is
//! bit-identical without a cache.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{keyed_rng, standard_normals, Stream};
use crate::scalar::{cosine_similarity, euclidean_distance, l2_norm, Scalar};

/// Task-id offsets that keep the data splits disjoint within one run.
pub mod split {
    pub const TRAIN: u64 = 0;
    pub const WARMUP: u64 = 1 << 40;
    pub const VALIDATION: u64 = 2 << 40;
    pub const EVAL: u64 = 3 << 40;
    pub const LIVE: u64 = 4 << 40;
    pub const FEEDBACK: u64 = 5 << 40;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Emergency,
    Document,
    General,
}

impl Domain {
    pub const ALL: [Domain; 3] = [Domain::Emergency, Domain::Document, Domain::General];

    /// Skill dimensions that receive the domain bias for a skill space of size `d`.
    pub fn biased_dims(self, d: usize) -> Range<usize> {
        match self {
            Domain::Emergency => 0..2.min(d),
            Domain::Document => d / 2..d,
            Domain::General => 0..0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Emergency => "emergency",
            Domain::Document => "document",
            Domain::General => "general",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "emergency" => Ok(Domain::Emergency),
            "document" => Ok(Domain::Document),
            "general" => Ok(Domain::General),
            other => Err(Error::Parse(format!("unknown domain `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Task<T: Scalar = f64> {
    pub id: u64,
    pub domain: Domain,
    /// Required skill features, unit L2 norm.
    pub task_vector: Vec<T>,
    pub context_vector: Vec<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct AgentSpec<T: Scalar = f64> {
    pub agent_id: usize,
    pub name: String,
    pub skill_vector: Vec<T>,
    pub expertise_vector: Vec<T>,
    pub reliability: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    /// Skill/task dimension.
    pub d: usize,
    /// Context/expertise dimension.
    pub c: usize,
    pub n_agents: usize,
    /// Weight of the context-alignment term.
    pub alpha: f64,
    pub domain_bias: f64,
    pub master_seed: u64,
    pub reliability_min: f64,
    pub reliability_max: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            d: 8,
            c: 4,
            n_agents: 3,
            alpha: 1.0,
            domain_bias: 1.0,
            master_seed: 42,
            reliability_min: 0.6,
            reliability_max: 0.95,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d < 4 {
            return Err(Error::Config(format!("d must be at least 4, got {}", self.d)));
        }
        if self.c < 1 {
            return Err(Error::Config("c must be positive".into()));
        }
        if self.n_agents < 2 {
            return Err(Error::Config(format!(
                "n_agents must be at least 2, got {}",
                self.n_agents
            )));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::Config(format!("alpha must be finite and >= 0, got {}", self.alpha)));
        }
        if !self.domain_bias.is_finite() {
            return Err(Error::Config("domain_bias must be finite".into()));
        }
        let (lo, hi) = (self.reliability_min, self.reliability_max);
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
            return Err(Error::Config(format!(
                "reliability range [{lo}, {hi}] must lie inside [0, 1] with min <= max"
            )));
        }
        Ok(())
    }
}

/// Raw score for one (agent, task) pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RawOutcome<T: Scalar = f64> {
    pub agent_id: usize,
    pub task_id: u64,
    pub score: T,
    /// Realized per-pair noise.
    pub noise: T,
}

pub fn agent_name(agent_id: usize) -> String {
    match agent_id {
        0 => "EmergencyBot".to_string(),
        1 => "DocumentBot".to_string(),
        2 => "GeneralistBot".to_string(),
        i => format!("Agent{i}"),
    }
}

fn agent_bias_domain(agent_id: usize) -> Domain {
    match agent_id {
        0 => Domain::Emergency,
        1 => Domain::Document,
        _ => Domain::General,
    }
}

pub(crate) fn task_base_normals(config: &EnvConfig, task_id: u64, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let t = standard_normals(&mut keyed_rng(seed, Stream::TaskVector, &[task_id]), config.d);
    let c = standard_normals(&mut keyed_rng(seed, Stream::TaskContext, &[task_id]), config.c);
    (t, c)
}

pub(crate) fn biased_task_vector(config: &EnvConfig, domain: Domain, task_id: u64, seed: u64) -> Vec<f64> {
    let (mut t, _) = task_base_normals(config, task_id, seed);
    for i in domain.biased_dims(config.d) {
        t[i] += config.domain_bias;
    }
    t
}

/// Builds the task with the given id; a pure function of `(config.d, config.c, domain, task_id, seed)`.
pub fn generate_task<T: Scalar>(config: &EnvConfig, domain: Domain, task_id: u64, seed: u64) -> Task<T> {
    let t = biased_task_vector(config, domain, task_id, seed);
    let (_, context) = task_base_normals(config, task_id, seed);
    let norm = l2_norm(&t);
    let task_vector = if norm > 0.0 {
        t.iter().map(|&x| T::of(x / norm)).collect()
    } else {
        t.iter().map(|&x| T::of(x)).collect()
    };
    Task {
        id: task_id,
        domain,
        task_vector,
        context_vector: context.into_iter().map(T::of).collect(),
    }
}

/// Domain of the task with this id in a uniformly mixed stream.
pub fn sample_domain(task_id: u64, seed: u64) -> Domain {
    let mut rng = keyed_rng(seed, Stream::TaskDomain, &[task_id]);
    Domain::ALL[rng.random_range(0..Domain::ALL.len())]
}

pub(crate) fn unbiased_skill(config: &EnvConfig, agent_id: usize) -> Vec<f64> {
    standard_normals(
        &mut keyed_rng(config.master_seed, Stream::AgentSkill, &[agent_id as u64]),
        config.d,
    )
}

pub fn spawn_agents<T: Scalar>(config: &EnvConfig) -> Result<Vec<AgentSpec<T>>> {
    config.validate()?;
    let agents = (0..config.n_agents)
        .map(|i| {
            let mut skill = unbiased_skill(config, i);
            for k in agent_bias_domain(i).biased_dims(config.d) {
                skill[k] += 1.0;
            }
            let expertise = standard_normals(
                &mut keyed_rng(config.master_seed, Stream::AgentExpertise, &[i as u64]),
                config.c,
            );
            let reliability = keyed_rng(config.master_seed, Stream::AgentReliability, &[i as u64])
                .random_range(config.reliability_min..=config.reliability_max);
            AgentSpec {
                agent_id: i,
                name: agent_name(i),
                skill_vector: skill.into_iter().map(T::of).collect(),
                expertise_vector: expertise.into_iter().map(T::of).collect(),
                reliability: T::of(reliability),
            }
        })
        .collect();
    Ok(agents)
}

/// Standard-normal draw behind ε for one (agent, task) pair.
pub fn noise_draw(master_seed: u64, agent_id: usize, task_id: u64) -> f64 {
    let mut rng = keyed_rng(master_seed, Stream::Noise, &[agent_id as u64, task_id]);
    StandardNormal.sample(&mut rng)
}

pub fn raw_score<T: Scalar>(agent: &AgentSpec<T>, task: &Task<T>, env: &EnvConfig) -> Result<RawOutcome<T>> {
    if agent.skill_vector.len() != task.task_vector.len() {
        return Err(Error::Shape(format!(
            "skill dimension {} != task dimension {}",
            agent.skill_vector.len(),
            task.task_vector.len()
        )));
    }
    if agent.expertise_vector.len() != task.context_vector.len() {
        return Err(Error::Shape(format!(
            "expertise dimension {} != context dimension {}",
            agent.expertise_vector.len(),
            task.context_vector.len()
        )));
    }
    let sigma = T::one() - agent.reliability;
    let noise = sigma * T::of(noise_draw(env.master_seed, agent.agent_id, task.id));
    let distance = euclidean_distance(&agent.skill_vector, &task.task_vector);
    let alignment = cosine_similarity(&task.context_vector, &agent.expertise_vector);
    let score = -distance + noise + T::of(env.alpha) * alignment;
    Ok(RawOutcome {
        agent_id: agent.agent_id,
        task_id: task.id,
        score,
        noise,
    })
}

/// A configured environment: the config plus its fixed agent roster.
#[derive(Clone, Debug)]
pub struct Environment<T: Scalar = f64> {
    config: EnvConfig,
    agents: Vec<AgentSpec<T>>,
}

impl<T: Scalar> Environment<T> {
    pub fn new(config: EnvConfig) -> Result<Self> {
        let agents = spawn_agents(&config)?;
        Ok(Self { config, agents })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn agents(&self) -> &[AgentSpec<T>] {
        &self.agents
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn agent(&self, agent_id: usize) -> Result<&AgentSpec<T>> {
        self.agents.get(agent_id).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "agent index {agent_id} out of range for {} agents",
                self.agents.len()
            ))
        })
    }

    pub fn generate_task(&self, domain: Domain, task_id: u64, seed: u64) -> Task<T> {
        generate_task(&self.config, domain, task_id, seed)
    }

    pub fn raw_score(&self, agent_id: usize, task: &Task<T>) -> Result<RawOutcome<T>> {
        raw_score(self.agent(agent_id)?, task, &self.config)
    }

    pub fn roster_json(&self) -> String {
        serde_json::to_string_pretty(&self.agents).expect("agent specs serialize")
    }
}

/// Sequential stream of tasks with uniformly mixed domains.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskStream {
    pub seed: u64,
    pub next_id: u64,
}

impl TaskStream {
    pub fn new(seed: u64, first_id: u64) -> Self {
        Self { seed, next_id: first_id }
    }

    pub fn next_task<T: Scalar>(&mut self, config: &EnvConfig) -> Task<T> {
        let id = self.next_id;
        self.next_id += 1;
        generate_task(config, sample_domain(id, self.seed), id, self.seed)
    }

    pub fn take_tasks<T: Scalar>(&mut self, config: &EnvConfig, n: usize) -> Vec<Task<T>> {
        (0..n).map(|_| self.next_task(config)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> EnvConfig {
        EnvConfig::default()
    }

    #[test]
    fn task_generation_is_deterministic() {
        let a: Task = generate_task(&cfg(), Domain::General, 7, 42);
        let b: Task = generate_task(&cfg(), Domain::General, 7, 42);
        assert_eq!(a, b);
        for (x, y) in a.task_vector.iter().zip(&b.task_vector) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn task_vector_is_unit_norm() {
        for id in 0..50 {
            for dom in Domain::ALL {
                let t: Task = generate_task(&cfg(), dom, id, 9);
                assert!((l2_norm(&t.task_vector) - 1.0).abs() < 1e-9);
                assert_eq!(t.context_vector.len(), 4);
            }
        }
    }

    #[test]
    fn emergency_bias_adds_one_to_first_two_dims() {
        let config = cfg();
        let (base, _) = task_base_normals(&config, 11, 5);
        let biased = biased_task_vector(&config, Domain::Emergency, 11, 5);
        let expected = [1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        for i in 0..8 {
            assert_eq!(biased[i], base[i] + expected[i]);
        }
        let t: Task = generate_task(&config, Domain::Emergency, 11, 5);
        let norm = l2_norm(&biased);
        for i in 0..8 {
            assert!((t.task_vector[i] - biased[i] / norm).abs() < 1e-15);
        }
    }

    #[test]
    fn document_bias_targets_latter_half() {
        assert_eq!(Domain::Document.biased_dims(8), 4..8);
        assert_eq!(Domain::Emergency.biased_dims(8), 0..2);
        assert!(Domain::General.biased_dims(8).is_empty());
        let config = cfg();
        let (base, _) = task_base_normals(&config, 3, 1);
        let biased = biased_task_vector(&config, Domain::Document, 3, 1);
        for i in 0..8 {
            let bump = if i >= 4 { 1.0 } else { 0.0 };
            assert_eq!(biased[i], base[i] + bump);
        }
    }

    #[test]
    fn roster_is_deterministic_and_named() {
        let a: Vec<AgentSpec> = spawn_agents(&cfg()).unwrap();
        let b: Vec<AgentSpec> = spawn_agents(&cfg()).unwrap();
        assert_eq!(a, b);
        let names: Vec<_> = a.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, ["EmergencyBot", "DocumentBot", "GeneralistBot"]);
        for agent in &a {
            assert!((0.6..=0.95).contains(&agent.reliability));
            assert_eq!(agent.skill_vector.len(), 8);
            assert_eq!(agent.expertise_vector.len(), 4);
        }
    }

    #[test]
    fn agent_biases_match_unbiased_draws() {
        let config = cfg();
        let agents: Vec<AgentSpec> = spawn_agents(&config).unwrap();
        let raw0 = unbiased_skill(&config, 0);
        for k in 0..8 {
            let bump = if k < 2 { 1.0 } else { 0.0 };
            assert_eq!(agents[0].skill_vector[k], raw0[k] + bump);
        }
        let raw1 = unbiased_skill(&config, 1);
        for k in 0..8 {
            let bump = if k >= 4 { 1.0 } else { 0.0 };
            assert_eq!(agents[1].skill_vector[k], raw1[k] + bump);
        }
        assert_eq!(agents[2].skill_vector, unbiased_skill(&config, 2));
    }

    #[test]
    fn extra_agents_are_unbiased() {
        let config = EnvConfig { n_agents: 5, ..cfg() };
        let agents: Vec<AgentSpec> = spawn_agents(&config).unwrap();
        assert_eq!(agents.len(), 5);
        assert_eq!(agents[4].name, "Agent4");
        assert_eq!(agents[4].skill_vector, unbiased_skill(&config, 4));
    }

    #[test]
    fn config_validation() {
        assert!(spawn_agents::<f64>(&EnvConfig { n_agents: 1, ..cfg() }).is_err());
        assert!(EnvConfig { d: 3, ..cfg() }.validate().is_err());
        assert!(EnvConfig { alpha: -0.5, ..cfg() }.validate().is_err());
        assert!(EnvConfig { reliability_max: 1.5, ..cfg() }.validate().is_err());
        assert!(cfg().validate().is_ok());
    }

    fn fixed_agent(skill: Vec<f64>, reliability: f64) -> AgentSpec {
        AgentSpec {
            agent_id: 0,
            name: "a".into(),
            skill_vector: skill,
            expertise_vector: vec![1.0, 0.0, 0.0, 0.0],
            reliability,
        }
    }

    #[test]
    fn perfect_match_without_noise_scores_zero() {
        let config = EnvConfig { alpha: 0.0, ..cfg() };
        let task: Task = generate_task(&config, Domain::General, 1, 1);
        let agent = fixed_agent(task.task_vector.clone(), 1.0);
        let out = raw_score(&agent, &task, &config).unwrap();
        assert_eq!(out.score, 0.0);
        assert_eq!(out.noise, 0.0);
    }

    #[test]
    fn three_four_five_distance() {
        let config = EnvConfig { alpha: 0.0, ..cfg() };
        let task: Task = generate_task(&config, Domain::General, 2, 1);
        let mut skill = task.task_vector.clone();
        skill[0] += 3.0;
        skill[1] += 4.0;
        let out = raw_score(&fixed_agent(skill, 1.0), &task, &config).unwrap();
        assert!((out.score + 5.0).abs() < 1e-12);
    }

    #[test]
    fn zero_context_gives_zero_alignment() {
        let config = cfg();
        let mut task: Task = generate_task(&config, Domain::General, 2, 1);
        task.context_vector = vec![0.0; 4];
        let agent = fixed_agent(task.task_vector.clone(), 1.0);
        assert_eq!(raw_score(&agent, &task, &config).unwrap().score, 0.0);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let config = cfg();
        let task: Task = generate_task(&config, Domain::General, 2, 1);
        let agent = fixed_agent(vec![0.0; 3], 0.9);
        assert!(matches!(raw_score(&agent, &task, &config), Err(Error::Shape(_))));
    }

    /// Straight-line evaluation of the scoring formula without any of the library helpers.
    fn reference_score(agent: &AgentSpec, task: &Task, config: &EnvConfig) -> f64 {
        let mut sq = 0.0;
        for i in 0..task.task_vector.len() {
            let diff = agent.skill_vector[i] - task.task_vector[i];
            sq += diff * diff;
        }
        let (mut dot, mut nc, mut ne) = (0.0, 0.0, 0.0);
        for i in 0..task.context_vector.len() {
            dot += task.context_vector[i] * agent.expertise_vector[i];
            nc += task.context_vector[i] * task.context_vector[i];
            ne += agent.expertise_vector[i] * agent.expertise_vector[i];
        }
        let eps = (1.0 - agent.reliability) * noise_draw(config.master_seed, agent.agent_id, task.id);
        -sq.sqrt() + eps + config.alpha * dot / (nc.sqrt() * ne.sqrt())
    }

    #[test]
    fn score_matches_reference_and_is_stable() {
        let config = cfg();
        let env: Environment = Environment::new(config.clone()).unwrap();
        let mut stream = TaskStream::new(3, 0);
        for _ in 0..100 {
            let task = stream.next_task::<f64>(&config);
            for agent in env.agents() {
                let first = env.raw_score(agent.agent_id, &task).unwrap();
                let again = env.raw_score(agent.agent_id, &task).unwrap();
                assert_eq!(first.score.to_bits(), again.score.to_bits());
                assert_eq!(first.noise.to_bits(), again.noise.to_bits());
                let expected = reference_score(agent, &task, &config);
                assert!((first.score - expected).abs() < 1e-12, "{} vs {}", first.score, expected);
            }
        }
    }

    #[test]
    fn emergency_bot_outscores_document_bot_on_emergency_tasks() {
        let config = cfg();
        let env: Environment = Environment::new(config.clone()).unwrap();
        let (mut e, mut d) = (0.0, 0.0);
        for id in 0..300 {
            let task = env.generate_task(Domain::Emergency, id, 17);
            e += env.raw_score(0, &task).unwrap().score;
            d += env.raw_score(1, &task).unwrap().score;
        }
        assert!(e / 300.0 > d / 300.0, "EmergencyBot {e} DocumentBot {d}");
    }

    #[test]
    fn stream_mixes_all_domains() {
        let mut stream = TaskStream::new(1, split::EVAL);
        let tasks: Vec<Task> = stream.take_tasks(&cfg(), 300);
        assert_eq!(tasks[0].id, split::EVAL);
        for dom in Domain::ALL {
            let share = tasks.iter().filter(|t| t.domain == dom).count() as f64 / 300.0;
            assert!((share - 1.0 / 3.0).abs() < 0.08, "{dom}: {share}");
        }
    }

    #[test]
    fn f32_environment_works() {
        let env: Environment<f32> = Environment::new(cfg()).unwrap();
        let task = env.generate_task(Domain::Document, 4, 2);
        let out = env.raw_score(1, &task).unwrap();
        assert!(out.score.is_finite());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn score_strictly_decreases_with_distance(extra in 0.01f64..5.0, dim in 0usize..8, id in 0u64..1000) {
                let config = cfg();
                let task: Task = generate_task(&config, Domain::General, id, 3);
                let mut near = task.task_vector.clone();
                near[dim] += 0.5;
                let mut far = near.clone();
                far[dim] += extra;
                let a = raw_score(&fixed_agent(near, 0.8), &task, &config).unwrap();
                let b = raw_score(&fixed_agent(far, 0.8), &task, &config).unwrap();
                prop_assert_eq!(a.noise, b.noise);
                prop_assert!(b.score < a.score);
            }

            #[test]
            fn full_reliability_means_zero_noise(id in 0u64..100_000, seed in any::<u64>()) {
                let config = EnvConfig { master_seed: seed, ..cfg() };
                let task: Task = generate_task(&config, Domain::Emergency, id, seed);
                let out = raw_score(&fixed_agent(vec![0.3; 8], 1.0), &task, &config).unwrap();
                prop_assert_eq!(out.noise, 0.0);
            }
        }
    }
}
