use std::cmp::Ordering;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{train, ModelConfig, TrainConfig};
use crate::envsim::split;
use crate::error::{Error, Result};
use crate::evalreport::{evaluate_from, warmup};
use crate::orchestrator::NeuralStrategy;
use crate::scalar::Scalar;
use crate::simulation::Simulation;

/// Candidate values per hyperparameter; the search runs their Cartesian product.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpace {
    pub hidden_dims: Vec<Vec<usize>>,
    pub dropout: Vec<f64>,
    pub learning_rate: Vec<f64>,
    pub batch_size: Vec<usize>,
    pub confidence_weight: Vec<f64>,
}

impl Default for GridSpace {
    fn default() -> Self {
        Self {
            hidden_dims: vec![vec![64, 32], vec![128, 64], vec![256, 128, 64]],
            dropout: vec![0.0, 0.2],
            learning_rate: vec![0.001, 0.01],
            batch_size: vec![64, 128],
            confidence_weight: vec![0.0, 0.1, 0.2],
        }
    }
}

impl GridSpace {
    /// 12-combination subset of the default axes.
    pub fn smoke() -> Self {
        Self {
            hidden_dims: vec![vec![64, 32], vec![128, 64], vec![256, 128, 64]],
            dropout: vec![0.0],
            learning_rate: vec![0.001, 0.01],
            batch_size: vec![64],
            confidence_weight: vec![0.0, 0.2],
        }
    }

    pub fn size(&self) -> usize {
        self.hidden_dims.len()
            * self.dropout.len()
            * self.learning_rate.len()
            * self.batch_size.len()
            * self.confidence_weight.len()
    }

    /// All combinations in lexicographic order of the axes.
    pub fn combinations(&self) -> Vec<GridPoint> {
        let mut out = Vec::with_capacity(self.size());
        for h in &self.hidden_dims {
            for &dropout in &self.dropout {
                for &learning_rate in &self.learning_rate {
                    for &batch_size in &self.batch_size {
                        for &confidence_weight in &self.confidence_weight {
                            out.push(GridPoint {
                                hidden_dims: h.clone(),
                                dropout,
                                learning_rate,
                                batch_size,
                                confidence_weight,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub hidden_dims: Vec<usize>,
    pub dropout: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub confidence_weight: f64,
}

impl GridPoint {
    pub fn hidden_label(&self) -> String {
        let dims: Vec<String> = self.hidden_dims.iter().map(usize::to_string).collect();
        format!("[{}]", dims.join(","))
    }

    fn lexicographic(&self, other: &Self) -> Ordering {
        self.hidden_dims
            .cmp(&other.hidden_dims)
            .then(self.dropout.total_cmp(&other.dropout))
            .then(self.learning_rate.total_cmp(&other.learning_rate))
            .then(self.batch_size.cmp(&other.batch_size))
            .then(self.confidence_weight.total_cmp(&other.confidence_weight))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub rank: usize,
    pub point: GridPoint,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridSettings {
    /// Iterations, seed, optimizer and label mode shared by every run.
    pub base: TrainConfig,
    pub init_seed: u64,
    pub validation_tasks: usize,
    pub validation_seed: u64,
    pub warmup_tasks: usize,
    /// Largest number of combinations accepted.
    pub cap: usize,
    /// Worker threads; 0 uses the rayon default.
    pub jobs: usize,
}

impl Default for GridSettings {
    fn default() -> Self {
        Self {
            base: TrainConfig::default(),
            init_seed: ModelConfig::default().init_seed,
            validation_tasks: 300,
            validation_seed: 21,
            warmup_tasks: 100,
            cap: 512,
            jobs: 0,
        }
    }
}

fn run_point<T: Scalar>(sim: &Simulation<T>, point: &GridPoint, settings: &GridSettings) -> Result<f64> {
    let model = ModelConfig {
        hidden_dims: point.hidden_dims.clone(),
        dropout: point.dropout,
        confidence_head: true,
        init_seed: settings.init_seed,
    }
    .build(sim)?;
    let config = TrainConfig {
        learning_rate: point.learning_rate,
        batch_size: point.batch_size,
        confidence_weight: point.confidence_weight,
        ..settings.base.clone()
    };
    let (model, _) = train(sim, model, &config)?;
    let warm = warmup(sim, settings.warmup_tasks, settings.validation_seed)?;
    let mut strategy = NeuralStrategy::new(model);
    let report = evaluate_from(
        &mut strategy,
        sim,
        &warm.histories,
        settings.validation_tasks,
        settings.validation_seed,
        split::VALIDATION,
    )?;
    Ok(report.selection_accuracy)
}

/// Trains one model per combination and ranks them by validation accuracy,
/// best first; ties keep lexicographic configuration order.
pub fn grid_search<T: Scalar>(sim: &Simulation<T>, space: &GridSpace, settings: &GridSettings) -> Result<Vec<GridResult>> {
    let count = space.size();
    if count == 0 {
        return Err(Error::InvalidArgument("grid space has an empty axis".into()));
    }
    if count > settings.cap {
        return Err(Error::GridTooLarge { count, cap: settings.cap });
    }
    settings.base.validate()?;
    let points = space.combinations();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let accuracies: Vec<f64> = pool.install(|| {
        points
            .par_iter()
            .map(|p| run_point(sim, p, settings))
            .collect::<Result<Vec<_>>>()
    })?;
    let mut ranked: Vec<(GridPoint, f64)> = points.into_iter().zip(accuracies).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.lexicographic(&b.0)));
    Ok(ranked
        .into_iter()
        .enumerate()
        .map(|(i, (point, accuracy))| GridResult {
            rank: i + 1,
            point,
            accuracy,
        })
        .collect())
}

/// `rank,hidden_dims,dropout,learning_rate,batch_size,confidence_weight,accuracy`.
pub fn grid_results_csv(results: &[GridResult]) -> String {
    let mut out = String::from("rank,hidden_dims,dropout,learning_rate,batch_size,confidence_weight,accuracy\n");
    for r in results {
        let p = &r.point;
        writeln!(
            out,
            "{},\"{}\",{},{},{},{},{:.6}",
            r.rank,
            p.hidden_label(),
            p.dropout,
            p.learning_rate,
            p.batch_size,
            p.confidence_weight,
            r.accuracy
        )
        .unwrap();
    }
    out
}
