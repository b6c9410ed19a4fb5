use std::fs;
use std::future::Future;
use std::path::{Path, PathBuf};
use std::time::Duration;

use orchestra::evalreport::{compare, Comparison};
use orchestra::fuzzy::{sensitivity_sweep, SensitivityRow};
use orchestra::neuralnet::{deserialize, serialize};
use orchestra::orchestrator::{NeuralStrategy, OracleStrategy, RandomStrategy, RoundRobinStrategy, StaticBestStrategy, Strategy};
use orchestra::training::{grid_results_csv, grid_search, records_to_csv, train, GridResult, GridSettings, GridSpace};
use orchestra::{FuzzyEvaluator, FuzzyWeights, LabelThresholds, Network, Simulation, StrategyKind, TrainRecord};
use sha2::{Digest, Sha256};
use tokio::net::TcpListener;

use crate::config::{RunConfig, SNAPSHOT_FILE};
use crate::CliError;

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Creates the output directory and writes the config snapshot into it.
fn prepare_out_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = cfg.out_dir.clone();
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    write(&dir.join(SNAPSHOT_FILE), cfg.snapshot())?;
    Ok(dir)
}

pub struct TrainOutcome {
    pub model: Network,
    pub records: Vec<TrainRecord>,
    pub checkpoint: PathBuf,
}

/// Writes `model.ckpt`, `train_records.csv` and the config snapshot.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainOutcome, CliError> {
    let dir = prepare_out_dir(cfg)?;
    let sim = cfg.simulation()?;
    let model = cfg.model_config().build(&sim)?;
    let (model, records) = train(&sim, model, &cfg.train_config())?;
    let checkpoint = dir.join("model.ckpt");
    write(&checkpoint, serialize(&model))?;
    write(&dir.join("train_records.csv"), records_to_csv(&records)?)?;
    Ok(TrainOutcome {
        model,
        records,
        checkpoint,
    })
}

pub fn load_checkpoint(path: &Path, sim: &Simulation) -> Result<(Network, String), CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let model: Network = deserialize(&bytes)?;
    if model.config().input_dim != sim.input_width() || model.config().n_agents != sim.n_agents() {
        return Err(CliError::Config(format!(
            "checkpoint {} expects {} inputs and {} agents, configuration gives {} and {}",
            path.display(),
            model.config().input_dim,
            model.config().n_agents,
            sim.input_width(),
            sim.n_agents()
        )));
    }
    let id = hex::encode(&Sha256::digest(&bytes)[..8]);
    Ok((model, id))
}

pub fn build_strategies(
    cfg: &RunConfig,
    sim: &Simulation,
    model: Option<Network>,
    static_best: usize,
) -> Result<Vec<Box<dyn Strategy<f64>>>, CliError> {
    let n = sim.n_agents();
    let mut model = model;
    cfg.strategies
        .iter()
        .map(|kind| -> Result<Box<dyn Strategy<f64>>, CliError> {
            Ok(match kind {
                StrategyKind::Neural => {
                    let m = model
                        .take()
                        .ok_or_else(|| CliError::Usage("the neural strategy needs a checkpoint (--checkpoint)".into()))?;
                    Box::new(NeuralStrategy::new(m))
                }
                StrategyKind::Random => Box::new(RandomStrategy::new(n, cfg.random_seed)),
                StrategyKind::RoundRobin => Box::new(RoundRobinStrategy::new(n)),
                StrategyKind::StaticBest => Box::new(StaticBestStrategy::calibrated(n, static_best)?),
                StrategyKind::Oracle => Box::new(OracleStrategy::new(sim.clone())),
            })
        })
        .collect()
}

/// Writes `comparison.csv`, and per strategy `report_<name>.json` and
/// `confusion_<name>.csv`.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<Comparison, CliError> {
    if cfg.strategies.is_empty() {
        return Err(CliError::Usage("no strategies given".into()));
    }
    let sim = cfg.simulation()?;
    let model = match (cfg.strategies.contains(&StrategyKind::Neural), &cfg.checkpoint) {
        (true, Some(path)) => Some(load_checkpoint(path, &sim)?.0),
        (true, None) => {
            return Err(CliError::Usage("the neural strategy needs a checkpoint (--checkpoint)".into()));
        }
        (false, _) => None,
    };
    let dir = prepare_out_dir(cfg)?;
    let warm = cfg.warmup(&sim)?;
    let mut strategies = build_strategies(cfg, &sim, model, warm.static_best)?;
    let cmp = compare(&mut strategies, &sim, &warm.histories, cfg.n_tasks, cfg.eval_seed)?;
    write(&dir.join("comparison.csv"), cmp.to_csv())?;
    for r in &cmp.reports {
        write(&dir.join(format!("report_{}.json", r.strategy)), r.to_json())?;
        write(&dir.join(format!("confusion_{}.csv", r.strategy)), r.confusion_csv())?;
    }
    Ok(cmp)
}

/// Trains a model under `cfg` and compares it with the configured baselines.
pub struct BenchmarkRun {
    pub records: Vec<TrainRecord>,
    pub comparison: Comparison,
}

pub fn benchmark(cfg: &RunConfig) -> Result<BenchmarkRun, CliError> {
    let sim = cfg.simulation()?;
    let model = cfg.model_config().build(&sim)?;
    let (model, records) = train(&sim, model, &cfg.train_config())?;
    let warm = cfg.warmup(&sim)?;
    let mut strategies = build_strategies(cfg, &sim, Some(model), warm.static_best)?;
    let comparison = compare(&mut strategies, &sim, &warm.histories, cfg.n_tasks, cfg.eval_seed)?;
    Ok(BenchmarkRun { records, comparison })
}

fn load_space(path: &Path) -> Result<GridSpace, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    if text.trim().is_empty() {
        return Err(CliError::Parse(format!("{}: empty space file", path.display())));
    }
    let space: GridSpace = toml::from_str(&text).map_err(|e| {
        CliError::Parse(format!(
            "{}: {}",
            path.display(),
            e.to_string().split_whitespace().collect::<Vec<_>>().join(" ")
        ))
    })?;
    if space.size() == 0 {
        return Err(CliError::Parse(format!("{}: a grid axis is empty", path.display())));
    }
    Ok(space)
}

/// Writes `grid_results.csv`. Without a space file the 72-point default is searched.
pub fn cmd_gridsearch(cfg: &RunConfig, space_file: Option<&Path>) -> Result<Vec<GridResult>, CliError> {
    let space = match space_file {
        Some(p) => load_space(p)?,
        None => GridSpace::default(),
    };
    let dir = prepare_out_dir(cfg)?;
    let sim = cfg.simulation()?;
    let settings = GridSettings {
        base: cfg.train_config(),
        init_seed: cfg.init_seed,
        validation_tasks: cfg.validation_tasks,
        validation_seed: cfg.validation_seed,
        warmup_tasks: cfg.warmup_tasks,
        cap: cfg.grid_cap,
        jobs: cfg.jobs,
    };
    let results = grid_search(&sim, &space, &settings)?;
    write(&dir.join("grid_results.csv"), grid_results_csv(&results))?;
    Ok(results)
}

/// Parses `completeness,relevance,confidence` lines; `#` starts a comment.
/// Triples that do not sum to 1 are returned separately with their line.
pub fn parse_weight_grid(text: &str) -> Result<(Vec<FuzzyWeights>, Vec<(usize, String)>), CliError> {
    let mut valid = Vec::new();
    let mut rejected = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        let nums = parts
            .iter()
            .map(|p| p.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Parse(format!("weights line {}: {e}", i + 1)))?;
        if nums.len() != 3 {
            return Err(CliError::Parse(format!("weights line {}: expected three values", i + 1)));
        }
        match FuzzyWeights::new(nums[0], nums[1], nums[2]) {
            Ok(w) => valid.push(w),
            Err(e) => rejected.push((i + 1, format!("{line}: {e}"))),
        }
    }
    if valid.is_empty() && rejected.is_empty() {
        return Err(CliError::Parse("empty weight grid".into()));
    }
    Ok((valid, rejected))
}

pub fn default_weight_grid() -> Vec<FuzzyWeights> {
    [(0.4, 0.4, 0.2), (0.5, 0.3, 0.2), (0.3, 0.5, 0.2), (0.4, 0.3, 0.3)]
        .into_iter()
        .map(|(a, b, c)| FuzzyWeights::new(a, b, c).expect("valid default triple"))
        .collect()
}

pub struct SensitivityOutcome {
    pub rows: Vec<SensitivityRow>,
    pub rejected: Vec<(usize, String)>,
}

/// Neural selection accuracy after training and evaluating under `weights`.
fn accuracy_under(cfg: &RunConfig, weights: &FuzzyWeights) -> orchestra::Result<f64> {
    let run = RunConfig {
        w_completeness: weights.completeness,
        w_relevance: weights.relevance,
        w_confidence: weights.confidence,
        strategies: vec![StrategyKind::Neural],
        ..cfg.clone()
    };
    let sim = Simulation::new(
        run.env_config(),
        FuzzyEvaluator::new(*weights, LabelThresholds::default())?,
        run.window,
    )?;
    let model = run.model_config().build(&sim)?;
    let (model, _) = train(&sim, model, &run.train_config())?;
    let warm = orchestra::warmup(&sim, run.warmup_tasks, run.warmup_seed)?;
    let mut s = NeuralStrategy::new(model);
    Ok(orchestra::evaluate(&mut s, &sim, &warm.histories, run.n_tasks, run.eval_seed)?.selection_accuracy)
}

/// Writes `sensitivity.csv`: one row per triple, rejected triples carry an error.
pub fn cmd_sensitivity(cfg: &RunConfig, weights_file: Option<&Path>) -> Result<SensitivityOutcome, CliError> {
    let (grid, rejected) = match weights_file {
        Some(p) => parse_weight_grid(&fs::read_to_string(p).map_err(|e| CliError::io(p, e))?)?,
        None => (default_weight_grid(), Vec::new()),
    };
    let dir = prepare_out_dir(cfg)?;
    let rows = if grid.is_empty() {
        Vec::new()
    } else {
        sensitivity_sweep(&grid, |w| accuracy_under(cfg, w))?
    };
    let mut csv = String::from("w_completeness,w_relevance,w_confidence,accuracy,delta,error\n");
    for r in &rows {
        let w = r.weights;
        csv.push_str(&format!(
            "{},{},{},{:.6},{:.6},\n",
            w.completeness, w.relevance, w.confidence, r.accuracy, r.delta
        ));
    }
    for (line, err) in &rejected {
        csv.push_str(&format!(",,,,,\"line {line}: {}\"\n", err.replace('"', "'")));
    }
    write(&dir.join("sensitivity.csv"), csv)?;
    Ok(SensitivityOutcome { rows, rejected })
}

pub async fn bind(address: &str) -> Result<TcpListener, CliError> {
    TcpListener::bind(address)
        .await
        .map_err(|e| CliError::Config(format!("cannot bind {address}: {e}")))
}

/// Serves the HITL API on `listener` until `shutdown` resolves.
pub async fn serve_on(
    listener: TcpListener,
    cfg: &RunConfig,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<hitl::Session, CliError> {
    let sim = cfg.simulation()?;
    let path = cfg
        .checkpoint
        .as_ref()
        .ok_or_else(|| CliError::Usage("serve needs a checkpoint (--checkpoint)".into()))?;
    let (model, checkpoint_id) = load_checkpoint(path, &sim)?;
    let dir = prepare_out_dir(cfg)?;
    let feedback_path = cfg.feedback_log.clone().unwrap_or_else(|| dir.join("feedback.jsonl"));
    let session = hitl::Session::new(
        sim,
        model,
        hitl::SessionConfig {
            task_seed: cfg.task_seed,
            pending_cap: cfg.pending_cap,
            feedback_path: Some(feedback_path),
            checkpoint_id,
        },
    )?;
    let options = hitl::ServeOptions {
        static_dir: cfg.static_dir.clone(),
        auto_step: cfg.auto_step_ms.map(Duration::from_millis),
        expire_after: cfg.expire_after_ms.map(Duration::from_millis),
    };
    Ok(hitl::serve(listener, session, options, shutdown).await?)
}

/// Blocking entry point: binds `cfg.address` and serves until Ctrl-C.
pub fn cmd_serve(cfg: &RunConfig) -> Result<(), CliError> {
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Config(format!("runtime: {e}")))?;
    rt.block_on(async {
        let listener = bind(&cfg.address).await?;
        let local = listener.local_addr().map_err(|e| CliError::Config(e.to_string()))?;
        println!("serving on http://{local}");
        serve_on(listener, cfg, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map(|_| ())
    })
}
