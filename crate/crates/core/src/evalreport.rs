//! Strategy evaluation: accuracy against the oracle, average executed quality,
//! confusion matrices and per-task records.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::envsim::{split, Domain, Task, TaskStream};
use crate::error::{Error, Result};
use crate::fuzzy::QualityLabel;
use crate::orchestrator::{HistoryWindow, Strategy};
use crate::scalar::{argmax, Scalar};
use crate::simulation::Simulation;
use crate::training::oracle_label;

/// Counts indexed `[oracle agent][selected agent]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(n: usize) -> Self {
        Self {
            counts: vec![vec![0; n]; n],
        }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let n = counts.len();
        if counts.iter().any(|row| row.len() != n) {
            return Err(Error::Shape("confusion matrix must be square".into()));
        }
        Ok(Self { counts })
    }

    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn record(&mut self, oracle: usize, selected: usize) {
        self.counts[oracle][selected] += 1;
    }

    pub fn get(&self, oracle: usize, selected: usize) -> u64 {
        self.counts[oracle][selected]
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn off_diagonal(&self) -> u64 {
        self.total() - self.trace()
    }

    pub fn row_total(&self, oracle: usize) -> u64 {
        self.counts[oracle].iter().sum()
    }

    pub fn column_total(&self, selected: usize) -> u64 {
        self.counts.iter().map(|r| r[selected]).sum()
    }

    /// trace / total, 0 for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            t => self.trace() as f64 / t as f64,
        }
    }

    /// CSV with agent names on both axes, followed by `trace` and `off_diagonal` rows.
    pub fn to_csv(&self, names: &[String]) -> String {
        let mut out = String::from("oracle\\selected");
        for name in names {
            write!(out, ",{name}").unwrap();
        }
        out.push('\n');
        for (name, row) in names.iter().zip(&self.counts) {
            out.push_str(name);
            for c in row {
                write!(out, ",{c}").unwrap();
            }
            out.push('\n');
        }
        writeln!(out, "trace,{}", self.trace()).unwrap();
        writeln!(out, "off_diagonal,{}", self.off_diagonal()).unwrap();
        out
    }

    /// Parses [`ConfusionMatrix::to_csv`] output back into names and counts.
    pub fn from_csv(text: &str) -> Result<(Vec<String>, Self)> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty confusion CSV".into()))?;
        let names: Vec<String> = header.split(',').skip(1).map(str::to_string).collect();
        let n = names.len();
        let mut counts = Vec::with_capacity(n);
        for (i, line) in lines.by_ref().take(n).enumerate() {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != n + 1 || cells[0] != names[i] {
                return Err(Error::Parse(format!("confusion CSV line {}: malformed row", i + 2)));
            }
            let row = cells[1..]
                .iter()
                .map(|c| c.parse::<u64>().map_err(|e| Error::Parse(format!("line {}: {e}", i + 2))))
                .collect::<Result<Vec<_>>>()?;
            counts.push(row);
        }
        let matrix = Self::from_counts(counts)?;
        if matrix.n_classes() != n {
            return Err(Error::Parse("confusion CSV is missing rows".into()));
        }
        for line in lines {
            let (key, value) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("bad summary line `{line}`")))?;
            let value: u64 = value.parse().map_err(|e| Error::Parse(format!("{key}: {e}")))?;
            let expected = match key {
                "trace" => matrix.trace(),
                "off_diagonal" => matrix.off_diagonal(),
                other => return Err(Error::Parse(format!("unknown summary row `{other}`"))),
            };
            if value != expected {
                return Err(Error::Parse(format!("{key} {value} disagrees with counts ({expected})")));
            }
        }
        Ok((names, matrix))
    }

    /// Fixed-width table for terminal output.
    pub fn render_text(&self, names: &[String]) -> String {
        let width = names.iter().map(String::len).max().unwrap_or(0).max(8) + 2;
        let mut out = format!("{:width$}", "oracle \\ sel");
        for name in names {
            write!(out, "{name:>width$}").unwrap();
        }
        out.push('\n');
        for (name, row) in names.iter().zip(&self.counts) {
            write!(out, "{name:width$}").unwrap();
            for c in row {
                write!(out, "{c:>width$}").unwrap();
            }
            out.push('\n');
        }
        writeln!(out, "trace {}  off-diagonal {}", self.trace(), self.off_diagonal()).unwrap();
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub task_id: u64,
    pub domain: Domain,
    pub oracle_agent: usize,
    pub selected_agent: usize,
    /// Fuzzy quality of the executed (selected) agent.
    pub quality: f64,
    pub completeness: f64,
    pub relevance: f64,
    pub confidence: f64,
    pub label: QualityLabel,
    pub distribution: Vec<f64>,
    pub predicted_confidence: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub strategy: String,
    pub n_tasks: usize,
    pub selection_accuracy: f64,
    pub average_quality: f64,
    pub agent_names: Vec<String>,
    pub confusion: ConfusionMatrix,
    pub per_task: Vec<TaskRecord>,
}

impl EvaluationReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn confusion_csv(&self) -> String {
        self.confusion.to_csv(&self.agent_names)
    }

    /// Per-task rows as CSV.
    pub fn per_task_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![
            "task_id".to_string(),
            "domain".into(),
            "oracle_agent".into(),
            "selected_agent".into(),
            "quality".into(),
            "completeness".into(),
            "relevance".into(),
            "confidence".into(),
            "label".into(),
        ];
        header.extend(self.agent_names.iter().map(|n| format!("p_{n}")));
        w.write_record(&header).map_err(|e| Error::Parse(e.to_string()))?;
        for r in &self.per_task {
            let mut row = vec![
                r.task_id.to_string(),
                r.domain.to_string(),
                r.oracle_agent.to_string(),
                r.selected_agent.to_string(),
                r.quality.to_string(),
                r.completeness.to_string(),
                r.relevance.to_string(),
                r.confidence.to_string(),
                r.label.to_string(),
            ];
            row.extend(r.distribution.iter().map(f64::to_string));
            w.write_record(&row).map_err(|e| Error::Parse(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("utf-8"))
    }
}

/// Histories and static-best calibration from a warmup sample.
#[derive(Clone, Debug)]
pub struct Warmup<T: Scalar = f64> {
    pub histories: Vec<HistoryWindow<T>>,
    /// Mean fuzzy quality of every agent over the warmup tasks.
    pub mean_quality: Vec<f64>,
    pub static_best: usize,
    pub n_tasks: usize,
}

/// Evaluates every agent on `n_tasks` warmup tasks; the oracle agent's outcome
/// advances the histories.
pub fn warmup<T: Scalar>(sim: &Simulation<T>, n_tasks: usize, seed: u64) -> Result<Warmup<T>> {
    if n_tasks == 0 {
        return Err(Error::InvalidArgument("warmup needs at least one task".into()));
    }
    let mut histories = sim.empty_histories()?;
    let mut sums = vec![0.0; sim.n_agents()];
    let mut stream = TaskStream::new(seed, split::WARMUP);
    for _ in 0..n_tasks {
        let task: Task<T> = stream.next_task(sim.env.config());
        let label = oracle_label(&task, sim, None)?;
        for (s, q) in sums.iter_mut().zip(&label.qualities) {
            *s += q.as_f64();
        }
        histories[label.best_agent].push(&label.executions[label.best_agent].scores);
    }
    let mean_quality: Vec<f64> = sums.iter().map(|s| s / n_tasks as f64).collect();
    let static_best = argmax(&mean_quality).expect("at least two agents");
    Ok(Warmup {
        histories,
        mean_quality,
        static_best,
        n_tasks,
    })
}

/// Runs `strategy` over `n_tasks` evaluation tasks starting from a copy of `histories`.
pub fn evaluate<T: Scalar>(
    strategy: &mut dyn Strategy<T>,
    sim: &Simulation<T>,
    histories: &[HistoryWindow<T>],
    n_tasks: usize,
    eval_seed: u64,
) -> Result<EvaluationReport> {
    evaluate_from(strategy, sim, histories, n_tasks, eval_seed, split::EVAL)
}

/// [`evaluate`] over the task-id range starting at `first_id`.
pub fn evaluate_from<T: Scalar>(
    strategy: &mut dyn Strategy<T>,
    sim: &Simulation<T>,
    histories: &[HistoryWindow<T>],
    n_tasks: usize,
    eval_seed: u64,
    first_id: u64,
) -> Result<EvaluationReport> {
    if n_tasks < 1 {
        return Err(Error::InvalidArgument("n_tasks must be at least 1".into()));
    }
    let mut histories = histories.to_vec();
    let mut confusion = ConfusionMatrix::new(sim.n_agents());
    let mut per_task = Vec::with_capacity(n_tasks);
    let mut stream = TaskStream::new(eval_seed, first_id);
    for _ in 0..n_tasks {
        let task: Task<T> = stream.next_task(sim.env.config());
        let label = oracle_label(&task, sim, None)?;
        let decision = strategy.select(&task, &histories)?;
        let selected = decision.chosen_agent;
        if selected >= sim.n_agents() {
            return Err(Error::InvalidArgument(format!("strategy selected unknown agent {selected}")));
        }
        let scores = label.executions[selected].scores;
        histories[selected].push(&scores);
        confusion.record(label.best_agent, selected);
        per_task.push(TaskRecord {
            task_id: task.id,
            domain: task.domain,
            oracle_agent: label.best_agent,
            selected_agent: selected,
            quality: scores.quality.as_f64(),
            completeness: scores.completeness.as_f64(),
            relevance: scores.relevance.as_f64(),
            confidence: scores.confidence.as_f64(),
            label: scores.label,
            distribution: decision.distribution.iter().map(|p| p.as_f64()).collect(),
            predicted_confidence: decision.predicted_confidence.map(Scalar::as_f64),
        });
    }
    let average_quality = per_task.iter().map(|r| r.quality).sum::<f64>() / n_tasks as f64;
    Ok(EvaluationReport {
        strategy: strategy.name(),
        n_tasks,
        selection_accuracy: confusion.accuracy(),
        average_quality,
        agent_names: sim.agent_names(),
        confusion,
        per_task,
    })
}

/// Side-by-side results of several strategies over the same task sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub reports: Vec<EvaluationReport>,
}

impl Comparison {
    pub fn report(&self, strategy: &str) -> Option<&EvaluationReport> {
        self.reports.iter().find(|r| r.strategy == strategy)
    }

    /// `strategy,average_quality,selection_accuracy,n_tasks`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("strategy,average_quality,selection_accuracy,n_tasks\n");
        for r in &self.reports {
            writeln!(out, "{},{},{},{}", r.strategy, r.average_quality, r.selection_accuracy, r.n_tasks).unwrap();
        }
        out
    }

    pub fn render_text(&self) -> String {
        let mut out = format!("{:<14}{:>18}{:>20}\n", "Strategy", "Average Quality", "Selection Accuracy");
        for r in &self.reports {
            writeln!(out, "{:<14}{:>18.3}{:>20.3}", r.strategy, r.average_quality, r.selection_accuracy).unwrap();
        }
        out
    }
}

/// Evaluates each strategy on the identical task sequence, each from its own
/// copy of `histories`.
pub fn compare<T: Scalar>(
    strategies: &mut [Box<dyn Strategy<T>>],
    sim: &Simulation<T>,
    histories: &[HistoryWindow<T>],
    n_tasks: usize,
    eval_seed: u64,
) -> Result<Comparison> {
    if strategies.is_empty() {
        return Err(Error::InvalidArgument("no strategies to compare".into()));
    }
    let mut seen = HashSet::new();
    for s in strategies.iter() {
        if !seen.insert(s.name()) {
            return Err(Error::InvalidArgument(format!("duplicate strategy `{}`", s.name())));
        }
    }
    let reports = strategies
        .iter_mut()
        .map(|s| evaluate(s.as_mut(), sim, histories, n_tasks, eval_seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(Comparison { reports })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envsim::EnvConfig;
    use crate::fuzzy::FuzzyEvaluator;
    use crate::orchestrator::{OracleStrategy, RandomStrategy, RoundRobinStrategy, StaticBestStrategy};

    fn sim() -> Simulation {
        Simulation::new(EnvConfig::default(), FuzzyEvaluator::default(), 10).unwrap()
    }

    fn check_identities(r: &EvaluationReport) {
        assert_eq!(r.confusion.total(), r.n_tasks as u64);
        assert!((r.selection_accuracy - r.confusion.trace() as f64 / r.n_tasks as f64).abs() < 1e-12);
        let mean = r.per_task.iter().map(|t| t.quality).sum::<f64>() / r.n_tasks as f64;
        assert!((r.average_quality - mean).abs() < 1e-12);
    }

    #[test]
    fn oracle_strategy_is_perfect() {
        let sim = sim();
        let h = sim.empty_histories().unwrap();
        let mut s = OracleStrategy::new(sim.clone());
        let r = evaluate(&mut s, &sim, &h, 120, 3).unwrap();
        assert_eq!(r.selection_accuracy, 1.0);
        assert_eq!(r.confusion.off_diagonal(), 0);
        check_identities(&r);
        let csv = r.confusion_csv();
        assert!(csv.ends_with("off_diagonal,0\n"));
    }

    #[test]
    fn round_robin_spreads_selections_evenly() {
        let sim = sim();
        let h = sim.empty_histories().unwrap();
        let r = evaluate(&mut RoundRobinStrategy::new(3), &sim, &h, 100, 3).unwrap();
        for a in 0..3 {
            let col = r.confusion.column_total(a);
            assert!(col == 33 || col == 34, "column {a}: {col}");
        }
        check_identities(&r);
    }

    #[test]
    fn random_shares_are_near_uniform() {
        let sim = sim();
        let h = sim.empty_histories().unwrap();
        let r = evaluate(&mut RandomStrategy::new(3, 17), &sim, &h, 1200, 5).unwrap();
        for a in 0..3 {
            let share = r.confusion.column_total(a) as f64 / 1200.0;
            assert!((share - 1.0 / 3.0).abs() < 0.05, "agent {a}: {share}");
        }
        check_identities(&r);
    }

    #[test]
    fn rejects_zero_tasks_and_uncalibrated_static_best() {
        let sim = sim();
        let h = sim.empty_histories().unwrap();
        assert!(evaluate(&mut RoundRobinStrategy::new(3), &sim, &h, 0, 1).is_err());
        assert!(evaluate(&mut StaticBestStrategy::uncalibrated(3), &sim, &h, 5, 1).is_err());
    }

    #[test]
    fn compare_uses_identical_tasks_and_rejects_duplicates() {
        let sim = sim();
        let w = warmup(&sim, 100, 9).unwrap();
        let mut strategies: Vec<Box<dyn Strategy<f64>>> = vec![
            Box::new(RandomStrategy::new(3, 1)),
            Box::new(RoundRobinStrategy::new(3)),
            Box::new(StaticBestStrategy::calibrated(3, w.static_best).unwrap()),
        ];
        let cmp = compare(&mut strategies, &sim, &w.histories, 60, 4).unwrap();
        assert_eq!(cmp.reports.len(), 3);
        let ids = |r: &EvaluationReport| r.per_task.iter().map(|t| (t.task_id, t.oracle_agent)).collect::<Vec<_>>();
        assert_eq!(ids(&cmp.reports[0]), ids(&cmp.reports[1]));
        assert_eq!(ids(&cmp.reports[1]), ids(&cmp.reports[2]));
        assert!(cmp.to_csv().starts_with("strategy,average_quality,selection_accuracy,n_tasks\n"));

        let mut dup: Vec<Box<dyn Strategy<f64>>> =
            vec![Box::new(RoundRobinStrategy::new(3)), Box::new(RoundRobinStrategy::new(3))];
        assert!(compare(&mut dup, &sim, &w.histories, 10, 4).is_err());
    }

    #[test]
    fn single_strategy_comparison_equals_solo_report() {
        let sim = sim();
        let h = sim.empty_histories().unwrap();
        let solo = evaluate(&mut RoundRobinStrategy::new(3), &sim, &h, 30, 2).unwrap();
        let mut one: Vec<Box<dyn Strategy<f64>>> = vec![Box::new(RoundRobinStrategy::new(3))];
        let cmp = compare(&mut one, &sim, &h, 30, 2).unwrap();
        assert_eq!(cmp.reports, vec![solo]);
    }

    #[test]
    fn static_best_is_a_single_agent() {
        let sim = sim();
        let w = warmup(&sim, 100, 9).unwrap();
        assert_eq!(w.mean_quality.len(), 3);
        assert_eq!(argmax(&w.mean_quality), Some(w.static_best));
        let mut s = StaticBestStrategy::calibrated(3, w.static_best).unwrap();
        let r = evaluate(&mut s, &sim, &w.histories, 50, 1).unwrap();
        assert!(r.per_task.iter().all(|t| t.selected_agent == w.static_best));
    }

    #[test]
    fn confusion_csv_round_trips() {
        let names: Vec<String> = ["EmergencyBot", "DocumentBot", "GeneralistBot"].map(String::from).to_vec();
        let m = ConfusionMatrix::from_counts(vec![vec![212, 12, 0], vec![13, 46, 0], vec![11, 5, 1]]).unwrap();
        let csv = m.to_csv(&names);
        let (parsed_names, parsed) = ConfusionMatrix::from_csv(&csv).unwrap();
        assert_eq!(parsed_names, names);
        assert_eq!(parsed, m);
        assert_eq!(m.trace(), 259);
        assert_eq!(m.off_diagonal(), 41);
        assert!(ConfusionMatrix::from_csv(&csv.replace("trace,259", "trace,1")).is_err());
        assert!(m.render_text(&names).contains("off-diagonal 41"));
    }

    #[test]
    fn report_json_is_stable() {
        let sim = sim();
        let h = sim.empty_histories().unwrap();
        let a = evaluate(&mut RandomStrategy::new(3, 2), &sim, &h, 20, 2).unwrap();
        let b = evaluate(&mut RandomStrategy::new(3, 2), &sim, &h, 20, 2).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let back: EvaluationReport = serde_json::from_str(&a.to_json()).unwrap();
        assert_eq!(back, a);
        assert!(a.per_task_csv().unwrap().lines().count() == 21);
    }
}
