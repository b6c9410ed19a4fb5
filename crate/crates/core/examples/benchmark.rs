//! Trains the default model and prints the strategy comparison.

use std::time::Instant;

use orchestra::evalreport::{compare, warmup};
use orchestra::orchestrator::{NeuralStrategy, RandomStrategy, RoundRobinStrategy, StaticBestStrategy, Strategy};
use orchestra::training::{train, ModelConfig, TrainConfig};
use orchestra::{EnvConfig, FuzzyEvaluator, Simulation};

fn main() -> orchestra::Result<()> {
    let sim = Simulation::new(EnvConfig::default(), FuzzyEvaluator::default(), 10)?;
    let start = Instant::now();
    let model = ModelConfig::default().build(&sim)?;
    let (model, records) = train(&sim, model, &TrainConfig::default())?;
    let (first, last) = (records[0], records[records.len() - 1]);
    println!(
        "trained in {:.1?}: ce {:.4} -> {:.4}, conf {:.4} -> {:.4}",
        start.elapsed(),
        first.cross_entropy_loss,
        last.cross_entropy_loss,
        first.confidence_loss,
        last.confidence_loss
    );
    let warm = warmup(&sim, 100, 1)?;
    let n = sim.n_agents();
    let mut strategies: Vec<Box<dyn Strategy<f64>>> = vec![
        Box::new(NeuralStrategy::new(model)),
        Box::new(RandomStrategy::new(n, 1)),
        Box::new(RoundRobinStrategy::new(n)),
        Box::new(StaticBestStrategy::calibrated(n, warm.static_best)?),
    ];
    let cmp = compare(&mut strategies, &sim, &warm.histories, 300, 1)?;
    print!("{}", cmp.render_text());
    let neural = &cmp.reports[0];
    print!("{}", neural.confusion.render_text(&neural.agent_names));
    Ok(())
}
