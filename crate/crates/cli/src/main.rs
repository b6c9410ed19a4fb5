use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use orchestra::StrategyKind;
use orchestra_cli::{cmd_evaluate, cmd_gridsearch, cmd_sensitivity, cmd_serve, cmd_train, CliError, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "orchestra", version, about = "Neural agent orchestration experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the selector and write a checkpoint plus per-iteration losses.
    Train(Common),
    /// Compare strategies on held-out tasks.
    Evaluate(Common),
    /// Rank hyperparameter combinations by validation accuracy.
    Gridsearch {
        #[command(flatten)]
        common: Common,
        /// TOML file with hidden_dims, dropout, learning_rate, batch_size, confidence_weight lists.
        #[arg(long)]
        space: Option<PathBuf>,
    },
    /// Selection accuracy under alternative fuzzy weight triples.
    Sensitivity {
        #[command(flatten)]
        common: Common,
        /// One `completeness,relevance,confidence` triple per line.
        #[arg(long)]
        weights: Option<PathBuf>,
    },
    /// Run the human-in-the-loop HTTP API.
    Serve(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Environment seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    confidence_weight: Option<f64>,
    /// Repeat or comma-separate: neural, random, round-robin, static-best, oracle.
    #[arg(long = "strategy", value_delimiter = ',')]
    strategies: Vec<StrategyKind>,
    #[arg(long)]
    n_tasks: Option<usize>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    address: Option<String>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let overrides = Overrides {
            seed: self.seed,
            iterations: self.iterations,
            batch_size: self.batch_size,
            learning_rate: self.lr,
            confidence_weight: self.confidence_weight,
            strategies: (!self.strategies.is_empty()).then(|| self.strategies.clone()),
            n_tasks: self.n_tasks,
            jobs: self.jobs,
            out_dir: self.out_dir.clone(),
            address: self.address.clone(),
            checkpoint: self.checkpoint.clone(),
        };
        RunConfig::resolve(self.config.as_deref(), &overrides)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(c) => {
            let cfg = c.resolve()?;
            let out = cmd_train(&cfg)?;
            match (out.records.first(), out.records.last()) {
                (Some(first), Some(last)) => println!(
                    "{} iterations: ce {:.4} -> {:.4}, confidence {:.4} -> {:.4}",
                    out.records.len(),
                    first.cross_entropy_loss,
                    last.cross_entropy_loss,
                    first.confidence_loss,
                    last.confidence_loss
                ),
                _ => println!("0 iterations"),
            }
            println!("checkpoint {}", out.checkpoint.display());
        }
        Command::Evaluate(c) => {
            let cmp = cmd_evaluate(&c.resolve()?)?;
            print!("{}", cmp.render_text());
            for r in &cmp.reports {
                println!("\n{}", r.strategy);
                print!("{}", r.confusion.render_text(&r.agent_names));
            }
        }
        Command::Gridsearch { common, space } => {
            let results = cmd_gridsearch(&common.resolve()?, space.as_deref())?;
            for r in results.iter().take(5) {
                println!(
                    "{:>3}  {:<14} dropout {:<4} lr {:<6} batch {:<4} λ {:<4} acc {:.3}",
                    r.rank,
                    r.point.hidden_label(),
                    r.point.dropout,
                    r.point.learning_rate,
                    r.point.batch_size,
                    r.point.confidence_weight,
                    r.accuracy
                );
            }
        }
        Command::Sensitivity { common, weights } => {
            let out = cmd_sensitivity(&common.resolve()?, weights.as_deref())?;
            for r in &out.rows {
                let w = r.weights;
                println!(
                    "({}, {}, {})  accuracy {:.3}  delta {:+.3}",
                    w.completeness, w.relevance, w.confidence, r.accuracy, r.delta
                );
            }
            for (line, err) in &out.rejected {
                eprintln!("rejected line {line}: {err}");
            }
        }
        Command::Serve(c) => cmd_serve(&c.resolve()?)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let first = e.to_string().lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
            let err = CliError::Usage(first);
            eprintln!("{}", err.one_line());
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.one_line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
