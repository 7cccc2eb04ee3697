use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use duelbandit::bench::{aggregate, emit, run_compare, run_seeds, RunConfig};
use duelbandit::environments::TestFunction;
use duelbandit::policies::PolicyKind;
use duelbandit::Result;

/// Run kernelized logistic and dueling bandit benchmarks on grid test functions.
#[derive(Debug, Parser)]
#[command(name = "bench", version)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run several policies (and environments) and print a regret table.
    Compare {
        /// Comma-separated policy names.
        #[arg(long, value_delimiter = ',')]
        policies: Option<Vec<String>>,
        /// Comma-separated environment names, or `all`.
        #[arg(long, value_delimiter = ',')]
        envs: Option<Vec<String>>,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Config file of `key = value` lines; flags given here override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// ackley, branin, eggholder, hoelder, matyas, michalewicz, rosenbrock
    #[arg(long, global = true)]
    env: Option<String>,
    /// maxminlcb, maxinp, rucb, multisbm, doubler, ids, lgp-ucb, ind-ucb
    #[arg(long, global = true)]
    policy: Option<String>,
    #[arg(long, global = true)]
    horizon: Option<usize>,
    /// `0..19` (inclusive) or a comma-separated list.
    #[arg(long, global = true)]
    seeds: Option<String>,
    #[arg(long, global = true)]
    delta: Option<f64>,
    /// `fixed:<value>` or `theoretical`.
    #[arg(long, global = true)]
    beta: Option<String>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// rbf, matern12, matern32, matern52, linear
    #[arg(long, global = true)]
    kernel: Option<String>,
    #[arg(long, global = true)]
    lengthscale: Option<f64>,
    #[arg(long, global = true)]
    variance: Option<f64>,
    /// RKHS-norm bound B.
    #[arg(long, global = true)]
    bound: Option<f64>,
    #[arg(long, global = true)]
    restrict_to_maximizers: Option<bool>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Write the resolved config to this file before running.
    #[arg(long, global = true)]
    save_config: Option<PathBuf>,
}

impl RunArgs {
    fn resolve(&self, mut config: RunConfig) -> Result<RunConfig> {
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| duelbandit::Error::Io { path: path.clone(), source: e })?;
            config.apply_kv(&text)?;
        }
        let overrides: [(&str, Option<String>); 13] = [
            ("env", self.env.clone()),
            ("policy", self.policy.clone()),
            ("horizon", self.horizon.map(|v| v.to_string())),
            ("seeds", self.seeds.clone()),
            ("delta", self.delta.map(|v| v.to_string())),
            ("beta", self.beta.clone()),
            ("lambda", self.lambda.map(|v| v.to_string())),
            ("kernel", self.kernel.clone()),
            ("lengthscale", self.lengthscale.map(|v| v.to_string())),
            ("variance", self.variance.map(|v| v.to_string())),
            ("bound", self.bound.map(|v| v.to_string())),
            ("restrict_to_maximizers", self.restrict_to_maximizers.map(|v| v.to_string())),
            ("out_dir", self.out.as_ref().map(|p| p.display().to_string())),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                config.set(key, &v)?;
            }
        }
        config.validate()?;
        if let Some(path) = &self.save_config {
            config.save(path)?;
        }
        Ok(config)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        None => {
            let config = cli.run.resolve(RunConfig::default())?;
            let records = run_seeds(&config)?;
            let summary = aggregate(&records)?;
            emit(&records, &summary, &config, &config.out_dir)?;
            println!(
                "{} on {}: cumulative regret {:.2} ± {:.2} over {} seed(s), T = {}",
                config.policy.title(),
                config.env.title(),
                summary.mean_cum_regret,
                summary.std_err,
                summary.n_seeds,
                config.horizon
            );
        }
        Some(Command::Compare { policies, envs }) => {
            // benchmark preset: no restriction to plausible maximizers
            let preset = RunConfig {
                restrict_to_maximizers: false,
                ..RunConfig::default()
            };
            let config = cli.run.resolve(preset)?;
            let policies = match policies {
                Some(names) => names
                    .iter()
                    .map(|n| PolicyKind::parse(n))
                    .collect::<Result<Vec<_>>>()?,
                None => PolicyKind::ALL
                    .into_iter()
                    .filter(|p| p.feedback_mode() == config.policy.feedback_mode())
                    .collect(),
            };
            let envs = match envs {
                Some(names) if names.iter().any(|n| n == "all") => TestFunction::ALL.to_vec(),
                Some(names) => names
                    .iter()
                    .map(|n| TestFunction::parse(n))
                    .collect::<Result<Vec<_>>>()?,
                None => vec![config.env],
            };
            let (_, table) = run_compare(&config, &envs, &policies)?;
            print!("{table}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
