use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use berbench::data::GaussianMixtureSpec;
use berbench::harness::{
    emit_plot_data, read_trials, run_experiment, score_table, write_synthetic, ExperimentConfig, ScoreRow, PLOT_FILE,
    TRIALS_FILE,
};
use berbench::ClassCount;

#[derive(Parser)]
#[command(name = "berbench", version, about = "Benchmark Bayes error estimators under controlled label noise")]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the master seed of the configuration (synth: sampling seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, default_value = "results")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (estimator, noise level, repeat) trial and write trials.csv.
    Run,
    /// Score a trial table into scores.csv, best_L.csv and best_U.csv.
    Score(TableArgs),
    /// Write mean, std and quantile curves plus the envelope as JSON.
    PlotData {
        #[command(flatten)]
        table: TableArgs,
        /// Output file; defaults to plot_data.json in the output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Sample a Gaussian mixture into train.bin, eval.bin and oracle.json.
    Synth(SynthArgs),
}

#[derive(Args)]
struct TableArgs {
    /// Trial table; defaults to trials.csv in the output directory.
    #[arg(long)]
    trials: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 2)]
    classes: usize,
    #[arg(long, default_value_t = 1)]
    dim: usize,
    /// Class mean as comma-separated coordinates; repeat once per class.
    /// Defaults to class `y` centered at `2y` on the first axis.
    #[arg(long = "mean")]
    means: Vec<String>,
    #[arg(long, default_value_t = 1.0)]
    std: f64,
    /// Class prior; repeat once per class. Defaults to uniform.
    #[arg(long = "prior")]
    priors: Vec<f64>,
    #[arg(long, default_value_t = 5000)]
    train_samples: usize,
    #[arg(long, default_value_t = 5000)]
    eval_samples: usize,
}

fn parse_mean(text: &str) -> Result<Vec<f64>> {
    text.split(',').map(|v| v.trim().parse::<f64>().with_context(|| format!("invalid mean coordinate {v:?}"))).collect()
}

impl SynthArgs {
    fn to_spec(&self) -> Result<GaussianMixtureSpec> {
        let c = self.classes;
        let means = if self.means.is_empty() {
            (0..c)
                .map(|y| {
                    let mut m = vec![0.0; self.dim];
                    if let Some(first) = m.first_mut() {
                        *first = 2.0 * y as f64;
                    }
                    m
                })
                .collect()
        } else {
            self.means.iter().map(|m| parse_mean(m)).collect::<Result<Vec<_>>>()?
        };
        let priors = if self.priors.is_empty() { vec![1.0 / c as f64; c] } else { self.priors.clone() };
        Ok(GaussianMixtureSpec {
            num_classes: ClassCount::new(c)?,
            dim: self.dim,
            means,
            std: self.std,
            priors,
            train_samples: self.train_samples,
            eval_samples: self.eval_samples,
        })
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let Some(path) = &cli.config else {
        bail!("--config is required for this command");
    };
    let mut config = ExperimentConfig::from_path(path)?;
    if let Some(seed) = cli.seed {
        config.master_seed = seed;
    }
    Ok(config)
}

fn trials_path(cli: &Cli, table: &TableArgs) -> PathBuf {
    table.trials.clone().unwrap_or_else(|| cli.out_dir.join(TRIALS_FILE))
}

fn print_best(title: &str, rows: &[ScoreRow]) {
    println!("{title}");
    for r in rows {
        println!(
            "  {:<18} {:<28} L = {:.4} (+/- {:.4})  U = {:.4} (+/- {:.4})",
            r.method, r.variant, r.l, r.l_std, r.u, r.u_std
        );
    }
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run => {
            let config = load_config(cli)?;
            let summary = run_experiment(&config, &cli.out_dir)?;
            println!(
                "{} trials: {} ok, {} timeout, {} oom, {} failed -> {}",
                summary.total(),
                summary.ok,
                summary.timeouts,
                summary.ooms,
                summary.failed,
                summary.trials_path.display()
            );
        }
        Command::Score(table) => {
            let config = load_config(cli)?;
            let path = trials_path(cli, table);
            let rows = read_trials(&path)?;
            let outcome = score_table(&config, &rows, &cli.out_dir)?;
            if outcome.excluded_rows > 0 {
                eprintln!("excluded {} rows without an ok status", outcome.excluded_rows);
            }
            for (key, reason) in &outcome.rejected {
                eprintln!("rejected {}[{}]: {reason}", key.method, key.variant);
            }
            print_best("best L per method", &outcome.best_l);
            print_best("best U per method", &outcome.best_u);
        }
        Command::PlotData { table, output } => {
            let config = load_config(cli)?;
            let rows = read_trials(&trials_path(cli, table))?;
            let output = output.clone().unwrap_or_else(|| cli.out_dir.join(PLOT_FILE));
            let series = emit_plot_data(&config, &rows, &output)?;
            println!("{} series -> {}", series.len(), output.display());
        }
        Command::Synth(args) => {
            let spec = args.to_spec()?;
            let oracle = write_synthetic(&spec, cli.seed.unwrap_or(0), &cli.out_dir)?;
            println!("true_ber = {} ({:?}) -> {}", oracle.true_ber.get(), oracle.method, cli.out_dir.display());
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    run(&cli)
}
