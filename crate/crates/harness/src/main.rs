use std::path::PathBuf;
use std::process::ExitCode;

use autoal_harness::output::{read_curves, read_strategy_scores};
use autoal_harness::render::{heatmap_svg, plot_svg};
use autoal_harness::{runner, ExperimentConfig, HarnessError, VERSION};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "autoal", version, about = "Active-learning strategy search benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one method over every seed.
    Run(Settings),
    /// Run every listed method over every seed and aggregate.
    Compare(Settings),
    /// Draw learning curves from compare.csv or rounds.csv.
    Plot { input: PathBuf, output: PathBuf },
    /// Draw the per-round strategy heatmap from strategy_scores.csv.
    Heatmap { input: PathBuf, output: PathBuf },
    /// Resolve and check a configuration, print it, and exit.
    ValidateConfig(Settings),
}

#[derive(Args)]
struct Settings {
    /// Flat `key = value` file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// blobs, moons, idx or csv.
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    data_path: Option<String>,
    #[arg(long)]
    labels_path: Option<String>,
    /// Strategy id, autoal or random.
    #[arg(long)]
    method: Option<String>,
    /// Comma-separated methods for `compare`.
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    rounds: Option<String>,
    #[arg(long)]
    budget: Option<String>,
    #[arg(long)]
    seed_size: Option<String>,
    /// Comma-separated run seeds.
    #[arg(long)]
    seeds: Option<String>,
    /// Comma-separated candidate strategies for SearchNet.
    #[arg(long)]
    candidates: Option<String>,
    /// binary or continuous.
    #[arg(long)]
    score_mode: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    lambda_bar: Option<String>,
    #[arg(long)]
    warmup_epochs: Option<String>,
    #[arg(long)]
    joint_epochs: Option<String>,
    #[arg(long)]
    batch_size: Option<String>,
    #[arg(long)]
    out: Option<String>,
    /// Any other configuration key, as key=value. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Settings {
    fn resolve(&self) -> Result<ExperimentConfig, HarnessError> {
        let mut cfg = ExperimentConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        let flags = [
            ("dataset", &self.dataset),
            ("data_path", &self.data_path),
            ("labels_path", &self.labels_path),
            ("method", &self.method),
            ("methods", &self.methods),
            ("rounds", &self.rounds),
            ("budget", &self.budget),
            ("seed_size", &self.seed_size),
            ("seeds", &self.seeds),
            ("candidates", &self.candidates),
            ("score_mode", &self.score_mode),
            ("lambda", &self.lambda),
            ("lambda_bar", &self.lambda_bar),
            ("warmup_epochs", &self.warmup_epochs),
            ("joint_epochs", &self.joint_epochs),
            ("batch_size", &self.batch_size),
            ("out", &self.out),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| HarnessError::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }
}

fn execute(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run(s) => {
            let cfg = s.resolve()?;
            runner::run(&cfg)?;
            println!("wrote {}", cfg.out.display());
        }
        Command::Compare(s) => {
            let cfg = s.resolve()?;
            runner::compare(&cfg)?;
            println!("wrote {}", cfg.out.display());
        }
        Command::Plot { input, output } => {
            std::fs::write(&output, plot_svg(&read_curves(&input)?)?)?;
        }
        Command::Heatmap { input, output } => {
            std::fs::write(&output, heatmap_svg(&read_strategy_scores(&input)?)?)?;
        }
        Command::ValidateConfig(s) => {
            let cfg = s.resolve()?;
            let mut methods = cfg.methods.clone();
            methods.push(cfg.method);
            runner::check(&cfg, &methods)?;
            print!("{}", cfg.manifest());
            println!("ok");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    log::debug!("{VERSION}");
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
