use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use oneclass::dataset::LabelColumn;
use oneclass::descriptors::DescriptorKind;
use oneclass::harness::{
    analyze, read_jsonl, read_records, report_runtime, run_defaults, run_experiment, runtime_csv, write_report,
    AnalysisOptions, DefaultRecord, ExperimentConfig, TimingRecord, RECORDS_FILE, TIMINGS_FILE,
};
use oneclass::optim::OptimiserKind;

#[derive(Parser)]
#[command(name = "oneclass", version, about = "One-class descriptor hyperparameter experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the (problem, fold, descriptor, optimiser) grid, resuming completed units.
    Run(RunArgs),
    /// Evaluate default hyperparameters only.
    Defaults(RunArgs),
    /// Aggregate records into curves, pairwise tests and tables.
    Analyze(AnalyzeArgs),
    /// Mean wall-clock per evaluation count per descriptor.
    RuntimeReport(RuntimeArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML or JSON config; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    descriptors: Option<Vec<DescriptorKind>>,
    #[arg(long, value_delimiter = ',')]
    optimisers: Option<Vec<OptimiserKind>>,
    /// Unique evaluations per search.
    #[arg(long)]
    budget: Option<usize>,
    /// Proposals per search, cached or not.
    #[arg(long)]
    proposal_cap: Option<usize>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Name of the label column; the last column when omitted.
    #[arg(long)]
    label_column: Option<String>,
    #[arg(long)]
    min_class_size: Option<usize>,
}

impl RunArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = &self.data_dir {
            c.data_dir = v.clone();
        }
        if let Some(v) = &self.descriptors {
            c.descriptors = v.clone();
        }
        if let Some(v) = &self.optimisers {
            c.optimisers = v.clone();
        }
        if let Some(v) = self.budget {
            c.max_evaluations = v;
        }
        if let Some(v) = self.proposal_cap {
            c.max_proposals = v;
        }
        if let Some(v) = self.folds {
            c.outer_folds = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = &self.out {
            c.out_dir = v.clone();
        }
        if let Some(v) = &self.label_column {
            c.label_column = LabelColumn::Name(v.clone());
        }
        if let Some(v) = self.min_class_size {
            c.min_class_size = v;
        }
        Ok(c)
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    /// records.jsonl, or the run directory holding it.
    #[arg(long)]
    records: PathBuf,
    /// defaults.jsonl to compare against instead of the defaults embedded in the records.
    #[arg(long)]
    baseline: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    optimiser: Option<OptimiserKind>,
    /// Weight problems uniformly instead of per dataset.
    #[arg(long)]
    uniform_weights: bool,
}

#[derive(Args)]
struct RuntimeArgs {
    /// timings.jsonl, or the run directory holding it.
    #[arg(long)]
    records: PathBuf,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn resolve(path: &Path, file: &str) -> PathBuf {
    if path.is_dir() {
        path.join(file)
    } else {
        path.to_path_buf()
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// `Ok(false)` when the command finished but some units failed.
fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run(args) => {
            let config = args.config()?;
            let summary = run_experiment(&config)?;
            println!(
                "{} units completed, {} skipped as already done, {} failed",
                summary.completed, summary.skipped, summary.failed
            );
            Ok(summary.success())
        }
        Command::Defaults(args) => {
            let config = args.config()?;
            let (records, failures) = run_defaults(&config)?;
            for f in &failures {
                eprintln!("failed {}: {}", f.key, f.message);
            }
            println!("{} default evaluations, {} failed", records.len(), failures.len());
            Ok(failures.is_empty())
        }
        Command::Analyze(args) => {
            let path = resolve(&args.records, RECORDS_FILE);
            let records = read_records(&path)?;
            let baseline: Option<Vec<DefaultRecord>> = args
                .baseline
                .as_deref()
                .map(read_jsonl)
                .transpose()
                .context("reading baseline")?;
            let report = analyze(
                &records,
                baseline.as_deref(),
                &AnalysisOptions {
                    optimiser: args.optimiser,
                    weighting: !args.uniform_weights,
                },
            )?;
            write_report(&report, &args.out)?;
            print!("{}", report.pairwise_markdown());
            Ok(true)
        }
        Command::RuntimeReport(args) => {
            let timings: Vec<TimingRecord> = read_jsonl(resolve(&args.records, TIMINGS_FILE))?;
            let csv = runtime_csv(&report_runtime(&timings));
            match args.out {
                Some(path) => std::fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{csv}"),
            }
            Ok(true)
        }
    }
}
