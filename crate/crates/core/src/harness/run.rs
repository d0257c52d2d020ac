use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::Instant;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::seeds::derive_seed;
use crate::dataset::{derive_problems, load_csv, stratified_kfold, FoldData, LoadOptions, OneClassProblem};
use crate::descriptors::{DescriptorKind, DescriptorSpec, FittedModel};
use crate::error::{Error, Result};
use crate::optim::{run_search, OptimiserKind, SearchResult, StopReason};
use crate::validation::{masked_auroc, ObjectiveHandle};

pub const RECORDS_FILE: &str = "records.jsonl";
pub const TIMINGS_FILE: &str = "timings.jsonl";
pub const FAILURES_FILE: &str = "failures.jsonl";
pub const DEFAULTS_FILE: &str = "defaults.jsonl";
pub const LOG_DIR: &str = "logs";

/// State of the search after `evaluations` unique evaluations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationPoint {
    pub evaluations: usize,
    pub params: Vec<f64>,
    pub validation_auroc: f64,
    pub test_auroc: f64,
}

/// Outcome of one (problem, fold, descriptor, optimiser) unit. Carries no
/// timing so reruns serialise identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub problem: String,
    pub dataset: String,
    pub target: String,
    pub fold: usize,
    pub descriptor: DescriptorKind,
    pub optimiser: OptimiserKind,
    pub n_train_targets: usize,
    pub n_train_others: usize,
    pub n_test_targets: usize,
    pub n_test_others: usize,
    pub param_names: Vec<String>,
    pub default_params: Vec<f64>,
    pub default_validation_auroc: f64,
    pub default_test_auroc: f64,
    /// Entry `e - 1` describes the incumbent after `e` evaluations; forward
    /// filled to the budget when the search stopped early.
    pub curve: Vec<EvaluationPoint>,
    pub evaluations_used: usize,
    pub proposals: usize,
    pub stop: StopReason,
}

impl ExperimentRecord {
    pub fn key(&self) -> String {
        unit_key(&self.problem, self.fold, self.descriptor, self.optimiser)
    }

    pub fn final_point(&self) -> &EvaluationPoint {
        self.curve.last().expect("curve is never empty")
    }

    /// Incumbent after `e` evaluations, forward filled past the curve end.
    pub fn at(&self, e: usize) -> &EvaluationPoint {
        &self.curve[e.clamp(1, self.curve.len()) - 1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub problem: String,
    pub fold: usize,
    pub descriptor: DescriptorKind,
    pub optimiser: OptimiserKind,
    /// Building the shared validation state before the first evaluation.
    pub setup_seconds: f64,
    /// One entry per unique evaluation.
    pub eval_seconds: Vec<f64>,
    pub search_seconds: f64,
    pub refit_seconds: f64,
}

impl TimingRecord {
    pub fn key(&self) -> String {
        unit_key(&self.problem, self.fold, self.descriptor, self.optimiser)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub key: String,
    pub message: String,
}

/// Default hyperparameters on one (problem, fold, descriptor), no search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefaultRecord {
    pub problem: String,
    pub dataset: String,
    pub target: String,
    pub fold: usize,
    pub descriptor: DescriptorKind,
    pub param_names: Vec<String>,
    pub params: Vec<f64>,
    pub validation_auroc: f64,
    pub test_auroc: f64,
}

impl DefaultRecord {
    pub fn key(&self) -> String {
        default_key(&self.problem, self.fold, self.descriptor)
    }
}

pub fn unit_key(problem: &str, fold: usize, descriptor: DescriptorKind, optimiser: OptimiserKind) -> String {
    format!("{problem}|{fold}|{descriptor}|{optimiser}")
}

pub fn default_key(problem: &str, fold: usize, descriptor: DescriptorKind) -> String {
    format!("{problem}|{fold}|{descriptor}")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunSummary {
    pub completed: usize,
    pub skipped: usize,
    pub failed: usize,
}

impl RunSummary {
    pub fn success(&self) -> bool {
        self.failed == 0
    }
}

/// Loads every CSV in the data directory, sorted by file name, and derives
/// its one-class problems.
pub fn load_problems(config: &ExperimentConfig) -> Result<Vec<OneClassProblem>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(&config.data_dir)
        .map_err(|e| Error::io(&config.data_dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no CSV files in {}",
            config.data_dir.display()
        )));
    }
    let options = LoadOptions {
        label_column: config.label_column.clone(),
        missing: config.missing,
    };
    let mut problems = Vec::new();
    for path in paths {
        let dataset = load_csv(&path, &options)?;
        problems.extend(derive_problems(&dataset, config.min_class_size));
    }
    Ok(problems)
}

struct PreparedProblem {
    problem: OneClassProblem,
    folds: Result<Vec<FoldData>>,
}

fn prepare(config: &ExperimentConfig, problems: Vec<OneClassProblem>) -> Vec<PreparedProblem> {
    problems
        .into_iter()
        .map(|problem| {
            let seed = derive_seed(config.seed, &[&problem.id()]);
            let folds = stratified_kfold(&problem, config.outer_folds, seed)
                .map(|splits| splits.iter().map(|s| problem.fold(s)).collect());
            PreparedProblem { problem, folds }
        })
        .collect()
}

fn test_auroc(spec: &DescriptorSpec, fold: &FoldData, targets: &ndarray::Array2<f64>) -> Result<f64> {
    let scores = FittedModel::fit(spec, targets.view())?.score(fold.test.view())?;
    masked_auroc(&scores, &fold.test_is_target)
}

fn inner_seed(config: &ExperimentConfig, problem: &OneClassProblem, fold: usize) -> u64 {
    derive_seed(config.seed, &[&problem.id(), &fold.to_string()])
}

struct UnitOutput {
    record: ExperimentRecord,
    timing: TimingRecord,
    log: SearchResult,
}

fn run_unit(
    config: &ExperimentConfig,
    problem: &OneClassProblem,
    fold_index: usize,
    fold: &FoldData,
    descriptor: DescriptorKind,
    optimiser: OptimiserKind,
) -> Result<UnitOutput> {
    let setup = Instant::now();
    let mut objective = ObjectiveHandle::from_fold(fold, descriptor, inner_seed(config, problem, fold_index))?;
    let setup_seconds = setup.elapsed().as_secs_f64();

    let default_spec = objective.default_spec();
    let default_validation_auroc = objective.evaluate_spec(&default_spec)?;
    let targets = fold.target_train();
    let default_test_auroc = test_auroc(&default_spec, fold, &targets)?;

    let search_seed = derive_seed(
        config.seed,
        &[&problem.id(), &fold_index.to_string(), optimiser.name()],
    );
    let start = objective.default_point();
    let searched = Instant::now();
    let result = run_search(optimiser, &mut objective, config.budget(search_seed), &start)?;
    let search_seconds = searched.elapsed().as_secs_f64();
    if result.incumbents.is_empty() {
        return Err(Error::InvalidInput("search made no evaluations".into()));
    }

    // Refit only when the incumbent changes.
    let refit = Instant::now();
    let mut curve = Vec::with_capacity(config.max_evaluations);
    let mut last: Option<(Vec<f64>, f64)> = None;
    for e in 1..=config.max_evaluations {
        let inc = result.incumbent_at(e).expect("at least one incumbent");
        let test = match &last {
            Some((params, auc)) if *params == inc.params => *auc,
            _ => {
                let spec = DescriptorSpec::from_values(descriptor, &inc.params)?;
                let auc = test_auroc(&spec, fold, &targets)?;
                last = Some((inc.params.clone(), auc));
                auc
            }
        };
        curve.push(EvaluationPoint {
            evaluations: e,
            params: inc.params.clone(),
            validation_auroc: inc.value,
            test_auroc: test,
        });
    }
    let refit_seconds = refit.elapsed().as_secs_f64();

    let n_test_targets = fold.test_is_target.iter().filter(|&&t| t).count();
    let n_train_targets = targets.nrows();
    let record = ExperimentRecord {
        problem: problem.id(),
        dataset: problem.dataset.clone(),
        target: problem.target.clone(),
        fold: fold_index,
        descriptor,
        optimiser,
        n_train_targets,
        n_train_others: fold.train.nrows() - n_train_targets,
        n_test_targets,
        n_test_others: fold.test.nrows() - n_test_targets,
        param_names: objective.space().names.clone(),
        default_params: default_spec.values(),
        default_validation_auroc,
        default_test_auroc,
        curve,
        evaluations_used: result.evaluations(),
        proposals: result.trials.len(),
        stop: result.stop,
    };
    let timing = TimingRecord {
        problem: record.problem.clone(),
        fold: fold_index,
        descriptor,
        optimiser,
        setup_seconds,
        eval_seconds: result.eval_seconds.clone(),
        search_seconds,
        refit_seconds,
    };
    Ok(UnitOutput {
        record,
        timing,
        log: result,
    })
}

/// Reads a JSON-lines file, skipping lines that do not parse (for example a
/// line truncated by a crash). A missing file reads as empty.
pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(path, e)),
    };
    Ok(text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .filter_map(|l| match serde_json::from_str(l) {
            Ok(v) => Some(v),
            Err(e) => {
                log::warn!("{}: skipping unreadable line: {e}", path.display());
                None
            }
        })
        .collect())
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<ExperimentRecord>> {
    read_jsonl(path)
}

fn write_jsonl_sorted<T: Serialize>(path: &Path, items: &BTreeMap<String, T>) -> Result<()> {
    let mut out = String::new();
    for item in items.values() {
        out.push_str(&serde_json::to_string(item)?);
        out.push('\n');
    }
    let tmp = path.with_extension("jsonl.tmp");
    fs::write(&tmp, out).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn append_line<T: Serialize>(file: &mut fs::File, path: &Path, item: &T) -> Result<()> {
    let mut line = serde_json::to_string(item)?;
    line.push('\n');
    file.write_all(line.as_bytes())
        .and_then(|_| file.flush())
        .map_err(|e| Error::io(path, e))
}

fn open_append(path: &Path) -> Result<fs::File> {
    fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))
}

fn log_file_name(key: &str) -> String {
    let stem: String = key
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect();
    format!("{stem}.jsonl")
}

enum Message {
    Done(Box<UnitOutput>),
    Failed(FailureRecord),
}

/// Runs every missing unit of the grid in parallel and streams results to
/// `config.out_dir`. Completed keys found in an existing `records.jsonl` are
/// skipped. On return the record and timing files are rewritten sorted by
/// key, so identical configurations yield identical record files.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunSummary> {
    config.validate()?;
    let out = &config.out_dir;
    fs::create_dir_all(out.join(LOG_DIR)).map_err(|e| Error::io(out, e))?;
    let records_path = out.join(RECORDS_FILE);
    let timings_path = out.join(TIMINGS_FILE);
    let failures_path = out.join(FAILURES_FILE);

    let mut records: BTreeMap<String, ExperimentRecord> = read_records(&records_path)?
        .into_iter()
        .map(|r| (r.key(), r))
        .collect();
    let mut timings: BTreeMap<String, TimingRecord> = read_jsonl::<TimingRecord>(&timings_path)?
        .into_iter()
        .map(|t| (t.key(), t))
        .filter(|(k, _)| records.contains_key(k))
        .collect();
    // Rewrite first so that lines dropped as unreadable do not linger.
    write_jsonl_sorted(&records_path, &records)?;
    write_jsonl_sorted(&timings_path, &timings)?;

    let prepared = prepare(config, load_problems(config)?);
    let mut failures: Vec<FailureRecord> = Vec::new();
    let mut units = Vec::new();
    let mut skipped = 0;
    for p in &prepared {
        let folds = match &p.folds {
            Ok(f) => f,
            Err(e) => {
                for fold in 0..config.outer_folds {
                    for &d in &config.descriptors {
                        for &o in &config.optimisers {
                            failures.push(FailureRecord {
                                key: unit_key(&p.problem.id(), fold, d, o),
                                message: e.to_string(),
                            });
                        }
                    }
                }
                continue;
            }
        };
        for (fi, fold) in folds.iter().enumerate() {
            for &d in &config.descriptors {
                for &o in &config.optimisers {
                    if records.contains_key(&unit_key(&p.problem.id(), fi, d, o)) {
                        skipped += 1;
                    } else {
                        units.push((&p.problem, fi, fold, d, o));
                    }
                }
            }
        }
    }
    log::info!("{} units to run, {} already complete", units.len(), skipped);

    let (tx, rx) = mpsc::channel::<Message>();
    let mut records_file = open_append(&records_path)?;
    let mut timings_file = open_append(&timings_path)?;
    let log_dir = out.join(LOG_DIR);
    let mut completed = 0;
    std::thread::scope(|scope| -> Result<()> {
        scope.spawn(move || {
            units.into_par_iter().for_each_with(tx, |tx, (problem, fi, fold, d, o)| {
                let key = unit_key(&problem.id(), fi, d, o);
                let message = match run_unit(config, problem, fi, fold, d, o) {
                    Ok(output) => Message::Done(Box::new(output)),
                    Err(e) => {
                        log::warn!("unit {key} failed: {e}");
                        Message::Failed(FailureRecord {
                            key,
                            message: e.to_string(),
                        })
                    }
                };
                let _ = tx.send(message);
            });
        });
        for message in rx {
            match message {
                Message::Done(output) => {
                    let key = output.record.key();
                    let log_path = log_dir.join(log_file_name(&key));
                    fs::write(&log_path, output.log.to_jsonl()?).map_err(|e| Error::io(&log_path, e))?;
                    append_line(&mut records_file, &records_path, &output.record)?;
                    append_line(&mut timings_file, &timings_path, &output.timing)?;
                    records.insert(key.clone(), output.record);
                    timings.insert(key, output.timing);
                    completed += 1;
                }
                Message::Failed(f) => failures.push(f),
            }
        }
        Ok(())
    })?;

    write_jsonl_sorted(&records_path, &records)?;
    write_jsonl_sorted(&timings_path, &timings)?;
    failures.sort_by(|a, b| a.key.cmp(&b.key));
    let failures_map: BTreeMap<String, FailureRecord> =
        failures.iter().map(|f| (f.key.clone(), f.clone())).collect();
    write_jsonl_sorted(&failures_path, &failures_map)?;
    Ok(RunSummary {
        completed,
        skipped,
        failed: failures.len(),
    })
}

/// Validation and test AUROC of default hyperparameters for every
/// (problem, fold, descriptor), written sorted to `defaults.jsonl`.
pub fn run_defaults(config: &ExperimentConfig) -> Result<(Vec<DefaultRecord>, Vec<FailureRecord>)> {
    config.validate()?;
    fs::create_dir_all(&config.out_dir).map_err(|e| Error::io(&config.out_dir, e))?;
    let prepared = prepare(config, load_problems(config)?);
    let mut units = Vec::new();
    let mut failures = Vec::new();
    for p in &prepared {
        match &p.folds {
            Ok(folds) => {
                for (fi, fold) in folds.iter().enumerate() {
                    for &d in &config.descriptors {
                        units.push((&p.problem, fi, fold, d));
                    }
                }
            }
            Err(e) => failures.push(FailureRecord {
                key: p.problem.id(),
                message: e.to_string(),
            }),
        }
    }
    let results: Vec<std::result::Result<DefaultRecord, FailureRecord>> = units
        .into_par_iter()
        .map(|(problem, fi, fold, d)| {
            let eval = || -> Result<DefaultRecord> {
                let objective = ObjectiveHandle::from_fold(fold, d, inner_seed(config, problem, fi))?;
                let spec = objective.default_spec();
                Ok(DefaultRecord {
                    problem: problem.id(),
                    dataset: problem.dataset.clone(),
                    target: problem.target.clone(),
                    fold: fi,
                    descriptor: d,
                    param_names: objective.space().names.clone(),
                    params: spec.values(),
                    validation_auroc: objective.evaluate_spec(&spec)?,
                    test_auroc: test_auroc(&spec, fold, &fold.target_train())?,
                })
            };
            eval().map_err(|e| FailureRecord {
                key: default_key(&problem.id(), fi, d),
                message: e.to_string(),
            })
        })
        .collect();
    let mut records = BTreeMap::new();
    for r in results {
        match r {
            Ok(rec) => {
                records.insert(rec.key(), rec);
            }
            Err(f) => failures.push(f),
        }
    }
    write_jsonl_sorted(&config.out_dir.join(DEFAULTS_FILE), &records)?;
    Ok((records.into_values().collect(), failures))
}

/// Keys of the full grid that `records` does not cover.
pub fn missing_keys(config: &ExperimentConfig, records: &[ExperimentRecord]) -> Result<Vec<String>> {
    let have: BTreeSet<String> = records.iter().map(|r| r.key()).collect();
    let mut missing = Vec::new();
    for problem in load_problems(config)? {
        for fold in 0..config.outer_folds {
            for &d in &config.descriptors {
                for &o in &config.optimisers {
                    let key = unit_key(&problem.id(), fold, d, o);
                    if !have.contains(&key) {
                        missing.push(key);
                    }
                }
            }
        }
    }
    Ok(missing)
}
