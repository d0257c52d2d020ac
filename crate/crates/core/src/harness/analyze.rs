use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::run::{default_key, unit_key, DefaultRecord, ExperimentRecord};
use crate::descriptors::DescriptorKind;
use crate::error::{Error, Result};
use crate::optim::OptimiserKind;
use crate::stats::{
    clustered_wilcoxon, holm_bonferroni, problem_weights, weighted_kendall_tau, weighted_mean, Alternative,
    PairedSample,
};

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOptions {
    /// Optimiser whose records feed the pairwise, default, τ and combination
    /// sections. `None` picks Malherbe-Powell if present, else the only one.
    pub optimiser: Option<OptimiserKind>,
    /// Dataset-equal problem weights; uniform when off.
    pub weighting: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            optimiser: None,
            weighting: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub descriptor: DescriptorKind,
    pub optimiser: OptimiserKind,
    pub evaluations: usize,
    pub validation_auroc: f64,
    pub test_auroc: f64,
    /// Validation minus test.
    pub gap: f64,
}

/// One-sided test that `row` has higher test AUROC than `column`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseRow {
    pub evaluations: usize,
    pub row: DescriptorKind,
    pub column: DescriptorKind,
    /// `None` when the test is undefined, e.g. one dataset carries every
    /// non-zero difference.
    pub p: Option<f64>,
    /// Holm-Bonferroni over the defined p-values of the same row.
    pub p_holm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefaultComparisonRow {
    pub descriptor: DescriptorKind,
    pub evaluations: usize,
    pub optimised_test_auroc: f64,
    pub default_test_auroc: f64,
    pub difference: f64,
    /// One-sided p that optimised beats default.
    pub p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauEntry {
    pub a: DescriptorKind,
    pub b: DescriptorKind,
    /// Over per-problem final test AUROC; `None` if every pair is tied.
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Selector {
    /// Pick per outer fold by that fold's validation AUROC.
    PerFold,
    /// Pick per problem by validation AUROC averaged over folds.
    MeanAcrossFolds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinLossRow {
    pub selector: Selector,
    pub versus: DescriptorKind,
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
    /// One-sided p that the combination beats `versus`.
    pub p: Option<f64>,
}

/// ALP and SVM combined by choosing whichever validates higher, ALP on ties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinationReport {
    /// Weighted mean test AUROC per evaluation count.
    pub per_fold: Vec<f64>,
    pub mean_across_folds: Vec<f64>,
    pub alp: Vec<f64>,
    pub svm: Vec<f64>,
    /// At the final evaluation count, per problem.
    pub table: Vec<WinLossRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub optimiser: OptimiserKind,
    pub weighting: bool,
    pub datasets: usize,
    pub problems: usize,
    pub folds: usize,
    pub max_evaluations: usize,
    pub curves: Vec<CurveRow>,
    pub pairwise: Vec<PairwiseRow>,
    pub versus_default: Vec<DefaultComparisonRow>,
    /// Smallest evaluation count at which the optimised weighted mean test
    /// AUROC exceeds the default's, per descriptor.
    pub first_improvement: BTreeMap<DescriptorKind, Option<usize>>,
    pub kendall_tau: Vec<TauEntry>,
    pub combination: Option<CombinationReport>,
}

type Combo = (DescriptorKind, OptimiserKind);

struct Grid<'a> {
    /// (problem id, dataset), sorted.
    problems: Vec<(String, String)>,
    folds: Vec<usize>,
    weights: Vec<f64>,
    cells: BTreeMap<Combo, BTreeMap<(String, usize), &'a ExperimentRecord>>,
    max_evaluations: usize,
}

impl<'a> Grid<'a> {
    fn build(records: &'a [ExperimentRecord], weighting: bool) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::InvalidInput("no records to analyse".into()));
        }
        let mut cells: BTreeMap<Combo, BTreeMap<(String, usize), &ExperimentRecord>> = BTreeMap::new();
        let mut problems = BTreeMap::new();
        let mut folds = BTreeSet::new();
        for r in records {
            problems.insert(r.problem.clone(), r.dataset.clone());
            folds.insert(r.fold);
            cells
                .entry((r.descriptor, r.optimiser))
                .or_default()
                .insert((r.problem.clone(), r.fold), r);
        }
        let mut missing = Vec::new();
        for (&(d, o), cell) in &cells {
            for p in problems.keys() {
                for &f in &folds {
                    if !cell.contains_key(&(p.clone(), f)) {
                        missing.push(unit_key(p, f, d, o));
                    }
                }
            }
        }
        if !missing.is_empty() {
            return Err(Error::GridMismatch(missing));
        }
        let problems: Vec<(String, String)> = problems.into_iter().collect();
        let weights = if weighting {
            problem_weights(&problems).into_iter().map(|w| w.weight).collect()
        } else {
            vec![1.0 / problems.len() as f64; problems.len()]
        };
        let max_evaluations = records.iter().map(|r| r.curve.len()).max().unwrap_or(0);
        Ok(Self {
            problems,
            folds: folds.into_iter().collect(),
            weights,
            cells,
            max_evaluations,
        })
    }

    /// Per-problem fold means of `f`, in problem order.
    fn per_problem(&self, combo: Combo, f: impl Fn(&ExperimentRecord) -> f64) -> Vec<f64> {
        let cell = &self.cells[&combo];
        self.problems
            .iter()
            .map(|(p, _)| {
                self.folds.iter().map(|&fold| f(cell[&(p.clone(), fold)])).sum::<f64>() / self.folds.len() as f64
            })
            .collect()
    }

    fn mean(&self, values: &[f64]) -> Result<f64> {
        weighted_mean(values, &self.weights)
    }

    fn paired(&self, a: &[f64], b: &[f64]) -> Vec<PairedSample> {
        a.iter()
            .zip(b)
            .zip(&self.problems)
            .map(|((x, y), (_, dataset))| PairedSample {
                difference: x - y,
                cluster: dataset.clone(),
            })
            .collect()
    }

    fn greater_p(&self, a: &[f64], b: &[f64]) -> Option<f64> {
        clustered_wilcoxon(&self.paired(a, b), Alternative::Greater).ok()
    }

    fn descriptors_for(&self, optimiser: OptimiserKind) -> Vec<DescriptorKind> {
        self.cells.keys().filter(|(_, o)| *o == optimiser).map(|(d, _)| *d).collect()
    }
}

fn choose_optimiser(grid: &Grid<'_>, requested: Option<OptimiserKind>) -> Result<OptimiserKind> {
    let present: BTreeSet<OptimiserKind> = grid.cells.keys().map(|(_, o)| *o).collect();
    match requested {
        Some(o) if present.contains(&o) => Ok(o),
        Some(o) => Err(Error::InvalidInput(format!("no records for optimiser {o}"))),
        None if present.contains(&OptimiserKind::MalherbePowell) => Ok(OptimiserKind::MalherbePowell),
        None if present.len() == 1 => Ok(*present.iter().next().expect("one optimiser")),
        None => Err(Error::InvalidInput(format!(
            "records hold {} optimisers; choose one",
            present.len()
        ))),
    }
}

/// Default test AUROC per (problem, fold, descriptor): from the baseline
/// when given, which must then cover the grid, else from the records.
fn default_lookup(
    grid: &Grid<'_>,
    optimiser: OptimiserKind,
    baseline: Option<&[DefaultRecord]>,
) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for d in grid.descriptors_for(optimiser) {
        for r in grid.cells[&(d, optimiser)].values() {
            out.insert(default_key(&r.problem, r.fold, d), r.default_test_auroc);
        }
    }
    if let Some(baseline) = baseline {
        let given: BTreeMap<String, f64> = baseline.iter().map(|b| (b.key(), b.test_auroc)).collect();
        let missing: Vec<String> = out.keys().filter(|k| !given.contains_key(*k)).cloned().collect();
        if !missing.is_empty() {
            return Err(Error::GridMismatch(missing));
        }
        for (k, v) in out.iter_mut() {
            *v = given[k];
        }
    }
    Ok(out)
}

pub fn analyze(
    records: &[ExperimentRecord],
    baseline: Option<&[DefaultRecord]>,
    options: &AnalysisOptions,
) -> Result<AnalysisReport> {
    let grid = Grid::build(records, options.weighting)?;
    let optimiser = choose_optimiser(&grid, options.optimiser)?;
    let max_e = grid.max_evaluations;
    let evals = 1..=max_e;

    let mut curves = Vec::new();
    for &(d, o) in grid.cells.keys() {
        for e in evals.clone() {
            let validation = grid.mean(&grid.per_problem((d, o), |r| r.at(e).validation_auroc))?;
            let test = grid.mean(&grid.per_problem((d, o), |r| r.at(e).test_auroc))?;
            curves.push(CurveRow {
                descriptor: d,
                optimiser: o,
                evaluations: e,
                validation_auroc: validation,
                test_auroc: test,
                gap: validation - test,
            });
        }
    }

    let descriptors = grid.descriptors_for(optimiser);
    let test_at = |d: DescriptorKind, e: usize| grid.per_problem((d, optimiser), |r| r.at(e).test_auroc);

    let mut pairwise = Vec::new();
    for e in evals.clone() {
        let tests: BTreeMap<DescriptorKind, Vec<f64>> = descriptors.iter().map(|&d| (d, test_at(d, e))).collect();
        for &row in &descriptors {
            let columns: Vec<DescriptorKind> = descriptors.iter().copied().filter(|&c| c != row).collect();
            let ps: Vec<Option<f64>> = columns.iter().map(|c| grid.greater_p(&tests[&row], &tests[c])).collect();
            let defined: Vec<f64> = ps.iter().flatten().copied().collect();
            let mut adjusted = holm_bonferroni(&defined).into_iter();
            for (column, p) in columns.into_iter().zip(ps) {
                pairwise.push(PairwiseRow {
                    evaluations: e,
                    row,
                    column,
                    p,
                    p_holm: p.map(|_| adjusted.next().expect("one adjustment per defined p")),
                });
            }
        }
    }

    let defaults = default_lookup(&grid, optimiser, baseline)?;
    let mut versus_default = Vec::new();
    let mut first_improvement = BTreeMap::new();
    for &d in &descriptors {
        let default = grid.per_problem((d, optimiser), |r| defaults[&default_key(&r.problem, r.fold, d)]);
        let default_mean = grid.mean(&default)?;
        let mut first = None;
        for e in evals.clone() {
            let optimised = test_at(d, e);
            let optimised_mean = grid.mean(&optimised)?;
            if first.is_none() && optimised_mean > default_mean {
                first = Some(e);
            }
            versus_default.push(DefaultComparisonRow {
                descriptor: d,
                evaluations: e,
                optimised_test_auroc: optimised_mean,
                default_test_auroc: default_mean,
                difference: optimised_mean - default_mean,
                p: grid.greater_p(&optimised, &default),
            });
        }
        first_improvement.insert(d, first);
    }

    let mut kendall_tau = Vec::new();
    for (i, &a) in descriptors.iter().enumerate() {
        for &b in &descriptors[i + 1..] {
            kendall_tau.push(TauEntry {
                a,
                b,
                tau: weighted_kendall_tau(&test_at(a, max_e), &test_at(b, max_e), &grid.weights).ok(),
            });
        }
    }

    let combination = if descriptors.contains(&DescriptorKind::Alp) && descriptors.contains(&DescriptorKind::Svm) {
        Some(combine(&grid, optimiser)?)
    } else {
        None
    };

    Ok(AnalysisReport {
        optimiser,
        weighting: options.weighting,
        datasets: grid.problems.iter().map(|(_, d)| d).collect::<BTreeSet<_>>().len(),
        problems: grid.problems.len(),
        folds: grid.folds.len(),
        max_evaluations: max_e,
        curves,
        pairwise,
        versus_default,
        first_improvement,
        kendall_tau,
        combination,
    })
}

/// Per-problem test AUROC of the ALP/SVM combination at `e`.
fn combined_at(grid: &Grid<'_>, optimiser: OptimiserKind, e: usize, selector: Selector) -> Vec<f64> {
    let alp = &grid.cells[&(DescriptorKind::Alp, optimiser)];
    let svm = &grid.cells[&(DescriptorKind::Svm, optimiser)];
    let n_folds = grid.folds.len() as f64;
    grid.problems
        .iter()
        .map(|(p, _)| {
            let pairs: Vec<(&ExperimentRecord, &ExperimentRecord)> = grid
                .folds
                .iter()
                .map(|&f| (alp[&(p.clone(), f)], svm[&(p.clone(), f)]))
                .collect();
            match selector {
                Selector::PerFold => {
                    pairs
                        .iter()
                        .map(|(a, s)| {
                            let (a, s) = (a.at(e), s.at(e));
                            if a.validation_auroc >= s.validation_auroc {
                                a.test_auroc
                            } else {
                                s.test_auroc
                            }
                        })
                        .sum::<f64>()
                        / n_folds
                }
                Selector::MeanAcrossFolds => {
                    let mean = |f: &dyn Fn(&(&ExperimentRecord, &ExperimentRecord)) -> f64| {
                        pairs.iter().map(f).sum::<f64>() / n_folds
                    };
                    let alp_val = mean(&|(a, _)| a.at(e).validation_auroc);
                    let svm_val = mean(&|(_, s)| s.at(e).validation_auroc);
                    if alp_val >= svm_val {
                        mean(&|(a, _)| a.at(e).test_auroc)
                    } else {
                        mean(&|(_, s)| s.at(e).test_auroc)
                    }
                }
            }
        })
        .collect()
}

fn combine(grid: &Grid<'_>, optimiser: OptimiserKind) -> Result<CombinationReport> {
    let max_e = grid.max_evaluations;
    let curve = |values: &dyn Fn(usize) -> Vec<f64>| -> Result<Vec<f64>> {
        (1..=max_e).map(|e| grid.mean(&values(e))).collect()
    };
    let single = |d: DescriptorKind, e: usize| grid.per_problem((d, optimiser), |r| r.at(e).test_auroc);
    let mut table = Vec::new();
    for selector in [Selector::PerFold, Selector::MeanAcrossFolds] {
        let combined = combined_at(grid, optimiser, max_e, selector);
        for versus in [DescriptorKind::Alp, DescriptorKind::Svm] {
            let other = single(versus, max_e);
            let (mut wins, mut losses, mut ties) = (0, 0, 0);
            for (c, o) in combined.iter().zip(&other) {
                match c.partial_cmp(o) {
                    Some(std::cmp::Ordering::Greater) => wins += 1,
                    Some(std::cmp::Ordering::Less) => losses += 1,
                    _ => ties += 1,
                }
            }
            table.push(WinLossRow {
                selector,
                versus,
                wins,
                losses,
                ties,
                p: grid.greater_p(&combined, &other),
            });
        }
    }
    Ok(CombinationReport {
        per_fold: curve(&|e| combined_at(grid, optimiser, e, Selector::PerFold))?,
        mean_across_folds: curve(&|e| combined_at(grid, optimiser, e, Selector::MeanAcrossFolds))?,
        alp: curve(&|e| single(DescriptorKind::Alp, e))?,
        svm: curve(&|e| single(DescriptorKind::Svm, e))?,
        table,
    })
}

fn opt(p: Option<f64>) -> String {
    p.map_or_else(String::new, |v| format!("{v:.6e}"))
}

impl AnalysisReport {
    pub fn curves_csv(&self) -> String {
        let mut out = String::from("descriptor,optimiser,evaluations,validation_auroc,test_auroc,gap\n");
        for r in &self.curves {
            let _ = writeln!(
                out,
                "{},{},{},{:.9},{:.9},{:.9}",
                r.descriptor, r.optimiser, r.evaluations, r.validation_auroc, r.test_auroc, r.gap
            );
        }
        out
    }

    pub fn pairwise_csv(&self) -> String {
        let mut out = String::from("evaluations,row,column,p,p_holm\n");
        for r in &self.pairwise {
            let _ = writeln!(out, "{},{},{},{},{}", r.evaluations, r.row, r.column, opt(r.p), opt(r.p_holm));
        }
        out
    }

    /// Holm-adjusted p-values at the final evaluation count; a small value
    /// in row A, column B favours A over B.
    pub fn pairwise_markdown(&self) -> String {
        let rows: Vec<&PairwiseRow> = self
            .pairwise
            .iter()
            .filter(|r| r.evaluations == self.max_evaluations)
            .collect();
        let descriptors: Vec<DescriptorKind> = rows
            .iter()
            .flat_map(|r| [r.row, r.column])
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut out = format!(
            "Row > column, one-sided clustered Wilcoxon, Holm-adjusted per row ({}, {} evaluations)\n\n|",
            self.optimiser, self.max_evaluations
        );
        for d in &descriptors {
            let _ = write!(out, " | {d}");
        }
        out.push_str(" |\n|---");
        out.push_str(&"|---:".repeat(descriptors.len()));
        out.push_str("|\n");
        for &row in &descriptors {
            let _ = write!(out, "| {row}");
            for &column in &descriptors {
                let cell = rows
                    .iter()
                    .find(|r| r.row == row && r.column == column)
                    .and_then(|r| r.p_holm)
                    .map_or_else(|| "".to_string(), |p| format!("{p:.4}"));
                let _ = write!(out, " | {cell}");
            }
            out.push_str(" |\n");
        }
        out
    }

    pub fn versus_default_csv(&self) -> String {
        let mut out = String::from("descriptor,evaluations,optimised_test_auroc,default_test_auroc,difference,p\n");
        for r in &self.versus_default {
            let _ = writeln!(
                out,
                "{},{},{:.9},{:.9},{:.9},{}",
                r.descriptor,
                r.evaluations,
                r.optimised_test_auroc,
                r.default_test_auroc,
                r.difference,
                opt(r.p)
            );
        }
        out
    }

    pub fn kendall_tau_csv(&self) -> String {
        let mut out = String::from("a,b,tau\n");
        for t in &self.kendall_tau {
            let _ = writeln!(out, "{},{},{}", t.a, t.b, t.tau.map_or_else(String::new, |v| format!("{v:.9}")));
        }
        out
    }

    pub fn combination_csv(&self) -> Option<String> {
        let c = self.combination.as_ref()?;
        let mut out = String::from("evaluations,per_fold,mean_across_folds,alp,svm\n");
        for i in 0..c.per_fold.len() {
            let _ = writeln!(
                out,
                "{},{:.9},{:.9},{:.9},{:.9}",
                i + 1,
                c.per_fold[i],
                c.mean_across_folds[i],
                c.alp[i],
                c.svm[i]
            );
        }
        Some(out)
    }

    pub fn combination_markdown(&self) -> Option<String> {
        let c = self.combination.as_ref()?;
        let mut out = String::from("| selector | versus | wins | losses | ties | p |\n|---|---|---:|---:|---:|---:|\n");
        for r in &c.table {
            let selector = match r.selector {
                Selector::PerFold => "per fold",
                Selector::MeanAcrossFolds => "mean across folds",
            };
            let _ = writeln!(
                out,
                "| {selector} | {} | {} | {} | {} | {} |",
                r.versus,
                r.wins,
                r.losses,
                r.ties,
                r.p.map_or_else(String::new, |p| format!("{p:.4}"))
            );
        }
        Some(out)
    }
}

/// Writes `report.json` and the CSV and Markdown tables into `dir`.
pub fn write_report(report: &AnalysisReport, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = vec![
        ("report.json", serde_json::to_string_pretty(report)? + "\n"),
        ("curves.csv", report.curves_csv()),
        ("pairwise.csv", report.pairwise_csv()),
        ("pairwise.md", report.pairwise_markdown()),
        ("versus_default.csv", report.versus_default_csv()),
        ("kendall_tau.csv", report.kendall_tau_csv()),
    ];
    if let (Some(csv), Some(md)) = (report.combination_csv(), report.combination_markdown()) {
        files.push(("combination.csv", csv));
        files.push(("combination.md", md));
    }
    for (name, contents) in files {
        let path = dir.join(name);
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
