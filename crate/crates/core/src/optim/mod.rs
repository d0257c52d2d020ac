//! Budget-limited sequential maximisers over the unit box.
//!
//! Every optimiser drives a [`Search`], which clamps proposals into
//! `[0, 1]^m`, records one [`Trial`] per proposal and refuses to continue once
//! either the evaluation or the proposal cap is reached.

mod hooke_jeeves;
mod malherbe_powell;
mod nelder_mead;
mod random;
mod tpe;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::validation::{Evaluation, ObjectiveHandle};

pub use hooke_jeeves::{hooke_jeeves, HookeJeevesOptions};
pub use malherbe_powell::{
    fit_quadratic, lipschitz_bound, malherbe_powell, maximise_quadratic_in_box, LipschitzState,
    MalherbePowellOptions, Quadratic,
};
pub use nelder_mead::{nelder_mead, NelderMeadOptions};
pub use random::random_search;
pub use tpe::{tpe, tpe_split, ParzenEstimator, TpeOptions};

/// A maximisation target over `[0, 1]^dim`.
pub trait Objective {
    fn dim(&self) -> usize;
    fn evaluate(&mut self, coords: &[f64]) -> Result<Evaluation>;
}

impl Objective for ObjectiveHandle {
    fn dim(&self) -> usize {
        self.space().dim()
    }

    fn evaluate(&mut self, coords: &[f64]) -> Result<Evaluation> {
        self.objective(coords)
    }
}

/// Wraps a plain function, caching by exact coordinates.
pub struct FnObjective<F> {
    dim: usize,
    f: F,
    cache: HashMap<Vec<u64>, f64>,
}

impl<F: FnMut(&[f64]) -> f64> FnObjective<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self {
            dim,
            f,
            cache: HashMap::new(),
        }
    }
}

impl<F: FnMut(&[f64]) -> f64> Objective for FnObjective<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&mut self, coords: &[f64]) -> Result<Evaluation> {
        let key: Vec<u64> = coords.iter().map(|c| c.to_bits()).collect();
        if let Some(&value) = self.cache.get(&key) {
            return Ok(Evaluation {
                value,
                cached: true,
                params: coords.to_vec(),
            });
        }
        let value = (self.f)(coords);
        self.cache.insert(key, value);
        Ok(Evaluation {
            value,
            cached: false,
            params: coords.to_vec(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub max_evaluations: usize,
    pub max_proposals: usize,
    pub seed: u64,
}

impl Budget {
    pub fn new(max_evaluations: usize, max_proposals: usize, seed: u64) -> Self {
        Self {
            max_evaluations,
            max_proposals,
            seed,
        }
    }

    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            max_evaluations: 50,
            max_proposals: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimiserKind {
    Random,
    HookeJeeves,
    NelderMead,
    Tpe,
    MalherbePowell,
}

impl OptimiserKind {
    pub const ALL: [OptimiserKind; 5] = [
        OptimiserKind::Random,
        OptimiserKind::HookeJeeves,
        OptimiserKind::NelderMead,
        OptimiserKind::Tpe,
        OptimiserKind::MalherbePowell,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OptimiserKind::Random => "random",
            OptimiserKind::HookeJeeves => "hooke-jeeves",
            OptimiserKind::NelderMead => "nelder-mead",
            OptimiserKind::Tpe => "tpe",
            OptimiserKind::MalherbePowell => "malherbe-powell",
        }
    }

    /// Whether the optimiser starts from the default hyperparameters.
    pub fn uses_start(self) -> bool {
        matches!(
            self,
            OptimiserKind::HookeJeeves | OptimiserKind::NelderMead | OptimiserKind::MalherbePowell
        )
    }
}

impl fmt::Display for OptimiserKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OptimiserKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        OptimiserKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| Error::InvalidInput(format!("unknown optimiser {s:?}")))
    }
}

/// One proposal and its outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    /// 1-based proposal index.
    pub proposal: usize,
    /// 1-based evaluation index; `None` for a cache hit.
    pub evaluation: Option<usize>,
    pub coords: Vec<f64>,
    pub params: Vec<f64>,
    pub value: f64,
    /// Best value seen up to and including this trial.
    pub best: f64,
}

/// Best hyperparameters after a given number of unique evaluations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Incumbent {
    pub evaluations: usize,
    pub coords: Vec<f64>,
    pub params: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    EvaluationBudget,
    ProposalCap,
    Converged,
}

/// Proposal bookkeeping shared by all optimisers.
pub struct Search<'a, O: Objective + ?Sized> {
    objective: &'a mut O,
    budget: Budget,
    trials: Vec<Trial>,
    evaluations: usize,
    best: Option<usize>,
    eval_seconds: Vec<f64>,
}

impl<'a, O: Objective + ?Sized> Search<'a, O> {
    pub fn new(objective: &'a mut O, budget: Budget) -> Self {
        Self {
            objective,
            budget,
            trials: Vec::new(),
            evaluations: 0,
            best: None,
            eval_seconds: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    pub fn budget(&self) -> &Budget {
        &self.budget
    }

    pub fn exhausted(&self) -> bool {
        self.evaluations >= self.budget.max_evaluations || self.trials.len() >= self.budget.max_proposals
    }

    pub fn trials(&self) -> &[Trial] {
        &self.trials
    }

    pub fn best(&self) -> Option<&Trial> {
        self.best.map(|i| &self.trials[i])
    }

    /// Clamps and evaluates `coords`; `None` once the budget is spent.
    pub fn propose(&mut self, coords: &[f64]) -> Result<Option<f64>> {
        if self.exhausted() {
            return Ok(None);
        }
        let coords: Vec<f64> = coords.iter().map(|&c| clamp_unit(c)).collect();
        let started = Instant::now();
        let e = self.objective.evaluate(&coords)?;
        if !e.value.is_finite() {
            return Err(Error::InvalidInput(format!("objective returned {}", e.value)));
        }
        let evaluation = if e.cached {
            None
        } else {
            self.evaluations += 1;
            self.eval_seconds.push(started.elapsed().as_secs_f64());
            Some(self.evaluations)
        };
        let improved = self.best().is_none_or(|b| e.value > b.value);
        if improved {
            self.best = Some(self.trials.len());
        }
        let best = if improved { e.value } else { self.best().map_or(e.value, |b| b.value) };
        self.trials.push(Trial {
            proposal: self.trials.len() + 1,
            evaluation,
            coords,
            params: e.params,
            value: e.value,
            best,
        });
        Ok(Some(e.value))
    }

    /// A search that ends with budget to spare has converged.
    pub fn finish(self, optimiser: OptimiserKind, constants: serde_json::Value) -> SearchResult {
        let stop = if self.evaluations >= self.budget.max_evaluations {
            StopReason::EvaluationBudget
        } else if self.trials.len() >= self.budget.max_proposals {
            StopReason::ProposalCap
        } else {
            StopReason::Converged
        };
        let incumbents = incumbents(&self.trials);
        SearchResult {
            optimiser,
            budget: self.budget,
            constants,
            stop,
            trials: self.trials,
            incumbents,
            eval_seconds: self.eval_seconds,
        }
    }
}

pub(crate) fn clamp_unit(c: f64) -> f64 {
    if c.is_nan() {
        0.0
    } else {
        c.clamp(0.0, 1.0)
    }
}

/// Incumbent after each unique evaluation, recomputed from a history.
pub fn incumbents(trials: &[Trial]) -> Vec<Incumbent> {
    let mut out: Vec<Incumbent> = Vec::new();
    let mut best: Option<&Trial> = None;
    for t in trials {
        if best.is_none_or(|b| t.value > b.value) {
            best = Some(t);
        }
        if let (Some(e), Some(b)) = (t.evaluation, best) {
            out.push(Incumbent {
                evaluations: e,
                coords: b.coords.clone(),
                params: b.params.clone(),
                value: b.value,
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub optimiser: OptimiserKind,
    pub budget: Budget,
    /// Optimiser constants echoed for provenance.
    pub constants: serde_json::Value,
    pub stop: StopReason,
    pub trials: Vec<Trial>,
    /// Entry `e - 1` holds the incumbent after `e` evaluations.
    pub incumbents: Vec<Incumbent>,
    /// Wall time per unique evaluation; kept out of the log.
    #[serde(skip)]
    pub eval_seconds: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct LogHeader {
    optimiser: OptimiserKind,
    budget: Budget,
    constants: serde_json::Value,
    stop: StopReason,
}

impl SearchResult {
    pub fn best(&self) -> Option<&Incumbent> {
        self.incumbents.last()
    }

    pub fn evaluations(&self) -> usize {
        self.incumbents.len()
    }

    /// Incumbent after `e` evaluations; a search that stopped early carries
    /// its final incumbent forward.
    pub fn incumbent_at(&self, e: usize) -> Option<&Incumbent> {
        if e == 0 {
            return None;
        }
        self.incumbents.get(e.min(self.incumbents.len()) - 1)
    }

    /// Header line followed by one trial per line.
    pub fn to_jsonl(&self) -> Result<String> {
        let header = LogHeader {
            optimiser: self.optimiser,
            budget: self.budget,
            constants: self.constants.clone(),
            stop: self.stop,
        };
        let mut out = serde_json::to_string(&header)?;
        out.push('\n');
        for t in &self.trials {
            out.push_str(&serde_json::to_string(t)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: LogHeader = serde_json::from_str(
            lines
                .next()
                .ok_or_else(|| Error::InvalidInput("empty search log".into()))?,
        )?;
        let trials = lines
            .map(serde_json::from_str)
            .collect::<std::result::Result<Vec<Trial>, _>>()?;
        let incumbents = incumbents(&trials);
        Ok(Self {
            optimiser: header.optimiser,
            budget: header.budget,
            constants: header.constants,
            stop: header.stop,
            trials,
            incumbents,
            eval_seconds: Vec::new(),
        })
    }
}

/// Runs `kind` with its default constants. `start` seeds the local
/// optimisers and is ignored by random search and TPE.
pub fn run_search<O: Objective + ?Sized>(
    kind: OptimiserKind,
    objective: &mut O,
    budget: Budget,
    start: &[f64],
) -> Result<SearchResult> {
    if start.len() != objective.dim() {
        return Err(Error::InvalidInput(format!(
            "start point has {} coordinates, objective has {}",
            start.len(),
            objective.dim()
        )));
    }
    match kind {
        OptimiserKind::Random => random_search(objective, budget),
        OptimiserKind::HookeJeeves => hooke_jeeves(objective, budget, start, &HookeJeevesOptions::default()),
        OptimiserKind::NelderMead => nelder_mead(objective, budget, start, &NelderMeadOptions::default()),
        OptimiserKind::Tpe => tpe(objective, budget, &TpeOptions::default()),
        OptimiserKind::MalherbePowell => {
            malherbe_powell(objective, budget, start, &MalherbePowellOptions::default())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(x: &[f64]) -> f64 {
        -x.iter().map(|v| (v - 0.3).powi(2)).sum::<f64>()
    }

    #[test]
    fn budget_caps_hold_for_every_optimiser() {
        for kind in OptimiserKind::ALL {
            for dim in [1, 2] {
                let mut f = FnObjective::new(dim, sphere);
                let r = run_search(kind, &mut f, Budget::with_seed(3), &vec![0.5; dim]).unwrap();
                assert!(r.evaluations() <= 50, "{kind}");
                assert!(r.trials.len() <= 100, "{kind}");
                for t in &r.trials {
                    assert!(t.coords.iter().all(|c| (0.0..=1.0).contains(c)));
                }
                for w in r.incumbents.windows(2) {
                    assert!(w[1].value >= w[0].value);
                }
            }
        }
    }

    #[test]
    fn deterministic_under_seed() {
        for kind in OptimiserKind::ALL {
            let run = || {
                let mut f = FnObjective::new(2, sphere);
                run_search(kind, &mut f, Budget::with_seed(17), &[0.5, 0.5]).unwrap()
            };
            let (a, b) = (run(), run());
            assert_eq!(a.trials, b.trials, "{kind}");
            assert_eq!(a.incumbents, b.incumbents, "{kind}");
        }
    }

    #[test]
    fn log_round_trip_reproduces_history() {
        for kind in OptimiserKind::ALL {
            let mut f = FnObjective::new(2, sphere);
            let r = run_search(kind, &mut f, Budget::with_seed(5), &[0.5, 0.5]).unwrap();
            let back = SearchResult::from_jsonl(&r.to_jsonl().unwrap()).unwrap();
            assert_eq!(back.trials.len(), r.trials.len());
            for (a, b) in back.trials.iter().zip(&r.trials) {
                assert_eq!(a.value.to_bits(), b.value.to_bits());
                assert_eq!(a.coords, b.coords);
            }
            assert_eq!(back.incumbents, r.incumbents);
        }
    }

    #[test]
    fn truncated_history_matches_incumbent_table() {
        let mut f = FnObjective::new(2, sphere);
        let r = run_search(OptimiserKind::Tpe, &mut f, Budget::with_seed(1), &[0.5, 0.5]).unwrap();
        for e in 1..=r.evaluations() {
            let cut = r.trials.iter().position(|t| t.evaluation == Some(e)).unwrap();
            let recomputed = incumbents(&r.trials[..=cut]);
            assert_eq!(recomputed.last(), r.incumbent_at(e));
        }
        assert_eq!(r.incumbent_at(500), r.best());
    }

    #[test]
    fn optimiser_names_parse() {
        for kind in OptimiserKind::ALL {
            assert_eq!(kind.name().parse::<OptimiserKind>().unwrap(), kind);
        }
        assert_eq!("Malherbe_Powell".parse::<OptimiserKind>().unwrap(), OptimiserKind::MalherbePowell);
        assert!("gp".parse::<OptimiserKind>().is_err());
    }
}
