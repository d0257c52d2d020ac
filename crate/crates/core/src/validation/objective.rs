//! The cached validation objective seen by the optimisers.
//!
//! Optimisers work in the unit box `[0, 1]^m`. Integer hyperparameters map
//! through a log scale and rounding, `k = round(K^u)` on `[1, K]`; the SVM's
//! `ν` and `c'` map affinely onto their domains.

use std::collections::HashMap;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::cv::{cv_mean, inner_folds, InnerFold, LofCv, INNER_FOLDS};
use super::loo::{lnnd_loo_max, nnd_loo_max, LooState};
use crate::dataset::FoldData;
use crate::descriptors::{
    DescriptorKind, DescriptorSpec, SmoOptions, SvmModel, C_PRIME_MAX, C_PRIME_MIN, NU_MAX, NU_MIN,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scale", rename_all = "kebab-case")]
pub enum Dimension {
    LogInteger { max: usize },
    Affine { min: f64, max: f64 },
}

impl Dimension {
    /// Concrete value of unit coordinate `u` (clamped into `[0, 1]`).
    pub fn decode(&self, u: f64) -> f64 {
        let u = if u.is_nan() { 0.0 } else { u.clamp(0.0, 1.0) };
        match *self {
            Dimension::LogInteger { max } => {
                let k = (u * (max as f64).ln()).exp().round();
                k.clamp(1.0, max as f64)
            }
            Dimension::Affine { min, max } => (min + u * (max - min)).clamp(min, max),
        }
    }

    /// Unit coordinate of a concrete value; inverse of [`Dimension::decode`]
    /// on the domain.
    pub fn encode(&self, v: f64) -> f64 {
        match *self {
            Dimension::LogInteger { max } if max <= 1 => 0.0,
            Dimension::LogInteger { max } => (v.max(1.0).ln() / (max as f64).ln()).clamp(0.0, 1.0),
            Dimension::Affine { min, max } => ((v - min) / (max - min)).clamp(0.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub kind: DescriptorKind,
    pub names: Vec<String>,
    pub dimensions: Vec<Dimension>,
}

impl SearchSpace {
    pub fn dim(&self) -> usize {
        self.dimensions.len()
    }

    pub fn decode(&self, coords: &[f64]) -> DescriptorSpec {
        let v: Vec<f64> = self
            .dimensions
            .iter()
            .zip(coords)
            .map(|(d, &u)| d.decode(u))
            .collect();
        match self.kind {
            DescriptorKind::Nnd => DescriptorSpec::Nnd { k: v[0] as usize },
            DescriptorKind::Lnnd => DescriptorSpec::Lnnd { k: v[0] as usize },
            DescriptorKind::Lof => DescriptorSpec::Lof { k: v[0] as usize },
            DescriptorKind::Alp => DescriptorSpec::Alp {
                k: v[0] as usize,
                l: v[1] as usize,
            },
            DescriptorKind::Svm => DescriptorSpec::Svm {
                nu: v[0],
                c_prime: v[1],
            },
        }
    }

    pub fn encode(&self, spec: &DescriptorSpec) -> Vec<f64> {
        self.dimensions
            .iter()
            .zip(spec.values())
            .map(|(d, v)| d.encode(v))
            .collect()
    }

    /// Clamps the hyperparameters of `spec` into the space.
    pub fn clamp(&self, spec: &DescriptorSpec) -> DescriptorSpec {
        self.decode(&self.encode(spec))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    LooEfficient,
    Cv5,
}

impl Strategy {
    pub fn for_kind(kind: DescriptorKind) -> Self {
        match kind {
            DescriptorKind::Nnd | DescriptorKind::Lnnd | DescriptorKind::Alp => Strategy::LooEfficient,
            DescriptorKind::Lof | DescriptorKind::Svm => Strategy::Cv5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationPlan {
    pub strategy: Strategy,
    /// Number of inner folds; 0 for leave-one-out.
    pub inner_folds: usize,
    pub seed: u64,
}

impl ValidationPlan {
    pub fn for_kind(kind: DescriptorKind, seed: u64) -> Self {
        let strategy = Strategy::for_kind(kind);
        Self {
            strategy,
            inner_folds: if strategy == Strategy::Cv5 { INNER_FOLDS } else { 0 },
            seed,
        }
    }
}

/// Key of a concrete hyperparameter vector: integers by value, reals by bits.
fn cache_key(spec: &DescriptorSpec) -> Vec<u64> {
    match *spec {
        DescriptorSpec::Nnd { k } | DescriptorSpec::Lnnd { k } | DescriptorSpec::Lof { k } => vec![k as u64],
        DescriptorSpec::Alp { k, l } => vec![k as u64, l as u64],
        DescriptorSpec::Svm { nu, c_prime } => vec![nu.to_bits(), c_prime.to_bits()],
    }
}

#[derive(Debug, Clone, Default)]
pub struct EvaluationCache {
    values: HashMap<Vec<u64>, f64>,
    evaluations: usize,
    proposals: usize,
}

impl EvaluationCache {
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn proposals(&self) -> usize {
        self.proposals
    }

    pub fn get(&self, spec: &DescriptorSpec) -> Option<f64> {
        self.values.get(&cache_key(spec)).copied()
    }

    /// Counts a proposal and returns the cached value or computes and stores it.
    pub fn lookup_or_insert<F>(&mut self, spec: &DescriptorSpec, compute: F) -> Result<(f64, bool)>
    where
        F: FnOnce() -> Result<f64>,
    {
        self.proposals += 1;
        let key = cache_key(spec);
        if let Some(&v) = self.values.get(&key) {
            return Ok((v, true));
        }
        let v = compute()?;
        self.evaluations += 1;
        self.values.insert(key, v);
        Ok((v, false))
    }
}

/// Outcome of one objective call.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub cached: bool,
    /// Concrete hyperparameter values the coordinates discretised to.
    pub params: Vec<f64>,
}

#[derive(Debug, Clone)]
enum SharedState {
    Loo(LooState),
    Lof(LofCv),
    Svm(Vec<InnerFold>),
}

/// Validation objective of one descriptor on one training set.
#[derive(Debug, Clone)]
pub struct ObjectiveHandle {
    kind: DescriptorKind,
    plan: ValidationPlan,
    space: SearchSpace,
    n_targets: usize,
    n_features: usize,
    state: SharedState,
    cache: EvaluationCache,
}

impl ObjectiveHandle {
    pub fn new(train: ArrayView2<'_, f64>, is_target: &[bool], kind: DescriptorKind, seed: u64) -> Result<Self> {
        if train.nrows() != is_target.len() {
            return Err(Error::InvalidInput("label count differs from row count".into()));
        }
        let n = is_target.iter().filter(|&&t| t).count();
        let plan = ValidationPlan::for_kind(kind, seed);
        let log_k = |max: usize| -> Result<Vec<Dimension>> {
            if max == 0 {
                return Err(Error::TooFewPoints {
                    needed: 3,
                    available: n,
                });
            }
            Ok(vec![Dimension::LogInteger { max }])
        };
        let (state, dimensions, names) = match kind {
            DescriptorKind::Nnd => {
                let max = nnd_loo_max(n);
                let dims = log_k(max)?;
                (SharedState::Loo(LooState::for_nnd(train, is_target, max)?), dims, vec!["k"])
            }
            DescriptorKind::Lnnd => {
                let max = lnnd_loo_max(n);
                let dims = log_k(max)?;
                (SharedState::Loo(LooState::for_lnnd(train, is_target, max)?), dims, vec!["k"])
            }
            DescriptorKind::Alp => {
                let state = LooState::for_alp(train, is_target)?;
                let dims = vec![Dimension::LogInteger { max: 5 * n }; 2];
                (SharedState::Loo(state), dims, vec!["k", "l"])
            }
            DescriptorKind::Lof => {
                let cv = LofCv::new(train, is_target, seed)?;
                let dims = log_k(cv.k_max())?;
                (SharedState::Lof(cv), dims, vec!["k"])
            }
            DescriptorKind::Svm => {
                let folds = inner_folds(train, is_target, seed)?;
                let dims = vec![
                    Dimension::Affine { min: NU_MIN, max: NU_MAX },
                    Dimension::Affine {
                        min: C_PRIME_MIN,
                        max: C_PRIME_MAX,
                    },
                ];
                (SharedState::Svm(folds), dims, vec!["nu", "c_prime"])
            }
        };
        Ok(Self {
            kind,
            plan,
            space: SearchSpace {
                kind,
                names: names.into_iter().map(String::from).collect(),
                dimensions,
            },
            n_targets: n,
            n_features: train.ncols(),
            state,
            cache: EvaluationCache::default(),
        })
    }

    pub fn from_fold(fold: &FoldData, kind: DescriptorKind, seed: u64) -> Result<Self> {
        Self::new(fold.train.view(), &fold.train_is_target, kind, seed)
    }

    pub fn kind(&self) -> DescriptorKind {
        self.kind
    }

    pub fn plan(&self) -> &ValidationPlan {
        &self.plan
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn cache(&self) -> &EvaluationCache {
        &self.cache
    }

    /// Default hyperparameters, clamped into the search space.
    pub fn default_spec(&self) -> DescriptorSpec {
        self.space
            .clamp(&self.kind.default_spec(self.n_targets, self.n_features))
    }

    pub fn default_point(&self) -> Vec<f64> {
        self.space.encode(&self.default_spec())
    }

    /// Validation AUROC of concrete hyperparameters, bypassing the cache.
    pub fn evaluate_spec(&self, spec: &DescriptorSpec) -> Result<f64> {
        if spec.kind() != self.kind {
            return Err(Error::InvalidInput(format!(
                "objective for {} cannot evaluate {}",
                self.kind,
                spec.kind()
            )));
        }
        match (&self.state, *spec) {
            (SharedState::Loo(s), DescriptorSpec::Nnd { k }) => s.nnd(k),
            (SharedState::Loo(s), DescriptorSpec::Lnnd { k }) => s.lnnd(k),
            (SharedState::Loo(s), DescriptorSpec::Alp { k, l }) => s.alp(k, l),
            (SharedState::Lof(cv), DescriptorSpec::Lof { k }) => cv.evaluate(k),
            (SharedState::Svm(folds), DescriptorSpec::Svm { nu, c_prime }) => {
                spec.validate(self.n_targets)?;
                let options = SmoOptions::default();
                cv_mean(folds, |fold| {
                    Ok(SvmModel::fit(fold.fit_targets.view(), nu, c_prime, &options)?
                        .score(fold.validation.view()))
                })
            }
            _ => unreachable!("state matches kind"),
        }
    }

    /// Objective at unit-box coordinates: decode, consult the cache, evaluate
    /// on a miss.
    pub fn objective(&mut self, coords: &[f64]) -> Result<Evaluation> {
        if coords.len() != self.space.dim() {
            return Err(Error::InvalidInput(format!(
                "expected {} coordinates, got {}",
                self.space.dim(),
                coords.len()
            )));
        }
        let spec = self.space.decode(coords);
        let mut cache = std::mem::take(&mut self.cache);
        let result = cache.lookup_or_insert(&spec, || self.evaluate_spec(&spec));
        self.cache = cache;
        let (value, cached) = result?;
        Ok(Evaluation {
            value,
            cached,
            params: spec.values(),
        })
    }
}
