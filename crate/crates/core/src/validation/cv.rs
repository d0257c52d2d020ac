//! Stratified five-fold validation for LOF and the SVM.

use ndarray::{Array2, ArrayView2, Axis};

use super::auroc::masked_auroc;
use super::loo::log_k_cap;
use crate::dataset::stratify;
use crate::descriptors::{DescriptorKind, DescriptorSpec, FittedModel, LofTrainStats};
use crate::error::{Error, Result};
use crate::neighbors::{NeighborIndex, NeighborTable};

pub const INNER_FOLDS: usize = 5;

/// One inner split: the model is fitted on the targets of the fitting part
/// and queried with the whole validation part.
#[derive(Debug, Clone)]
pub struct InnerFold {
    pub fit_targets: Array2<f64>,
    pub validation: Array2<f64>,
    pub validation_is_target: Vec<bool>,
}

/// Stratified inner folds of a training set. Folds whose validation part
/// lacks targets or non-targets are dropped with a warning.
pub fn inner_folds(train: ArrayView2<'_, f64>, is_target: &[bool], seed: u64) -> Result<Vec<InnerFold>> {
    let splits = stratify(is_target, INNER_FOLDS, seed)?;
    let mut folds = Vec::with_capacity(splits.len());
    for (f, split) in splits.iter().enumerate() {
        let validation_is_target: Vec<bool> = split.test.iter().map(|&i| is_target[i]).collect();
        let has_targets = validation_is_target.iter().any(|&t| t);
        let has_others = validation_is_target.iter().any(|&t| !t);
        if !has_targets || !has_others {
            log::warn!("inner fold {f} skipped: validation part lacks targets or non-targets");
            continue;
        }
        let fit_rows: Vec<usize> = split.train.iter().copied().filter(|&i| is_target[i]).collect();
        folds.push(InnerFold {
            fit_targets: train.select(Axis(0), &fit_rows),
            validation: train.select(Axis(0), &split.test),
            validation_is_target,
        });
    }
    if folds.is_empty() {
        return Err(Error::NoUsableFold);
    }
    Ok(folds)
}

fn fold_auroc(fold: &InnerFold, scores: &[f64]) -> Result<f64> {
    masked_auroc(scores, &fold.validation_is_target)
}

/// Mean fold AUROC of an arbitrary scorer `(fit_targets, validation) -> scores`.
pub fn cv_mean<F>(folds: &[InnerFold], mut scorer: F) -> Result<f64>
where
    F: FnMut(&InnerFold) -> Result<Vec<f64>>,
{
    if folds.is_empty() {
        return Err(Error::NoUsableFold);
    }
    let mut sum = 0.0;
    for fold in folds {
        sum += fold_auroc(fold, &scorer(fold)?)?;
    }
    Ok(sum / folds.len() as f64)
}

/// Refits `spec` on every inner fold. Only LOF and the SVM are validated this way.
pub fn cv5_validate(
    train: ArrayView2<'_, f64>,
    is_target: &[bool],
    spec: &DescriptorSpec,
    seed: u64,
) -> Result<f64> {
    if !matches!(spec.kind(), DescriptorKind::Lof | DescriptorKind::Svm) {
        return Err(Error::InvalidInput(format!(
            "{} is validated by leave-one-out, not five-fold",
            spec.kind()
        )));
    }
    let folds = inner_folds(train, is_target, seed)?;
    if let DescriptorSpec::Lof { k } = *spec {
        let max = lof_cv_max(&folds, is_target.iter().filter(|&&t| t).count());
        if k == 0 || k > max {
            return Err(Error::Domain {
                name: "k",
                value: k as f64,
                min: 1.0,
                max: max as f64,
            });
        }
    }
    cv_mean(&folds, |fold| {
        FittedModel::fit(spec, fold.fit_targets.view())?.score(fold.validation.view())
    })
}

/// Largest LOF `k` every fold supports, capped at `ceil(100 ln n)`.
pub fn lof_cv_max(folds: &[InnerFold], n_targets: usize) -> usize {
    folds
        .iter()
        .map(|f| f.fit_targets.nrows().saturating_sub(1))
        .min()
        .unwrap_or(0)
        .min(log_k_cap(n_targets))
}

/// Per-fold neighbour tables at `k_max`, shared by every LOF evaluation.
#[derive(Debug, Clone)]
pub struct LofCv {
    k_max: usize,
    folds: Vec<(InnerFold, NeighborTable, NeighborTable)>,
}

impl LofCv {
    pub fn new(train: ArrayView2<'_, f64>, is_target: &[bool], seed: u64) -> Result<Self> {
        let folds = inner_folds(train, is_target, seed)?;
        let k_max = lof_cv_max(&folds, is_target.iter().filter(|&&t| t).count());
        if k_max == 0 {
            return Err(Error::TooFewPoints {
                needed: 2,
                available: 1,
            });
        }
        let folds = folds
            .into_iter()
            .map(|fold| {
                let index = NeighborIndex::build(fold.fit_targets.view())?;
                let own = index.query_loo(k_max)?;
                let val = index.query(fold.validation.view(), k_max)?;
                Ok((fold, own, val))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { k_max, folds })
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn evaluate(&self, k: usize) -> Result<f64> {
        if k == 0 || k > self.k_max {
            return Err(Error::Domain {
                name: "k",
                value: k as f64,
                min: 1.0,
                max: self.k_max as f64,
            });
        }
        let mut sum = 0.0;
        for (fold, own, val) in &self.folds {
            let scores = LofTrainStats::from_table(own, k).scores(val);
            sum += fold_auroc(fold, &scores)?;
        }
        Ok(sum / self.folds.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn problem(seed: u64, n_t: usize, n_o: usize) -> (Array2<f64>, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<bool> = (0..n_t + n_o).map(|i| i % (n_t + n_o) < n_t).collect();
        let x = Array2::from_shape_fn((n_t + n_o, 2), |(i, _)| {
            rng.random_range(0.0..1.0) + if labels[i] { 0.0 } else { 0.6 }
        });
        (x, labels)
    }

    #[test]
    fn constant_scorer_gives_half() {
        let (x, y) = problem(1, 25, 15);
        let folds = inner_folds(x.view(), &y, 3).unwrap();
        let v = cv_mean(&folds, |f| Ok(vec![0.0; f.validation.nrows()])).unwrap();
        assert_eq!(v, 0.5);
    }

    #[test]
    fn deterministic_under_seed() {
        let (x, y) = problem(2, 25, 15);
        let spec = DescriptorSpec::Svm { nu: 0.3, c_prime: 0.5 };
        let a = cv5_validate(x.view(), &y, &spec, 11).unwrap();
        let b = cv5_validate(x.view(), &y, &spec, 11).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn cached_lof_matches_refit() {
        for seed in 0..4 {
            let (x, y) = problem(seed, 30, 12);
            let cached = LofCv::new(x.view(), &y, seed).unwrap();
            for k in 1..=cached.k_max() {
                let refit = cv5_validate(x.view(), &y, &DescriptorSpec::Lof { k }, seed).unwrap();
                assert_eq!(cached.evaluate(k).unwrap().to_bits(), refit.to_bits(), "k={k}");
            }
        }
    }

    #[test]
    fn folds_without_others_are_skipped() {
        // 3 non-targets over 5 folds: two validation parts hold targets only
        let (x, y) = problem(5, 20, 3);
        let folds = inner_folds(x.view(), &y, 0).unwrap();
        assert_eq!(folds.len(), 3);
        assert!(folds.iter().all(|f| f.validation_is_target.contains(&false)));
    }

    #[test]
    fn rejects_loo_descriptors() {
        let (x, y) = problem(6, 20, 10);
        assert!(cv5_validate(x.view(), &y, &DescriptorSpec::Nnd { k: 1 }, 0).is_err());
    }

    #[test]
    fn fold_order_does_not_matter() {
        let (x, y) = problem(7, 25, 15);
        let mut folds = inner_folds(x.view(), &y, 1).unwrap();
        let scorer = |f: &InnerFold| {
            FittedModel::fit(&DescriptorSpec::Lof { k: 3 }, f.fit_targets.view())?.score(f.validation.view())
        };
        let a = cv_mean(&folds, scorer).unwrap();
        folds.reverse();
        let b = cv_mean(&folds, scorer).unwrap();
        assert!((a - b).abs() <= 1e-15);
    }
}
