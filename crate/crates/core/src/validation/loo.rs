//! Efficient leave-one-out validation for NND, LNND and ALP.
//!
//! One self-excluded neighbour query over the target set and one query for
//! the non-target instances serve every hyperparameter value. Targets are
//! scored as if the model had been refitted without them; non-targets are
//! scored against the model fitted on all targets. All scores are pooled into
//! a single AUROC.

use ndarray::{ArrayView2, Axis};

use super::auroc::auroc;
use crate::descriptors::{alp_truncation, linear_weights, localised_alp, negated, zero_rule_ratio};
use crate::error::{Error, Result};
use crate::neighbors::{NeighborIndex, NeighborTable};

/// `ceil(100 ln n)`, the logarithmic cap on `k` for NND, LNND and LOF.
pub fn log_k_cap(n: usize) -> usize {
    ((100.0 * (n.max(1) as f64).ln()).ceil() as usize).max(1)
}

/// Largest admissible `k` for NND under leave-one-out (one target held out).
pub fn nnd_loo_max(n_targets: usize) -> usize {
    n_targets.saturating_sub(1).min(log_k_cap(n_targets))
}

/// Largest admissible `k` for LNND under leave-one-out; the correction needs
/// one extra neighbour.
pub fn lnnd_loo_max(n_targets: usize) -> usize {
    n_targets.saturating_sub(2).min(log_k_cap(n_targets))
}

fn domain_error(name: &'static str, value: usize, max: usize) -> Error {
    Error::Domain {
        name,
        value: value as f64,
        min: 1.0,
        max: max as f64,
    }
}

/// Shared neighbour tables for leave-one-out validation.
#[derive(Debug, Clone)]
pub struct LooState {
    n_targets: usize,
    own: NeighborTable,
    others: NeighborTable,
}

impl LooState {
    /// `own_depth` neighbours of each target among the other targets and
    /// `other_depth` target neighbours of each non-target.
    pub fn new(
        train: ArrayView2<'_, f64>,
        is_target: &[bool],
        own_depth: usize,
        other_depth: usize,
    ) -> Result<Self> {
        let target_rows: Vec<usize> = (0..is_target.len()).filter(|&i| is_target[i]).collect();
        let other_rows: Vec<usize> = (0..is_target.len()).filter(|&i| !is_target[i]).collect();
        if other_rows.is_empty() {
            return Err(Error::InvalidInput(
                "leave-one-out validation needs non-target instances".into(),
            ));
        }
        let targets = train.select(Axis(0), &target_rows);
        let index = NeighborIndex::build(targets.view())?;
        let own = index.query_loo(own_depth)?;
        let others = index.query(train.select(Axis(0), &other_rows).view(), other_depth)?;
        Ok(Self {
            n_targets: target_rows.len(),
            own,
            others,
        })
    }

    /// Tables deep enough for every `k <= k_max` of NND.
    pub fn for_nnd(train: ArrayView2<'_, f64>, is_target: &[bool], k_max: usize) -> Result<Self> {
        Self::new(train, is_target, k_max, k_max)
    }

    pub fn for_lnnd(train: ArrayView2<'_, f64>, is_target: &[bool], k_max: usize) -> Result<Self> {
        Self::new(train, is_target, k_max + 1, k_max)
    }

    pub fn for_alp(train: ArrayView2<'_, f64>, is_target: &[bool]) -> Result<Self> {
        let n = is_target.iter().filter(|&&t| t).count();
        if n < 3 {
            return Err(Error::TooFewPoints {
                needed: 3,
                available: n,
            });
        }
        let full = alp_truncation(n);
        let reduced = alp_truncation(n - 1);
        Self::new(train, is_target, full.max(reduced + 1), full)
    }

    pub fn n_targets(&self) -> usize {
        self.n_targets
    }

    pub fn nnd(&self, k: usize) -> Result<f64> {
        let max = nnd_loo_max(self.n_targets).min(self.own.k()).min(self.others.k());
        if k == 0 || k > max {
            return Err(domain_error("k", k, max));
        }
        let targets: Vec<f64> = (0..self.n_targets)
            .map(|r| -self.own.kth_distance(r, k))
            .collect();
        let others: Vec<f64> = (0..self.others.n_queries())
            .map(|q| -self.others.kth_distance(q, k))
            .collect();
        auroc(&targets, &others)
    }

    pub fn lnnd(&self, k: usize) -> Result<f64> {
        let max = lnnd_loo_max(self.n_targets)
            .min(self.own.k() - 1)
            .min(self.others.k());
        if k == 0 || k > max {
            return Err(domain_error("k", k, max));
        }
        let targets: Vec<f64> = (0..self.n_targets)
            .map(|r| {
                let neighbour = self.own.kth_index(r, k);
                // the held-out target may sit among its neighbour's k nearest
                let den = if self.own.indices(neighbour)[..k].contains(&r) {
                    self.own.kth_distance(neighbour, k + 1)
                } else {
                    self.own.kth_distance(neighbour, k)
                };
                negated(zero_rule_ratio(self.own.kth_distance(r, k), den))
            })
            .collect();
        let others: Vec<f64> = (0..self.others.n_queries())
            .map(|q| {
                let neighbour = self.others.kth_index(q, k);
                negated(zero_rule_ratio(
                    self.others.kth_distance(q, k),
                    self.own.kth_distance(neighbour, k),
                ))
            })
            .collect();
        auroc(&targets, &others)
    }

    pub fn alp(&self, k: usize, l: usize) -> Result<f64> {
        let n = self.n_targets;
        if k == 0 || k > 5 * n {
            return Err(domain_error("k", k, 5 * n));
        }
        if l == 0 || l > 5 * n {
            return Err(domain_error("l", l, 5 * n));
        }
        let reduced = alp_truncation(n - 1);
        let full = alp_truncation(n);
        if self.own.k() < full.max(reduced + 1) || self.others.k() < full {
            return Err(Error::InvalidInput(
                "neighbour tables too shallow for ALP leave-one-out".into(),
            ));
        }

        let wk = linear_weights(k, reduced);
        let wl = linear_weights(l, reduced);
        let (kr, lr) = (wk.len(), wl.len());
        let mut scratch: Vec<Vec<f64>> = vec![Vec::with_capacity(kr + 1); lr];
        let targets: Vec<f64> = (0..n)
            .map(|r| {
                // neighbour distances of r's neighbours with r itself removed
                for (j, buf) in scratch.iter_mut().enumerate() {
                    let x = self.own.kth_index(r, j + 1);
                    let dists = &self.own.distances(x)[..=kr];
                    let idx = &self.own.indices(x)[..=kr];
                    buf.clear();
                    match idx.iter().position(|&i| i == r) {
                        Some(pos) => {
                            buf.extend_from_slice(&dists[..pos]);
                            buf.extend_from_slice(&dists[pos + 1..]);
                        }
                        None => buf.extend_from_slice(&dists[..kr]),
                    }
                }
                let views: Vec<&[f64]> = scratch.iter().map(Vec::as_slice).collect();
                localised_alp(&self.own.distances(r)[..kr], &views, &wk, &wl)
            })
            .collect();

        let wk = linear_weights(k, full);
        let wl = linear_weights(l, full);
        let (kf, lf) = (wk.len(), wl.len());
        let others: Vec<f64> = (0..self.others.n_queries())
            .map(|q| {
                let views: Vec<&[f64]> = self.others.indices(q)[..lf]
                    .iter()
                    .map(|&x| &self.own.distances(x)[..kf])
                    .collect();
                localised_alp(&self.others.distances(q)[..kf], &views, &wk, &wl)
            })
            .collect();
        auroc(&targets, &others)
    }
}

pub fn loo_validate_nnd(train: ArrayView2<'_, f64>, is_target: &[bool], k: usize) -> Result<f64> {
    let n = is_target.iter().filter(|&&t| t).count();
    if k == 0 || k > nnd_loo_max(n) {
        return Err(domain_error("k", k, nnd_loo_max(n)));
    }
    LooState::for_nnd(train, is_target, k)?.nnd(k)
}

pub fn loo_validate_lnnd(train: ArrayView2<'_, f64>, is_target: &[bool], k: usize) -> Result<f64> {
    let n = is_target.iter().filter(|&&t| t).count();
    if k == 0 || k > lnnd_loo_max(n) {
        return Err(domain_error("k", k, lnnd_loo_max(n)));
    }
    LooState::for_lnnd(train, is_target, k)?.lnnd(k)
}

pub fn loo_validate_alp(
    train: ArrayView2<'_, f64>,
    is_target: &[bool],
    k: usize,
    l: usize,
) -> Result<f64> {
    LooState::for_alp(train, is_target)?.alp(k, l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptors::{DescriptorSpec, FittedModel};
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Refit without each target in turn; non-targets use the full model.
    fn naive(train: &Array2<f64>, is_target: &[bool], spec: DescriptorSpec) -> f64 {
        let targets: Vec<usize> = (0..is_target.len()).filter(|&i| is_target[i]).collect();
        let others: Vec<usize> = (0..is_target.len()).filter(|&i| !is_target[i]).collect();
        let target_scores: Vec<f64> = targets
            .iter()
            .map(|&held| {
                let keep: Vec<usize> = targets.iter().copied().filter(|&i| i != held).collect();
                let model = FittedModel::fit(&spec, train.select(Axis(0), &keep).view()).unwrap();
                model.score_one(&train.row(held).to_vec()).unwrap()
            })
            .collect();
        let full = FittedModel::fit(&spec, train.select(Axis(0), &targets).view()).unwrap();
        let other_scores = full.score(train.select(Axis(0), &others).view()).unwrap();
        auroc(&target_scores, &other_scores).unwrap()
    }

    fn random_problem(rng: &mut ChaCha8Rng, n_t: usize, n_o: usize, d: usize) -> (Array2<f64>, Vec<bool>) {
        let n = n_t + n_o;
        let mut labels: Vec<bool> = (0..n).map(|i| i < n_t).collect();
        // interleave labels so row order does not encode the class
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            labels.swap(i, j);
        }
        let data = Array2::from_shape_fn((n, d), |(i, _)| {
            let shift = if labels[i] { 0.0 } else { 0.7 };
            // coarse grid values create ties and duplicates
            (rng.random_range(0.0..3.0f64) + shift).round() / 2.0
        });
        (data, labels)
    }

    #[test]
    fn nnd_matches_naive_refit() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..15 {
            let (x, y) = random_problem(&mut rng, 12, 8, 2);
            for k in 1..=nnd_loo_max(12) {
                let fast = loo_validate_nnd(x.view(), &y, k).unwrap();
                assert!((fast - naive(&x, &y, DescriptorSpec::Nnd { k })).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn lnnd_matches_naive_refit() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..15 {
            let (x, y) = random_problem(&mut rng, 10, 7, 3);
            let state = LooState::for_lnnd(x.view(), &y, lnnd_loo_max(10)).unwrap();
            for k in 1..=lnnd_loo_max(10) {
                let expected = naive(&x, &y, DescriptorSpec::Lnnd { k });
                assert!((state.lnnd(k).unwrap() - expected).abs() <= 1e-12, "k={k}");
            }
        }
    }

    #[test]
    fn lnnd_correction_branches() {
        // targets 0, 1, 10 (1-D); held-out 0 is the nearest neighbour of its
        // neighbour 1, so the corrected denominator is 1's distance to 10
        let x = array![[0.0], [1.0], [10.0], [4.0]];
        let y = [true, true, true, false];
        let state = LooState::for_lnnd(x.view(), &y, 1).unwrap();
        assert_eq!(state.lnnd(1).unwrap(), naive(&x, &y, DescriptorSpec::Lnnd { k: 1 }));
        // without the correction target 0 would score -1/1 = -1; corrected it is -1/9
        let own = &state.own;
        assert!(own.indices(1)[..1].contains(&0));
        assert_eq!(own.kth_distance(1, 2), 9.0);
        // target 10's neighbour 1 does not list 10 among its nearest: no-op
        assert!(!own.indices(1)[..1].contains(&2));
    }

    #[test]
    fn alp_matches_naive_refit() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let (x, y) = random_problem(&mut rng, 9, 6, 2);
            let state = LooState::for_alp(x.view(), &y).unwrap();
            for k in [1, 2, 5, 30] {
                for l in [1, 3, 8, 45] {
                    let expected = naive(&x, &y, DescriptorSpec::Alp { k, l });
                    assert!((state.alp(k, l).unwrap() - expected).abs() <= 1e-12, "k={k} l={l}");
                }
            }
        }
    }

    #[test]
    fn single_other_instance_is_valid() {
        let x = array![[0.0], [1.0], [2.0], [5.0]];
        let y = [true, true, true, false];
        let v = loo_validate_nnd(x.view(), &y, 1).unwrap();
        assert!((0.0..=1.0).contains(&v));
        assert_eq!(v, 1.0);
    }

    #[test]
    fn domain_violations() {
        let x = array![[0.0], [1.0], [2.0], [5.0]];
        let y = [true, true, true, false];
        assert!(loo_validate_nnd(x.view(), &y, 3).is_err());
        assert!(loo_validate_lnnd(x.view(), &y, 2).is_err());
        assert!(loo_validate_lnnd(x.view(), &y, 1).is_ok());
        assert!(loo_validate_alp(x.view(), &y, 16, 1).is_err());
    }
}
