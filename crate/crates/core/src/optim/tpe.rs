//! Tree-structured Parzen estimator over the unit box.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use super::random::uniform_point;
use super::{Budget, Objective, OptimiserKind, Search, SearchResult, Trial};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TpeOptions {
    /// Fraction of the history treated as good.
    pub gamma: f64,
    /// Proposals drawn uniformly before the estimators take over.
    pub warmup: usize,
    pub candidates: usize,
    pub min_bandwidth: f64,
    /// Bandwidths are also at least `bandwidth_floor / min(100, n + 1)` for
    /// a set of `n` samples, which keeps the estimators from collapsing.
    pub bandwidth_floor: f64,
}

impl Default for TpeOptions {
    fn default() -> Self {
        Self {
            gamma: 0.25,
            warmup: 10,
            candidates: 24,
            min_bandwidth: 1e-3,
            bandwidth_floor: 0.5,
        }
    }
}

/// Indices of the good (top `ceil(gamma t)` values) and bad trials. Ties
/// keep history order.
pub fn tpe_split(values: &[f64], gamma: f64) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let n_good = ((gamma * values.len() as f64).ceil() as usize).min(values.len());
    let bad = order.split_off(n_good);
    (order, bad)
}

/// Broad component shared by both estimators; bounds the bad-set density
/// away from zero so the ratio is not driven by its tails.
const PRIOR: (f64, f64) = (0.5, 1.0);

/// Product over dimensions of equally weighted Gaussian mixtures truncated
/// to `[0, 1]`: one component per sample plus the prior.
#[derive(Debug, Clone)]
pub struct ParzenEstimator {
    /// `components[d]` holds `(mean, bandwidth)` pairs of dimension `d`,
    /// the prior last.
    components: Vec<Vec<(f64, f64)>>,
}

impl ParzenEstimator {
    /// Bandwidth of each sample is its larger gap to the adjacent sorted
    /// samples, at least `min_bandwidth` and at least
    /// `bandwidth_floor / min(100, n + 1)`; a lone sample gets 0.5.
    pub fn fit(points: &[&[f64]], min_bandwidth: f64, bandwidth_floor: f64) -> Self {
        let dim = points.first().map_or(0, |p| p.len());
        let n = points.len();
        let floor = min_bandwidth.max(bandwidth_floor / (n + 1).min(100) as f64);
        let components = (0..dim)
            .map(|d| {
                let mut xs: Vec<f64> = points.iter().map(|p| p[d]).collect();
                xs.sort_by(f64::total_cmp);
                (0..n)
                    .map(|i| {
                        let sigma = if n == 1 {
                            0.5
                        } else {
                            let left = if i > 0 { xs[i] - xs[i - 1] } else { 0.0 };
                            let right = if i + 1 < n { xs[i + 1] - xs[i] } else { 0.0 };
                            left.max(right).max(floor).min(1.0)
                        };
                        (xs[i], sigma)
                    })
                    .chain(std::iter::once(PRIOR))
                    .collect()
            })
            .collect();
        Self { components }
    }

    pub fn bandwidths(&self, d: usize) -> Vec<f64> {
        let comps = &self.components[d];
        comps[..comps.len() - 1].iter().map(|&(_, s)| s).collect()
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        self.components
            .iter()
            .zip(x)
            .map(|(comps, &xd)| {
                let sum: f64 = comps
                    .iter()
                    .map(|&(mu, sigma)| {
                        let n = Normal::new(mu, sigma).expect("positive bandwidth");
                        let mass = n.cdf(1.0) - n.cdf(0.0);
                        n.pdf(xd) / mass.max(f64::MIN_POSITIVE)
                    })
                    .sum();
                (sum / comps.len() as f64).ln()
            })
            .sum()
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.components
            .iter()
            .map(|comps| {
                let (mu, sigma) = comps[rng.random_range(0..comps.len())];
                let n = Normal::new(mu, sigma).expect("positive bandwidth");
                let (lo, hi) = (n.cdf(0.0), n.cdf(1.0));
                let u: f64 = rng.random();
                if hi - lo < 1e-12 {
                    return mu.clamp(0.0, 1.0);
                }
                n.inverse_cdf(lo + u * (hi - lo)).clamp(0.0, 1.0)
            })
            .collect()
    }
}

/// Next TPE proposal from a history, or `None` when the history cannot be
/// split into distinguishable good and bad sets.
fn propose_from_history(trials: &[Trial], options: &TpeOptions, rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
    let values: Vec<f64> = trials.iter().map(|t| t.value).collect();
    if values.iter().all(|&v| v == values[0]) {
        return None;
    }
    let (good, bad) = tpe_split(&values, options.gamma);
    if bad.is_empty() {
        return None;
    }
    let pts = |idx: &[usize]| idx.iter().map(|&i| trials[i].coords.as_slice()).collect::<Vec<_>>();
    let l = ParzenEstimator::fit(&pts(&good), options.min_bandwidth, options.bandwidth_floor);
    let g = ParzenEstimator::fit(&pts(&bad), options.min_bandwidth, options.bandwidth_floor);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..options.candidates {
        let x = l.sample(rng);
        let ratio = l.log_density(&x) - g.log_density(&x);
        if best.as_ref().is_none_or(|(r, _)| ratio > *r) {
            best = Some((ratio, x));
        }
    }
    best.map(|(_, x)| x)
}

/// Uniform warm-up, then proposals maximising the good-over-bad density ratio.
pub fn tpe<O: Objective + ?Sized>(objective: &mut O, budget: Budget, options: &TpeOptions) -> Result<SearchResult> {
    let constants = serde_json::json!({
        "gamma": options.gamma,
        "warmup": options.warmup,
        "candidates": options.candidates,
        "min_bandwidth": options.min_bandwidth,
        "bandwidth_floor": options.bandwidth_floor,
    });
    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    let dim = objective.dim();
    let mut search = Search::new(objective, budget);
    loop {
        let x = if search.trials().len() < options.warmup {
            uniform_point(&mut rng, dim)
        } else {
            propose_from_history(search.trials(), options, &mut rng)
                .unwrap_or_else(|| uniform_point(&mut rng, dim))
        };
        if search.propose(&x)?.is_none() {
            break;
        }
    }
    Ok(search.finish(OptimiserKind::Tpe, constants))
}
