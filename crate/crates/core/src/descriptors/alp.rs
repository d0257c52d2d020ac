use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::weights::{linear_weights, owa, WeightVector};
use super::zero_rule_ratio;
use crate::error::{Error, Result};
use crate::neighbors::{NeighborIndex, NeighborTable};

/// Number of neighbour distances kept for a target set of `n` instances:
/// `min(n - 1, ceil(20 ln n))`. Capped at `n - 1` because neighbours of
/// neighbours are taken among the other target instances.
pub fn alp_truncation(n: usize) -> usize {
    if n < 2 {
        return 0;
    }
    let log_cap = (20.0 * (n as f64).ln()).ceil() as usize;
    (n - 1).min(log_cap).max(1)
}

/// Ordered weighted average of localised proximities.
///
/// `query_dists[i]` is the distance from the query to its `(i+1)`th target
/// neighbour; `neighbour_dists[j][i]` the `(i+1)`th neighbour distance of the
/// query's `(j+1)`th neighbour. Slices must cover `wk.len()` and `wl.len()`.
pub fn localised_alp(query_dists: &[f64], neighbour_dists: &[&[f64]], wk: &[f64], wl: &[f64]) -> f64 {
    let mut proximities: Vec<f64> = (0..wk.len())
        .map(|i| {
            let local: f64 = wl
                .iter()
                .zip(neighbour_dists)
                .map(|(w, dists)| w * dists[i])
                .sum();
            zero_rule_ratio(local, local + query_dists[i])
        })
        .collect();
    owa(&mut proximities, wk)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlpModel {
    pub k: usize,
    pub l: usize,
    truncation: usize,
    index: NeighborIndex,
    own: NeighborTable,
    wk: WeightVector,
    wl: WeightVector,
}

impl AlpModel {
    pub fn fit(target: ArrayView2<'_, f64>, k: usize, l: usize) -> Result<Self> {
        let n = target.nrows();
        if n < 2 {
            return Err(Error::TooFewPoints {
                needed: 2,
                available: n,
            });
        }
        let truncation = alp_truncation(n);
        let index = NeighborIndex::build(target)?;
        let own = index.query_loo(truncation)?;
        Ok(Self {
            k,
            l,
            truncation,
            index,
            own,
            wk: linear_weights(k, truncation),
            wl: linear_weights(l, truncation),
        })
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn score(&self, queries: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        let depth = self.wk.len().max(self.wl.len());
        let table = self.index.query(queries, depth)?;
        let k = self.wk.len();
        Ok((0..table.n_queries())
            .map(|q| {
                let neighbour_dists: Vec<&[f64]> = table.indices(q)[..self.wl.len()]
                    .iter()
                    .map(|&x| &self.own.distances(x)[..k])
                    .collect();
                localised_alp(&table.distances(q)[..k], &neighbour_dists, &self.wk, &self.wl)
            })
            .collect())
    }
}
