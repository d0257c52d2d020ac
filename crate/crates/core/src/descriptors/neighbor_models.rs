use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::{negated, zero_rule_ratio};
use crate::error::Result;
use crate::neighbors::{NeighborIndex, NeighborTable};

/// Negated distance to the `k`th nearest target instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NndModel {
    pub k: usize,
    index: NeighborIndex,
}

impl NndModel {
    pub fn fit(target: ArrayView2<'_, f64>, k: usize) -> Result<Self> {
        Ok(Self {
            k,
            index: NeighborIndex::build(target)?,
        })
    }

    pub fn score(&self, queries: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        let table = self.index.query(queries, self.k)?;
        Ok(nnd_scores(&table, self.k))
    }
}

pub(crate) fn nnd_scores(table: &NeighborTable, k: usize) -> Vec<f64> {
    (0..table.n_queries())
        .map(|q| -table.kth_distance(q, k))
        .collect()
}

/// `k`th neighbour distance relative to that neighbour's own `k`th neighbour
/// distance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LnndModel {
    pub k: usize,
    index: NeighborIndex,
    /// `k`th neighbour distance of each target instance among the others.
    kdist: Vec<f64>,
}

impl LnndModel {
    pub fn fit(target: ArrayView2<'_, f64>, k: usize) -> Result<Self> {
        let index = NeighborIndex::build(target)?;
        let own = index.query_loo(k)?;
        let kdist = (0..own.n_queries()).map(|x| own.kth_distance(x, k)).collect();
        Ok(Self { k, index, kdist })
    }

    pub fn score(&self, queries: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        let table = self.index.query(queries, self.k)?;
        let k = self.k;
        Ok((0..table.n_queries())
            .map(|q| {
                let neighbour = table.kth_index(q, k);
                negated(zero_rule_ratio(table.kth_distance(q, k), self.kdist[neighbour]))
            })
            .collect())
    }
}

/// Per-target-instance quantities LOF needs at a given `k`: the `k`-distance
/// and the mean reachability distance to its `k` neighbours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LofTrainStats {
    pub k: usize,
    pub kdist: Vec<f64>,
    pub mean_reach: Vec<f64>,
}

impl LofTrainStats {
    /// `own` must be a self-excluded table over the target set with depth >= k.
    pub fn from_table(own: &NeighborTable, k: usize) -> Self {
        debug_assert!(own.self_excluded() && own.k() >= k);
        let n = own.n_queries();
        let kdist: Vec<f64> = (0..n).map(|x| own.kth_distance(x, k)).collect();
        let mean_reach = (0..n)
            .map(|x| mean_reach_distance(&own.distances(x)[..k], &own.indices(x)[..k], &kdist))
            .collect();
        Self {
            k,
            kdist,
            mean_reach,
        }
    }

    /// Scores queries from their neighbour table (depth >= k) into the target set.
    pub fn scores(&self, queries: &NeighborTable) -> Vec<f64> {
        let k = self.k;
        (0..queries.n_queries())
            .map(|q| {
                let dists = &queries.distances(q)[..k];
                let idx = &queries.indices(q)[..k];
                let own = mean_reach_distance(dists, idx, &self.kdist);
                let lof = idx
                    .iter()
                    .map(|&x| zero_rule_ratio(own, self.mean_reach[x]))
                    .sum::<f64>()
                    / k as f64;
                negated(lof)
            })
            .collect()
    }
}

fn mean_reach_distance(dists: &[f64], idx: &[usize], kdist: &[f64]) -> f64 {
    dists
        .iter()
        .zip(idx)
        .map(|(&d, &b)| d.max(kdist[b]))
        .sum::<f64>()
        / dists.len() as f64
}

/// Local outlier factor. The local reachability density ratio
/// `lrd(x) / lrd(y)` is evaluated as `reach(y) / reach(x)` so the zero rule
/// covers both infinite densities.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LofModel {
    pub k: usize,
    index: NeighborIndex,
    stats: LofTrainStats,
}

impl LofModel {
    pub fn fit(target: ArrayView2<'_, f64>, k: usize) -> Result<Self> {
        let index = NeighborIndex::build(target)?;
        let own = index.query_loo(k)?;
        let stats = LofTrainStats::from_table(&own, k);
        Ok(Self { k, index, stats })
    }

    pub fn score(&self, queries: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        let table = self.index.query(queries, self.k)?;
        Ok(self.stats.scores(&table))
    }
}
