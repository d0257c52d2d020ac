//! Exact Manhattan k-nearest-neighbour queries.
//!
//! A single query at `k_max` yields sorted tables that serve every `k <= k_max`,
//! so hyperparameter searches over `k` never re-query.

use std::cmp::Ordering;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn manhattan(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Ascending distance, ties broken by ascending reference index.
fn by_distance_then_index(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Brute-force index over a reference point set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NeighborIndex {
    points: Array2<f64>,
}

impl NeighborIndex {
    pub fn build(points: ArrayView2<'_, f64>) -> Result<Self> {
        if points.nrows() == 0 {
            return Err(Error::InvalidInput("empty reference point set".into()));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite reference coordinate".into()));
        }
        Ok(Self {
            points: points.as_standard_layout().into_owned(),
        })
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    fn row(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.points.as_slice().expect("standard layout")[i * d..(i + 1) * d]
    }

    fn nearest(&self, query: &[f64], k: usize) -> Vec<(f64, usize)> {
        let mut all: Vec<(f64, usize)> = (0..self.len())
            .map(|i| (manhattan(query, self.row(i)), i))
            .collect();
        if k < all.len() {
            all.select_nth_unstable_by(k - 1, by_distance_then_index);
            all.truncate(k);
        }
        all.sort_unstable_by(by_distance_then_index);
        all
    }

    /// The `k_max` nearest references of every query row.
    pub fn query(&self, queries: ArrayView2<'_, f64>, k_max: usize) -> Result<NeighborTable> {
        if k_max == 0 || k_max > self.len() {
            return Err(Error::InvalidInput(format!(
                "k_max={k_max} must lie in [1, {}]",
                self.len()
            )));
        }
        if queries.ncols() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "query width {} differs from reference width {}",
                queries.ncols(),
                self.dim()
            )));
        }
        let queries = queries.as_standard_layout();
        let d = self.dim();
        let flat = queries.as_slice().expect("standard layout");
        let rows: Vec<Vec<(f64, usize)>> = (0..queries.nrows())
            .into_par_iter()
            .map(|q| self.nearest(&flat[q * d..(q + 1) * d], k_max))
            .collect();
        Ok(NeighborTable::from_rows(k_max, rows, false))
    }

    /// Neighbours of every reference point among the *other* reference
    /// points. Queries `k_max + 1` and drops the entry carrying the query's own
    /// row index (or the last entry when duplicates push it out).
    pub fn query_loo(&self, k_max: usize) -> Result<NeighborTable> {
        if k_max == 0 || k_max >= self.len() {
            return Err(Error::InvalidInput(format!(
                "leave-one-out k_max={k_max} must lie in [1, {}]",
                self.len().saturating_sub(1)
            )));
        }
        let rows: Vec<Vec<(f64, usize)>> = (0..self.len())
            .into_par_iter()
            .map(|i| {
                let mut row = self.nearest(self.row(i), k_max + 1);
                match row.iter().position(|&(_, j)| j == i) {
                    Some(pos) => {
                        row.remove(pos);
                    }
                    None => {
                        row.pop();
                    }
                }
                row
            })
            .collect();
        Ok(NeighborTable::from_rows(k_max, rows, true))
    }
}

/// Sorted neighbour distances and indices, `k` per query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborTable {
    k: usize,
    distances: Vec<f64>,
    indices: Vec<usize>,
    self_excluded: bool,
}

impl NeighborTable {
    fn from_rows(k: usize, rows: Vec<Vec<(f64, usize)>>, self_excluded: bool) -> Self {
        let mut distances = Vec::with_capacity(rows.len() * k);
        let mut indices = Vec::with_capacity(rows.len() * k);
        for row in rows {
            debug_assert_eq!(row.len(), k);
            for (d, i) in row {
                distances.push(d);
                indices.push(i);
            }
        }
        Self {
            k,
            distances,
            indices,
            self_excluded,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_queries(&self) -> usize {
        self.distances.len().checked_div(self.k).unwrap_or(0)
    }

    pub fn self_excluded(&self) -> bool {
        self.self_excluded
    }

    pub fn distances(&self, q: usize) -> &[f64] {
        &self.distances[q * self.k..(q + 1) * self.k]
    }

    pub fn indices(&self, q: usize) -> &[usize] {
        &self.indices[q * self.k..(q + 1) * self.k]
    }

    /// Distance to the `k`th (1-based) neighbour of query `q`.
    pub fn kth_distance(&self, q: usize, k: usize) -> f64 {
        self.distances[q * self.k + k - 1]
    }

    pub fn kth_index(&self, q: usize, k: usize) -> usize {
        self.indices[q * self.k + k - 1]
    }

    /// Keeps only the first `k` neighbours of every query.
    pub fn truncated(&self, k: usize) -> NeighborTable {
        assert!(k <= self.k, "cannot widen a neighbour table");
        let n = self.n_queries();
        let mut distances = Vec::with_capacity(n * k);
        let mut indices = Vec::with_capacity(n * k);
        for q in 0..n {
            distances.extend_from_slice(&self.distances(q)[..k]);
            indices.extend_from_slice(&self.indices(q)[..k]);
        }
        NeighborTable {
            k,
            distances,
            indices,
            self_excluded: self.self_excluded,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Axis};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force(refs: &Array2<f64>, q: &[f64], k: usize) -> Vec<(f64, usize)> {
        let mut all: Vec<(f64, usize)> = refs
            .outer_iter()
            .enumerate()
            .map(|(i, r)| {
                let d: f64 = r.iter().zip(q).map(|(a, b)| (a - b).abs()).sum();
                (d, i)
            })
            .collect();
        all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        all.truncate(k);
        all
    }

    fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn single_point_index() {
        let idx = NeighborIndex::build(array![[1.0, 2.0]].view()).unwrap();
        assert_eq!(idx.len(), 1);
    }

    #[test]
    fn rejects_empty_and_nan() {
        assert!(NeighborIndex::build(Array2::<f64>::zeros((0, 2)).view()).is_err());
        assert!(NeighborIndex::build(array![[f64::NAN, 0.0]].view()).is_err());
    }

    #[test]
    fn ties_break_by_lower_index() {
        let idx = NeighborIndex::build(array![[0.0], [1.0], [3.0]].view()).unwrap();
        let t = idx.query(array![[2.0]].view(), 2).unwrap();
        assert_eq!(t.distances(0), &[1.0, 1.0]);
        assert_eq!(t.indices(0), &[1, 2]);
        let exact = idx.query(array![[3.0]].view(), 1).unwrap();
        assert_eq!(exact.distances(0), &[0.0]);
        assert!(idx.query(array![[0.0]].view(), 4).is_err());
    }

    #[test]
    fn loo_excludes_self() {
        let idx = NeighborIndex::build(array![[0.0], [1.0], [3.0]].view()).unwrap();
        let t = idx.query_loo(2).unwrap();
        assert_eq!(t.distances(0), &[1.0, 3.0]);
        assert!(t.self_excluded());
        assert!(idx.query_loo(3).is_err());

        let dup = NeighborIndex::build(array![[0.0], [0.0]].view()).unwrap();
        let t = dup.query_loo(1).unwrap();
        assert_eq!(t.distances(0), &[0.0]);
        assert_eq!(t.indices(0), &[1]);
        assert_eq!(t.indices(1), &[0]);
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let refs = random_points(&mut rng, 50, 3);
        let queries = random_points(&mut rng, 20, 3);
        let idx = NeighborIndex::build(refs.view()).unwrap();
        let t = idx.query(queries.view(), 50).unwrap();
        for (q, row) in queries.outer_iter().enumerate() {
            let expected = brute_force(&refs, row.as_slice().unwrap(), 50);
            assert_eq!(t.distances(q), expected.iter().map(|e| e.0).collect::<Vec<_>>());
            assert_eq!(t.indices(q), expected.iter().map(|e| e.1).collect::<Vec<_>>());
        }
    }

    #[test]
    fn large_index_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let refs = random_points(&mut rng, 1000, 10);
        let queries = random_points(&mut rng, 10, 10);
        let t = NeighborIndex::build(refs.view())
            .unwrap()
            .query(queries.view(), 7)
            .unwrap();
        for (q, row) in queries.outer_iter().enumerate() {
            let expected = brute_force(&refs, row.as_slice().unwrap(), 7);
            assert_eq!(t.indices(q), expected.iter().map(|e| e.1).collect::<Vec<_>>());
        }
    }

    #[test]
    fn loo_matches_rebuild_without_self() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // rounded coordinates force ties and duplicates
        let refs = random_points(&mut rng, 30, 2).mapv(|v| (v * 3.0).round());
        let idx = NeighborIndex::build(refs.view()).unwrap();
        let k = 6;
        let t = idx.query_loo(k).unwrap();
        for i in 0..refs.nrows() {
            let keep: Vec<usize> = (0..refs.nrows()).filter(|&j| j != i).collect();
            let reduced = refs.select(Axis(0), &keep);
            let expected = brute_force(&reduced, refs.row(i).as_slice().unwrap(), k);
            assert_eq!(t.distances(i), expected.iter().map(|e| e.0).collect::<Vec<_>>());
            let mapped: Vec<usize> = expected.iter().map(|e| keep[e.1]).collect();
            assert_eq!(t.indices(i), mapped);
            assert!(!t.indices(i).contains(&i));
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn smaller_k_is_prefix(seed: u64, k1 in 1usize..10, extra in 0usize..10) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let refs = random_points(&mut rng, 20, 2).mapv(|v| (v * 4.0).round());
                let queries = random_points(&mut rng, 5, 2);
                let idx = NeighborIndex::build(refs.view()).unwrap();
                let k2 = (k1 + extra).min(20);
                let small = idx.query(queries.view(), k1).unwrap();
                let large = idx.query(queries.view(), k2).unwrap();
                prop_assert_eq!(small, large.truncated(k1));
            }

            #[test]
            fn triangle_inequality(
                a in proptest::collection::vec(-1e3f64..1e3, 4),
                b in proptest::collection::vec(-1e3f64..1e3, 4),
                c in proptest::collection::vec(-1e3f64..1e3, 4),
            ) {
                prop_assert!(manhattan(&a, &c) <= manhattan(&a, &b) + manhattan(&b, &c) + 1e-12 * 1e4);
                prop_assert_eq!(manhattan(&a, &b), manhattan(&b, &a));
                prop_assert_eq!(manhattan(&a, &a), 0.0);
            }
        }
    }
}
