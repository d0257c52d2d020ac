//! Dataset-equal weighting, the clustered Wilcoxon signed-rank test,
//! Holm-Bonferroni correction and a weighted Kendall's τ.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemWeight {
    pub problem: String,
    pub dataset: String,
    pub weight: f64,
}

/// Every dataset contributes equally: a problem's weight is
/// `1 / (problems in its dataset × datasets)`.
pub fn problem_weights<P: AsRef<str>, D: AsRef<str>>(problems: &[(P, D)]) -> Vec<ProblemWeight> {
    let mut per_dataset: BTreeMap<&str, usize> = BTreeMap::new();
    for (_, d) in problems {
        *per_dataset.entry(d.as_ref()).or_default() += 1;
    }
    let n_datasets = per_dataset.len() as f64;
    problems
        .iter()
        .map(|(p, d)| ProblemWeight {
            problem: p.as_ref().to_string(),
            dataset: d.as_ref().to_string(),
            weight: 1.0 / (per_dataset[d.as_ref()] as f64 * n_datasets),
        })
        .collect()
}

pub fn weighted_mean(values: &[f64], weights: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Stats("weighted mean of an empty list".into()));
    }
    if values.len() != weights.len() {
        return Err(Error::Stats(format!(
            "{} values but {} weights",
            values.len(),
            weights.len()
        )));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::Stats("weights sum to zero".into()));
    }
    Ok(values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / total)
}

/// Ranks `1..=n` of `values` (ascending), ties sharing their mean rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// One paired difference (first minus second) and the dataset it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedSample {
    pub difference: f64,
    pub cluster: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alternative {
    /// Small p when the differences tend to be positive.
    Greater,
    /// Small p when the differences tend to be negative.
    Less,
}

/// Signed-rank statistic and its cluster-robust variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilcoxonStatistic {
    /// Sum of signed ranks over all non-zero differences.
    pub t: f64,
    /// Sum over clusters of the squared within-cluster signed-rank sums.
    pub variance: f64,
    pub z: f64,
}

/// `None` when every difference is zero.
pub fn clustered_wilcoxon_statistic(sample: &[PairedSample]) -> Result<Option<WilcoxonStatistic>> {
    if sample.iter().any(|s| !s.difference.is_finite()) {
        return Err(Error::Stats("non-finite difference".into()));
    }
    let nonzero: Vec<&PairedSample> = sample.iter().filter(|s| s.difference != 0.0).collect();
    if nonzero.is_empty() {
        return Ok(None);
    }
    let abs: Vec<f64> = nonzero.iter().map(|s| s.difference.abs()).collect();
    let ranks = average_ranks(&abs);
    let mut sums: BTreeMap<&str, f64> = BTreeMap::new();
    for (s, r) in nonzero.iter().zip(&ranks) {
        *sums.entry(s.cluster.as_str()).or_default() += r * s.difference.signum();
    }
    if sums.len() < 2 {
        return Err(Error::Stats(format!(
            "clustered Wilcoxon needs at least 2 clusters with non-zero differences, found {}",
            sums.len()
        )));
    }
    let t: f64 = sums.values().sum();
    let variance: f64 = sums.values().map(|s| s * s).sum();
    let z = if variance > 0.0 { t / variance.sqrt() } else { 0.0 };
    Ok(Some(WilcoxonStatistic { t, variance, z }))
}

/// One-sided normal-approximation p-value. All-zero differences give 0.5.
pub fn clustered_wilcoxon(sample: &[PairedSample], alternative: Alternative) -> Result<f64> {
    let Some(stat) = clustered_wilcoxon_statistic(sample)? else {
        return Ok(0.5);
    };
    let normal = Normal::standard();
    Ok(match alternative {
        Alternative::Greater => normal.sf(stat.z),
        Alternative::Less => normal.cdf(stat.z),
    })
}

/// Step-down Holm-Bonferroni adjustment, returned in input order.
pub fn holm_bonferroni(pvalues: &[f64]) -> Vec<f64> {
    let m = pvalues.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvalues[a].total_cmp(&pvalues[b]));
    let mut adjusted = vec![0.0; m];
    let mut running: f64 = 0.0;
    for (j, &i) in order.iter().enumerate() {
        running = running.max(((m - j) as f64 * pvalues[i]).min(1.0));
        adjusted[i] = running;
    }
    adjusted
}

/// Kendall's τ with pair weight `w_i w_j`; pairs tied in either list are
/// left out.
pub fn weighted_kendall_tau(a: &[f64], b: &[f64], weights: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() != weights.len() {
        return Err(Error::Stats("weighted τ needs aligned lists".into()));
    }
    if a.len() < 2 {
        return Err(Error::Stats("weighted τ needs at least two problems".into()));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            let s = ((a[i] - a[j]) * (b[i] - b[j])).signum();
            if a[i] == a[j] || b[i] == b[j] {
                continue;
            }
            let w = weights[i] * weights[j];
            num += w * s;
            den += w;
        }
    }
    if den == 0.0 {
        return Err(Error::Stats("weighted τ undefined: every pair is tied".into()));
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn singletons(d: &[f64]) -> Vec<PairedSample> {
        d.iter()
            .enumerate()
            .map(|(i, &x)| PairedSample {
                difference: x,
                cluster: format!("c{i}"),
            })
            .collect()
    }

    /// Textbook W+ with tie-corrected variance, no continuity correction.
    fn wilcoxon_oracle(d: &[f64]) -> f64 {
        let nz: Vec<f64> = d.iter().copied().filter(|&x| x != 0.0).collect();
        let n = nz.len() as f64;
        let abs: Vec<f64> = nz.iter().map(|x| x.abs()).collect();
        // ranks by counting: 1 + #smaller + (#equal - 1) / 2
        let rank = |v: f64| {
            let smaller = abs.iter().filter(|&&u| u < v).count() as f64;
            let equal = abs.iter().filter(|&&u| u == v).count() as f64;
            smaller + (equal + 1.0) / 2.0
        };
        let w_plus: f64 = nz.iter().filter(|&&x| x > 0.0).map(|x| rank(x.abs())).sum();
        let mut ties: BTreeMap<u64, f64> = BTreeMap::new();
        for a in &abs {
            *ties.entry(a.to_bits()).or_default() += 1.0;
        }
        let tie_term: f64 = ties.values().map(|t| t * t * t - t).sum::<f64>() / 48.0;
        let mean = n * (n + 1.0) / 4.0;
        let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term;
        Normal::standard().sf((w_plus - mean) / var.sqrt())
    }

    #[test]
    fn weighting_examples() {
        let w = problem_weights(&[("a1", "A"), ("a2", "A"), ("a3", "A"), ("b1", "B")]);
        assert_eq!(w[3].weight, 0.5);
        assert!((w.iter().map(|p| p.weight).sum::<f64>() - 1.0).abs() < 1e-15);
        let weights: Vec<f64> = w.iter().map(|p| p.weight).collect();
        let m = weighted_mean(&[0.6, 0.8, 1.0, 0.5], &weights).unwrap();
        assert!((m - 0.65).abs() < 1e-12);
        assert_eq!(weighted_mean(&[1.0, 2.0, 3.0], &[1.0; 3]).unwrap(), 2.0);
        assert!(weighted_mean(&[], &[]).is_err());
    }

    #[test]
    fn singleton_clusters_match_standard_test() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let n = rng.random_range(3..40);
            // coarse values give ties and zeros
            let d: Vec<f64> = (0..n).map(|_| (rng.random_range(-6..9) as f64) / 4.0).collect();
            if d.iter().filter(|&&x| x != 0.0).count() < 2 {
                continue;
            }
            let p = clustered_wilcoxon(&singletons(&d), Alternative::Greater).unwrap();
            assert!((p - wilcoxon_oracle(&d)).abs() <= 1e-6);
        }
    }

    #[test]
    fn negation_maps_p_to_complement() {
        let d = [0.3, -0.1, 0.2, 0.5, 0.05, -0.4, 0.25];
        let neg: Vec<f64> = d.iter().map(|x| -x).collect();
        let p = clustered_wilcoxon(&singletons(&d), Alternative::Greater).unwrap();
        let q = clustered_wilcoxon(&singletons(&neg), Alternative::Greater).unwrap();
        assert!((p + q - 1.0).abs() < 1e-12);
        let r = clustered_wilcoxon(&singletons(&d), Alternative::Less).unwrap();
        assert!((p + r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_differences_give_half() {
        assert_eq!(clustered_wilcoxon(&singletons(&[0.0; 5]), Alternative::Greater).unwrap(), 0.5);
        let one_cluster: Vec<PairedSample> = [0.1, 0.2]
            .iter()
            .map(|&d| PairedSample {
                difference: d,
                cluster: "x".into(),
            })
            .collect();
        assert!(clustered_wilcoxon(&one_cluster, Alternative::Greater).is_err());
    }

    /// Three clusters of 25 observations whose observed cluster-sum variance
    /// lies within 2% of the sum of squared ranks; under independent
    /// within-cluster sign flips both estimate the same null variance.
    fn three_cluster_sample() -> Vec<PairedSample> {
        for seed in 0.. {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sample: Vec<PairedSample> = (0..75)
                .map(|i| PairedSample {
                    difference: rng.random_range(-1.0..1.3),
                    cluster: format!("c{}", i % 3),
                })
                .collect();
            let stat = clustered_wilcoxon_statistic(&sample).unwrap().unwrap();
            let n = 75.0;
            let sum_sq = n * (n + 1.0) * (2.0 * n + 1.0) / 6.0;
            let p = Normal::standard().sf(stat.z);
            if (stat.variance / sum_sq - 1.0).abs() < 0.02 && (0.02..0.3).contains(&p) {
                return sample;
            }
        }
        unreachable!()
    }

    #[test]
    fn three_clusters_match_permutation_oracle() {
        let sample = three_cluster_sample();
        let p = clustered_wilcoxon(&sample, Alternative::Greater).unwrap();
        let abs: Vec<f64> = sample.iter().map(|s| s.difference.abs()).collect();
        let ranks = average_ranks(&abs);
        let observed: f64 = sample.iter().zip(&ranks).map(|(s, r)| r * s.difference.signum()).sum();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let draws = 200_000;
        let mut at_least = 0usize;
        for _ in 0..draws {
            let t: f64 = ranks.iter().map(|r| if rng.random::<bool>() { *r } else { -r }).sum();
            if t >= observed {
                at_least += 1;
            }
        }
        let perm = at_least as f64 / draws as f64;
        assert!((p - perm).abs() <= 0.02, "normal {p} permutation {perm}");
    }

    #[test]
    fn holm_examples() {
        assert_eq!(holm_bonferroni(&[0.01, 0.04]), vec![0.02, 0.04]);
        assert_eq!(holm_bonferroni(&[0.3]), vec![0.3]);
        let adj = holm_bonferroni(&[0.03, 0.01, 0.04]);
        let expected = [0.06, 0.03, 0.06];
        for (a, e) in adj.iter().zip(expected) {
            assert!((a - e).abs() < 1e-15);
        }
    }

    #[test]
    fn tau_examples() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(weighted_kendall_tau(&a, &a, &[1.0; 3]).unwrap(), 1.0);
        assert_eq!(weighted_kendall_tau(&a, &[-1.0, -2.0, -3.0], &[1.0; 3]).unwrap(), -1.0);
        let t = weighted_kendall_tau(&a, &[1.0, 3.0, 2.0], &[1.0; 3]).unwrap();
        assert!((t - 1.0 / 3.0).abs() < 1e-15);
        assert!(weighted_kendall_tau(&[1.0, 1.0], &[2.0, 3.0], &[1.0; 2]).is_err());
    }

    proptest! {
        #[test]
        fn holm_is_monotone_and_dominates(p in proptest::collection::vec(0.0f64..=1.0, 1..20)) {
            let adj = holm_bonferroni(&p);
            let mut order: Vec<usize> = (0..p.len()).collect();
            order.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
            for w in order.windows(2) {
                prop_assert!(adj[w[0]] <= adj[w[1]]);
            }
            for (a, q) in adj.iter().zip(&p) {
                prop_assert!(a >= q && *a <= 1.0);
            }
        }

        #[test]
        fn tau_symmetric_and_rank_invariant(
            rows in proptest::collection::vec((0u8..8, 0u8..8, 0.1f64..2.0), 2..15),
        ) {
            let a: Vec<f64> = rows.iter().map(|r| r.0 as f64).collect();
            let b: Vec<f64> = rows.iter().map(|r| r.1 as f64).collect();
            let w: Vec<f64> = rows.iter().map(|r| r.2).collect();
            let t = weighted_kendall_tau(&a, &b, &w);
            prop_assume!(t.is_ok());
            let t = t.unwrap();
            prop_assert!((-1.0..=1.0).contains(&t));
            prop_assert_eq!(t, weighted_kendall_tau(&b, &a, &w).unwrap());
            let fa: Vec<f64> = a.iter().map(|x| x.powi(3) + 2.0).collect();
            prop_assert!((t - weighted_kendall_tau(&fa, &b, &w).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn weighted_mean_invariant_under_splitting(
            groups in proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, 1..6), 1..6),
            split in 0usize..5,
        ) {
            let pairs: Vec<(String, String)> = groups
                .iter()
                .enumerate()
                .flat_map(|(g, vs)| (0..vs.len()).map(move |i| (format!("{g}/{i}"), format!("d{g}"))))
                .collect();
            let values: Vec<f64> = groups.iter().flatten().copied().collect();
            let w: Vec<f64> = problem_weights(&pairs).into_iter().map(|p| p.weight).collect();
            let base = weighted_mean(&values, &w).unwrap();
            // split one dataset into two sub-groups weighted by their sizes;
            // the mean of per-dataset means must not change
            let g = split % groups.len();
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            let per_dataset: Vec<f64> = groups
                .iter()
                .enumerate()
                .map(|(i, vs)| {
                    let cut = vs.len() / 2;
                    if i != g || cut == 0 {
                        return mean(vs);
                    }
                    let (lo, hi) = vs.split_at(cut);
                    (lo.len() as f64 * mean(lo) + hi.len() as f64 * mean(hi)) / vs.len() as f64
                })
                .collect();
            let split_mean = mean(&per_dataset);
            prop_assert!((split_mean - base).abs() < 1e-12);
        }
    }
}
