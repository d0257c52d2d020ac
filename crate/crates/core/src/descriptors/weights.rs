use std::ops::Deref;

use serde::{Deserialize, Serialize};

/// Non-negative, non-increasing weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for WeightVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Linearly decreasing weights `p, p-1, ..., 1` (normalised) for `p` values,
/// truncated to the first `truncate_at` entries and renormalised.
pub fn linear_weights(p: usize, truncate_at: usize) -> WeightVector {
    assert!(p >= 1 && truncate_at >= 1, "weights need p >= 1 and truncate_at >= 1");
    let m = p.min(truncate_at);
    // sum of p, p-1, ..., p-m+1
    let total = (m as f64) * (p as f64) - (m as f64) * (m as f64 - 1.0) / 2.0;
    WeightVector((0..m).map(|i| (p - i) as f64 / total).collect())
}

/// Ordered weighted average: weights applied to the values sorted descending.
pub fn owa(values: &mut [f64], weights: &[f64]) -> f64 {
    debug_assert_eq!(values.len(), weights.len());
    values.sort_unstable_by(|a, b| b.total_cmp(a));
    values.iter().zip(weights).map(|(v, w)| v * w).sum()
}
