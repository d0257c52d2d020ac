//! ν-one-class SVM with a Gaussian kernel, trained by pairwise (SMO-style)
//! coordinate descent on the dual
//!
//! ```text
//! min ½ αᵀKα   s.t.  0 ≤ αᵢ ≤ 1/(νn),  Σαᵢ = 1
//! ```
//!
//! and scoring `f(y) = Σ αᵢ K(xᵢ, y) − ρ`.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kernel width `c = c' / (1 - c')`.
pub fn kernel_width(c_prime: f64) -> f64 {
    c_prime / (1.0 - c_prime)
}

/// `exp(-‖u - v‖² / c)`.
pub fn gaussian_kernel(u: &[f64], v: &[f64], c: f64) -> f64 {
    let sq: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
    (-sq / c).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoOptions {
    /// Stop once the maximal KKT violation drops to this value.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SmoOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-3,
            max_iterations: 100_000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SvmModel {
    pub nu: f64,
    pub c_prime: f64,
    pub width: f64,
    pub rho: f64,
    /// Dual coefficients of the support vectors (αᵢ > 0).
    pub alpha: Vec<f64>,
    pub support: Array2<f64>,
    /// Indices of the support vectors in the training set.
    pub support_indices: Vec<usize>,
    /// Value of ½αᵀKα at the solution.
    pub objective: f64,
    /// Largest remaining KKT violation.
    pub violation: f64,
    pub iterations: usize,
}

struct Solution {
    alpha: Vec<f64>,
    gradient: Vec<f64>,
    violation: f64,
    iterations: usize,
}

fn kernel_matrix(x: ArrayView2<'_, f64>, c: f64) -> Vec<f64> {
    let n = x.nrows();
    let rows: Vec<Vec<f64>> = x.outer_iter().map(|r| r.to_vec()).collect();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        k[i * n + i] = 1.0;
        for j in 0..i {
            let v = gaussian_kernel(&rows[i], &rows[j], c);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    k
}

/// Maximal violating pair: `up` may grow (α < cap) with the smallest
/// gradient, `low` may shrink (α > 0) with the largest.
fn violating_pair(alpha: &[f64], gradient: &[f64], cap: f64) -> (usize, usize, f64) {
    let mut up = usize::MAX;
    let mut low = usize::MAX;
    for i in 0..alpha.len() {
        if alpha[i] < cap && (up == usize::MAX || gradient[i] < gradient[up]) {
            up = i;
        }
        if alpha[i] > 0.0 && (low == usize::MAX || gradient[i] > gradient[low]) {
            low = i;
        }
    }
    if up == usize::MAX || low == usize::MAX {
        return (0, 0, 0.0);
    }
    (up, low, gradient[low] - gradient[up])
}

fn solve(kernel: &[f64], n: usize, cap: f64, options: &SmoOptions) -> Result<Solution> {
    // feasible start: fill coefficients up to the cap until the mass is spent
    let mut alpha = vec![0.0; n];
    let mut remaining = 1.0;
    for a in alpha.iter_mut() {
        if remaining <= 0.0 {
            break;
        }
        *a = cap.min(remaining);
        remaining -= *a;
    }
    let mut gradient: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| kernel[i * n + j] * alpha[j]).sum())
        .collect();

    let mut iterations = 0;
    loop {
        let (up, low, violation) = violating_pair(&alpha, &gradient, cap);
        if violation <= options.tolerance {
            return Ok(Solution {
                alpha,
                gradient,
                violation,
                iterations,
            });
        }
        if iterations >= options.max_iterations {
            return Err(Error::NotConverged {
                iterations,
                violation,
            });
        }
        iterations += 1;
        let curvature = (kernel[up * n + up] + kernel[low * n + low] - 2.0 * kernel[up * n + low])
            .max(1e-12);
        let room_up = cap - alpha[up];
        let room_low = alpha[low];
        let step = (violation / curvature).min(room_up).min(room_low);
        if step == room_up {
            alpha[up] = cap;
        } else {
            alpha[up] += step;
        }
        if step == room_low {
            alpha[low] = 0.0;
        } else {
            alpha[low] -= step;
        }
        for (i, g) in gradient.iter_mut().enumerate() {
            *g += step * (kernel[i * n + up] - kernel[i * n + low]);
        }
    }
}

/// Offset: mean gradient over free coefficients, otherwise the midpoint of
/// the bounds implied by coefficients at 0 and at the cap.
fn offset(alpha: &[f64], gradient: &[f64], cap: f64) -> f64 {
    let mut free_sum = 0.0;
    let mut free = 0usize;
    let mut upper = f64::INFINITY;
    let mut lower = f64::NEG_INFINITY;
    for (&a, &g) in alpha.iter().zip(gradient) {
        if a >= cap {
            lower = lower.max(g);
        } else if a <= 0.0 {
            upper = upper.min(g);
        } else {
            free_sum += g;
            free += 1;
        }
    }
    if free > 0 {
        free_sum / free as f64
    } else if upper.is_infinite() {
        lower
    } else if lower.is_infinite() {
        upper
    } else {
        (upper + lower) / 2.0
    }
}

impl SvmModel {
    pub fn fit(
        target: ArrayView2<'_, f64>,
        nu: f64,
        c_prime: f64,
        options: &SmoOptions,
    ) -> Result<Self> {
        let n = target.nrows();
        if n == 0 {
            return Err(Error::TooFewPoints {
                needed: 1,
                available: 0,
            });
        }
        let width = kernel_width(c_prime);
        let cap = 1.0 / (nu * n as f64);
        let kernel = kernel_matrix(target, width);
        let solution = solve(&kernel, n, cap, options)?;
        let rho = offset(&solution.alpha, &solution.gradient, cap);
        let objective = 0.5
            * solution
                .alpha
                .iter()
                .zip(&solution.gradient)
                .map(|(a, g)| a * g)
                .sum::<f64>();
        let support_indices: Vec<usize> = (0..n).filter(|&i| solution.alpha[i] > 0.0).collect();
        Ok(Self {
            nu,
            c_prime,
            width,
            rho,
            alpha: support_indices.iter().map(|&i| solution.alpha[i]).collect(),
            support: target.select(Axis(0), &support_indices),
            support_indices,
            objective,
            violation: solution.violation,
            iterations: solution.iterations,
        })
    }

    pub fn decision(&self, y: &[f64]) -> f64 {
        self.support
            .outer_iter()
            .zip(&self.alpha)
            .map(|(x, a)| a * gaussian_kernel(x.as_slice().expect("standard layout"), y, self.width))
            .sum::<f64>()
            - self.rho
    }

    pub fn score(&self, queries: ArrayView2<'_, f64>) -> Vec<f64> {
        queries
            .outer_iter()
            .map(|y| self.decision(&y.to_vec()))
            .collect()
    }

    /// Full coefficient vector over the `n` training instances.
    pub fn dense_alpha(&self, n: usize) -> Vec<f64> {
        let mut dense = vec![0.0; n];
        for (&i, &a) in self.support_indices.iter().zip(&self.alpha) {
            dense[i] = a;
        }
        dense
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_point_is_forced() {
        let x = array![[0.3, -1.0]];
        let m = SvmModel::fit(x.view(), 0.5, 0.5, &SmoOptions::default()).unwrap();
        assert_eq!(m.alpha, vec![1.0]);
        assert!(m.decision(&[0.3, -1.0]).abs() < 1e-15);
        let y = [1.0, 1.0];
        let expected = gaussian_kernel(&[0.3, -1.0], &y, m.width) - 1.0;
        assert!((m.decision(&y) - expected).abs() < 1e-15);
    }

    #[test]
    fn nu_one_forces_uniform_coefficients() {
        let x = Array2::from_shape_fn((7, 2), |(i, j)| (i * 3 + j) as f64 * 0.1);
        let m = SvmModel::fit(x.view(), 1.0, 0.4, &SmoOptions::default()).unwrap();
        assert_eq!(m.alpha.len(), 7);
        for a in m.alpha {
            assert!((a - 1.0 / 7.0).abs() < 1e-15);
        }
    }

    #[test]
    fn far_query_tends_to_minus_rho() {
        let x = array![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.5, 0.5]];
        let m = SvmModel::fit(x.view(), 0.5, 0.5, &SmoOptions::default()).unwrap();
        assert!((m.decision(&[100.0, 100.0]) + m.rho).abs() < 1e-12);
    }

    #[test]
    fn free_support_vectors_lie_on_the_margin() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Array2::from_shape_fn((30, 2), |_| rng.random_range(-1.0..1.0));
        let opts = SmoOptions::default();
        let m = SvmModel::fit(x.view(), 0.3, 0.5, &opts).unwrap();
        let cap = 1.0 / (0.3 * 30.0);
        for (row, &a) in m.support.outer_iter().zip(&m.alpha) {
            if a < cap {
                assert!(m.decision(&row.to_vec()).abs() <= opts.tolerance);
            }
        }
        assert!(m.violation <= opts.tolerance);
        assert!((m.alpha.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reports_non_convergence() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Array2::from_shape_fn((40, 3), |_| rng.random_range(-1.0..1.0));
        let opts = SmoOptions {
            tolerance: 1e-12,
            max_iterations: 3,
        };
        match SvmModel::fit(x.view(), 0.1, 0.5, &opts) {
            Err(Error::NotConverged { iterations, violation }) => {
                assert_eq!(iterations, 3);
                assert!(violation > 1e-12);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn scores_match_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = Array2::from_shape_fn((20, 3), |_| rng.random_range(-1.0..1.0));
        let m = SvmModel::fit(x.view(), 0.2, 0.3, &SmoOptions::default()).unwrap();
        let dense = m.dense_alpha(20);
        let c = 0.3 / 0.7;
        for _ in 0..10 {
            let y: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let mut direct = -m.rho;
            for (i, row) in x.outer_iter().enumerate() {
                let sq: f64 = row.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum();
                direct += dense[i] * (-sq / c).exp();
            }
            assert!((m.decision(&y) - direct).abs() <= 1e-12);
        }
    }
}
