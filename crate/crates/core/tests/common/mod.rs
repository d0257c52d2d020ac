//! Brute-force oracles written from the textbook formulas. Nothing here calls
//! the library's neighbour search, weights or solver.

#![allow(dead_code)]

use ndarray::Array2;
use rand::Rng;

pub fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

pub fn row(points: &Array2<f64>, i: usize) -> Vec<f64> {
    points.row(i).to_vec()
}

/// (distance, index) of every point except `skip`, nearest first, ties by index.
pub fn neighbours(points: &Array2<f64>, q: &[f64], skip: Option<usize>) -> Vec<(f64, usize)> {
    let mut v: Vec<(f64, usize)> = (0..points.nrows())
        .filter(|&i| Some(i) != skip)
        .map(|i| (l1(&row(points, i), q), i))
        .collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    v
}

/// Fraction of (target, other) pairs won by the target, ties ½.
pub fn pair_count_auroc(targets: &[f64], others: &[f64]) -> f64 {
    let mut wins = 0.0;
    for &t in targets {
        for &o in others {
            if t > o {
                wins += 1.0;
            } else if t == o {
                wins += 0.5;
            }
        }
    }
    wins / (targets.len() * others.len()) as f64
}

pub fn nnd(target: &Array2<f64>, y: &[f64], k: usize) -> f64 {
    -neighbours(target, y, None)[k - 1].0
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num == 0.0 {
        1.0
    } else {
        f64::INFINITY
    }
}

fn negate(r: f64) -> f64 {
    if r.is_finite() {
        -r
    } else {
        f64::MIN
    }
}

pub fn lnnd(target: &Array2<f64>, y: &[f64], k: usize) -> f64 {
    let (d, nb) = neighbours(target, y, None)[k - 1];
    let own = neighbours(target, &row(target, nb), Some(nb))[k - 1].0;
    negate(ratio(d, own))
}

/// Textbook LOF: reach-dist_k(a, b) = max(k-distance(b), d(a, b)),
/// lrd(a) = 1 / mean reach-dist over kNN(a), LOF(y) = mean lrd(x) / lrd(y).
pub fn lof(target: &Array2<f64>, y: &[f64], k: usize) -> f64 {
    let kdist = |b: usize| neighbours(target, &row(target, b), Some(b))[k - 1].0;
    let lrd = |nbrs: &[(f64, usize)]| -> f64 {
        let mean: f64 = nbrs.iter().map(|&(d, b)| d.max(kdist(b))).sum::<f64>() / k as f64;
        1.0 / mean
    };
    let knn_y = neighbours(target, y, None);
    let lrd_y = lrd(&knn_y[..k]);
    let mean_lrd: f64 = knn_y[..k]
        .iter()
        .map(|&(_, x)| lrd(&neighbours(target, &row(target, x), Some(x))[..k]))
        .sum::<f64>()
        / k as f64;
    -(mean_lrd / lrd_y)
}

/// Linear weights p, p-1, ... over p entries, first `m` kept and renormalised.
pub fn truncated_linear_weights(p: usize, m: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..p.min(m)).map(|i| (p - i) as f64).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|w| w / s).collect()
}

pub fn alp_truncation(n: usize) -> usize {
    ((20.0 * (n as f64).ln()).ceil() as usize).min(n - 1).max(1)
}

/// Average localised proximity straight from its definition.
pub fn alp(target: &Array2<f64>, y: &[f64], k: usize, l: usize) -> f64 {
    let t = alp_truncation(target.nrows());
    let wk = truncated_linear_weights(k, t);
    let wl = truncated_linear_weights(l, t);
    let q = neighbours(target, y, None);
    let own: Vec<Vec<f64>> = (0..target.nrows())
        .map(|x| {
            neighbours(target, &row(target, x), Some(x))
                .into_iter()
                .map(|(d, _)| d)
                .collect()
        })
        .collect();
    let mut lp: Vec<f64> = (0..wk.len())
        .map(|i| {
            let big_d: f64 = (0..wl.len()).map(|j| wl[j] * own[q[j].1][i]).sum();
            let d = q[i].0;
            if big_d + d == 0.0 {
                1.0
            } else {
                big_d / (big_d + d)
            }
        })
        .collect();
    lp.sort_by(|a, b| b.total_cmp(a));
    lp.iter().zip(&wk).map(|(v, w)| v * w).sum()
}

pub fn gaussian_gram(x: &Array2<f64>, c: f64) -> Vec<Vec<f64>> {
    let n = x.nrows();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let sq: f64 = x.row(i).iter().zip(x.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
                    (-sq / c).exp()
                })
                .collect()
        })
        .collect()
}

pub fn quad(k: &[Vec<f64>], a: &[f64]) -> f64 {
    let n = a.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += a[i] * a[j] * k[i][j];
        }
    }
    0.5 * s
}

/// Euclidean projection onto {0 <= a <= cap, sum a = 1} by bisection on the shift.
pub fn project_capped_simplex(v: &[f64], cap: f64) -> Vec<f64> {
    let total = |tau: f64| v.iter().map(|x| (x - tau).clamp(0.0, cap)).sum::<f64>();
    let mut lo = v.iter().cloned().fold(f64::INFINITY, f64::min) - cap - 1.0;
    let mut hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 1.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    v.iter().map(|x| (x - tau).clamp(0.0, cap)).collect()
}

/// Accelerated projected gradient on ½aᵀKa over the capped simplex.
pub fn projected_gradient_dual(k: &[Vec<f64>], cap: f64, iterations: usize) -> Vec<f64> {
    let n = k.len();
    // the largest absolute row sum bounds the top eigenvalue
    let lipschitz = k.iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let step = 1.0 / lipschitz;
    let mut a = project_capped_simplex(&vec![1.0 / n as f64; n], cap);
    let mut z = a.clone();
    let mut t = 1.0_f64;
    for _ in 0..iterations {
        let grad: Vec<f64> = (0..n).map(|i| (0..n).map(|j| k[i][j] * z[j]).sum()).collect();
        let next = project_capped_simplex(&z.iter().zip(&grad).map(|(v, g)| v - step * g).collect::<Vec<_>>(), cap);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = next
            .iter()
            .zip(&a)
            .map(|(x, x0)| x + (t - 1.0) / t_next * (x - x0))
            .collect();
        a = next;
        t = t_next;
    }
    a
}

/// Maximal violating-pair gap of the dual's optimality conditions.
pub fn kkt_violation(k: &[Vec<f64>], a: &[f64], cap: f64) -> f64 {
    let n = a.len();
    let grad: Vec<f64> = (0..n).map(|i| (0..n).map(|j| k[i][j] * a[j]).sum()).collect();
    let slack = 1e-12 * cap;
    let can_grow = (0..n).filter(|&i| a[i] < cap - slack).map(|i| grad[i]).fold(f64::INFINITY, f64::min);
    let can_shrink = (0..n).filter(|&i| a[i] > slack).map(|i| grad[i]).fold(f64::NEG_INFINITY, f64::max);
    (can_shrink - can_grow).max(0.0)
}

pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-2.0..2.0))
}

/// Targets and non-targets stacked, with the target mask.
pub fn random_problem<R: Rng>(rng: &mut R, n_targets: usize, n_others: usize, d: usize) -> (Array2<f64>, Vec<bool>) {
    let mut x = Array2::zeros((n_targets + n_others, d));
    let mut is_target = vec![false; n_targets + n_others];
    // interleave so targets are not a contiguous block
    let mut order: Vec<usize> = (0..n_targets + n_others).collect();
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    for (pos, &r) in order.iter().enumerate() {
        let target = pos < n_targets;
        is_target[r] = target;
        let shift = if target { 0.0 } else { 0.8 };
        for c in 0..d {
            x[[r, c]] = rng.random_range(-1.0..1.0) + shift;
        }
    }
    (x, is_target)
}

pub fn split(x: &Array2<f64>, is_target: &[bool]) -> (Array2<f64>, Array2<f64>) {
    let t: Vec<usize> = (0..is_target.len()).filter(|&i| is_target[i]).collect();
    let o: Vec<usize> = (0..is_target.len()).filter(|&i| !is_target[i]).collect();
    (x.select(ndarray::Axis(0), &t), x.select(ndarray::Axis(0), &o))
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
