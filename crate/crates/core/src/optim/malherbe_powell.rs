//! Adaptive Lipschitz global search alternating with a quadratic-model
//! trust-region refinement of the incumbent.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::random::uniform_point;
use super::{Budget, Objective, OptimiserKind, Search, SearchResult};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MalherbePowellOptions {
    /// Noise term added to the Lipschitz upper bound.
    pub epsilon: f64,
    /// Uniform candidates scored per global step.
    pub candidates: usize,
    pub initial_radius: f64,
    pub max_radius: f64,
    pub min_radius: f64,
    /// Consecutive rounds without a proposal before giving up.
    pub max_idle_rounds: usize,
}

impl Default for MalherbePowellOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            candidates: 500,
            initial_radius: 0.1,
            max_radius: 0.5,
            min_radius: 1e-6,
            max_idle_rounds: 20,
        }
    }
}

/// `U(x) = min_i (f_i + Σ_d k_d |x_d - x_{i,d}|) + ε`.
pub fn lipschitz_bound(points: &[(&[f64], f64)], k: &[f64], epsilon: f64, x: &[f64]) -> f64 {
    points
        .iter()
        .map(|(p, f)| f + p.iter().zip(x).zip(k).map(|((a, b), kd)| kd * (a - b).abs()).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
        + epsilon
}

/// Per-dimension slope estimates; never decrease.
#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzState {
    pub k: Vec<f64>,
    pub epsilon: f64,
}

impl LipschitzState {
    pub fn new(dim: usize, epsilon: f64) -> Self {
        Self {
            k: vec![0.0; dim],
            epsilon,
        }
    }

    /// Raises the slopes until `|f_a - f_b| <= Σ_d k_d |Δ_d|` holds between
    /// `new` and every earlier point. A violated pair lifts each `k_d` to
    /// `|Δf| |Δ_d| / ‖Δ‖²`, which restores the inequality for that pair.
    pub fn update(&mut self, earlier: &[(&[f64], f64)], new: (&[f64], f64)) {
        for (p, f) in earlier {
            let delta: Vec<f64> = p.iter().zip(new.0).map(|(a, b)| (a - b).abs()).collect();
            let sq: f64 = delta.iter().map(|d| d * d).sum();
            if sq == 0.0 {
                continue;
            }
            let df = (f - new.1).abs();
            let bound: f64 = delta.iter().zip(&self.k).map(|(d, k)| d * k).sum();
            if df > bound {
                for (k, d) in self.k.iter_mut().zip(&delta) {
                    *k = k.max(df * d / sq);
                }
            }
        }
    }

    pub fn bound(&self, points: &[(&[f64], f64)], x: &[f64]) -> f64 {
        lipschitz_bound(points, &self.k, self.epsilon, x)
    }
}

/// `q(z) = c + gᵀz + ½ zᵀHz` in coordinates relative to `center`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic {
    pub center: Vec<f64>,
    pub c: f64,
    pub g: DVector<f64>,
    pub h: DMatrix<f64>,
}

impl Quadratic {
    pub fn value(&self, z: &[f64]) -> f64 {
        let z = DVector::from_column_slice(z);
        self.c + self.g.dot(&z) + 0.5 * z.dot(&(&self.h * &z))
    }
}

fn n_quadratic_terms(m: usize) -> usize {
    (m + 1) * (m + 2) / 2
}

/// Least-squares quadratic through `points`; `None` if the design matrix is
/// rank deficient.
pub fn fit_quadratic(center: &[f64], points: &[(&[f64], f64)]) -> Option<Quadratic> {
    let m = center.len();
    let p = n_quadratic_terms(m);
    if points.len() < p {
        return None;
    }
    // rescale offsets to unit size to keep the design well conditioned
    let scale = points
        .iter()
        .flat_map(|(x, _)| x.iter().zip(center).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max);
    if scale == 0.0 {
        return None;
    }
    let design = DMatrix::from_fn(points.len(), p, |r, col| {
        let z: Vec<f64> = points[r].0.iter().zip(center).map(|(a, b)| (a - b) / scale).collect();
        quadratic_feature(&z, col)
    });
    let rhs = DVector::from_iterator(points.len(), points.iter().map(|(_, f)| *f));
    let svd = design.svd(true, true);
    let tol = 1e-10 * svd.singular_values.max();
    if svd.rank(tol) < p {
        return None;
    }
    let beta = svd.solve(&rhs, tol).ok()?;
    let mut g = DVector::zeros(m);
    let mut h = DMatrix::zeros(m, m);
    let mut col = 1;
    for d in 0..m {
        g[d] = beta[col] / scale;
        col += 1;
    }
    for d in 0..m {
        for e in d..m {
            let v = beta[col] / (scale * scale);
            if d == e {
                h[(d, d)] = 2.0 * v;
            } else {
                h[(d, e)] = v;
                h[(e, d)] = v;
            }
            col += 1;
        }
    }
    Some(Quadratic {
        center: center.to_vec(),
        c: beta[0],
        g,
        h,
    })
}

/// Columns: 1, z_1..z_m, then z_d z_e for d <= e.
fn quadratic_feature(z: &[f64], col: usize) -> f64 {
    let m = z.len();
    if col == 0 {
        return 1.0;
    }
    if col <= m {
        return z[col - 1];
    }
    let mut idx = m + 1;
    for d in 0..m {
        for e in d..m {
            if idx == col {
                return z[d] * z[e];
            }
            idx += 1;
        }
    }
    unreachable!("column {col} out of range")
}

/// Exact maximiser of `q` over the box `[lo, hi]`: every face of the box is
/// searched for a stationary point, corners included.
pub fn maximise_quadratic_in_box(q: &Quadratic, lo: &[f64], hi: &[f64]) -> Vec<f64> {
    let m = lo.len();
    let mut best = vec![0.0; m];
    let mut best_value = q.value(&best);
    for free_mask in 0u32..(1 << m) {
        let free: Vec<usize> = (0..m).filter(|&d| free_mask & (1 << d) != 0).collect();
        let fixed: Vec<usize> = (0..m).filter(|&d| free_mask & (1 << d) == 0).collect();
        for corner in 0u32..(1 << fixed.len()) {
            let mut z = vec![0.0; m];
            for (j, &d) in fixed.iter().enumerate() {
                z[d] = if corner & (1 << j) != 0 { hi[d] } else { lo[d] };
            }
            if !free.is_empty() {
                // H_FF z_F = -(g_F + H_FB z_B)
                let hff = DMatrix::from_fn(free.len(), free.len(), |a, b| q.h[(free[a], free[b])]);
                let rhs = DVector::from_fn(free.len(), |a, _| {
                    let d = free[a];
                    -(q.g[d] + fixed.iter().map(|&b| q.h[(d, b)] * z[b]).sum::<f64>())
                });
                let Some(sol) = hff.lu().solve(&rhs) else {
                    continue;
                };
                let inside = free
                    .iter()
                    .zip(sol.iter())
                    .all(|(&d, &v)| v.is_finite() && v >= lo[d] - 1e-12 && v <= hi[d] + 1e-12);
                if !inside {
                    continue;
                }
                for (&d, &v) in free.iter().zip(sol.iter()) {
                    z[d] = v.clamp(lo[d], hi[d]);
                }
            }
            let v = q.value(&z);
            if v > best_value {
                best_value = v;
                best = z;
            }
        }
    }
    best
}

struct TrustRegion {
    radius: f64,
}

/// One local refinement step; returns whether a proposal was made.
fn local_step<O: Objective + ?Sized>(
    search: &mut Search<'_, O>,
    region: &mut TrustRegion,
    options: &MalherbePowellOptions,
) -> Result<bool> {
    let Some(best) = search.best() else {
        return Ok(false);
    };
    let (center, f_best) = (best.coords.clone(), best.value);
    let m = center.len();
    let p = n_quadratic_terms(m);

    let mut seen = std::collections::HashSet::new();
    let mut pts: Vec<(&[f64], f64)> = Vec::new();
    for t in search.trials() {
        let key: Vec<u64> = t.coords.iter().map(|c| c.to_bits()).collect();
        if seen.insert(key) {
            pts.push((t.coords.as_slice(), t.value));
        }
    }
    if pts.len() < p {
        return Ok(false);
    }
    let dist = |x: &[f64]| x.iter().zip(&center).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    pts.sort_by(|a, b| dist(a.0).total_cmp(&dist(b.0)));
    pts.truncate(2 * p);
    let Some(model) = fit_quadratic(&center, &pts) else {
        return Ok(false);
    };

    let r = region.radius;
    let lo: Vec<f64> = center.iter().map(|&c| (-r).max(-c)).collect();
    let hi: Vec<f64> = center.iter().map(|&c| r.min(1.0 - c)).collect();
    let z = maximise_quadratic_in_box(&model, &lo, &hi);
    let predicted = model.value(&z) - model.value(&vec![0.0; m]);
    if predicted <= 1e-12 {
        region.radius = (region.radius * 0.5).max(options.min_radius);
        return Ok(false);
    }
    let x: Vec<f64> = center.iter().zip(&z).map(|(c, d)| c + d).collect();
    let Some(f_new) = search.propose(&x)? else {
        return Ok(false);
    };
    let ratio = (f_new - f_best) / predicted;
    let on_boundary = z.iter().any(|d| (d.abs() - r).abs() <= 1e-9 * r.max(1.0));
    if ratio > 0.75 && on_boundary {
        region.radius = (2.0 * r).min(options.max_radius);
    } else if ratio < 0.25 {
        region.radius = (0.5 * r).max(options.min_radius);
    }
    Ok(true)
}

/// Strict round-robin of a Lipschitz global step and a local step, starting
/// with the global step after evaluating `start`.
pub fn malherbe_powell<O: Objective + ?Sized>(
    objective: &mut O,
    budget: Budget,
    start: &[f64],
    options: &MalherbePowellOptions,
) -> Result<SearchResult> {
    let constants = serde_json::json!({
        "epsilon": options.epsilon,
        "candidates": options.candidates,
        "initial_radius": options.initial_radius,
        "max_radius": options.max_radius,
        "min_radius": options.min_radius,
    });
    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    let dim = objective.dim();
    let mut search = Search::new(objective, budget);
    let mut lipschitz = LipschitzState::new(dim, options.epsilon);
    let mut region = TrustRegion {
        radius: options.initial_radius,
    };
    if search.propose(start)?.is_none() {
        return Ok(search.finish(OptimiserKind::MalherbePowell, constants));
    }

    let mut global_turn = true;
    let mut idle = 0;
    while !search.exhausted() && idle < options.max_idle_rounds {
        let before = search.trials().len();
        if global_turn {
            let pts: Vec<(&[f64], f64)> = search.trials().iter().map(|t| (t.coords.as_slice(), t.value)).collect();
            let best = search.best().map_or(f64::NEG_INFINITY, |b| b.value);
            let mut chosen: Option<(f64, Vec<f64>)> = None;
            for _ in 0..options.candidates {
                let x = uniform_point(&mut rng, dim);
                let u = lipschitz.bound(&pts, &x);
                if chosen.as_ref().is_none_or(|(cu, _)| u > *cu) {
                    chosen = Some((u, x));
                }
            }
            // only candidates that may beat the incumbent are evaluated
            if let Some((u, x)) = chosen.filter(|(u, _)| *u > best) {
                debug_assert!(u > best);
                search.propose(&x)?;
            }
        } else {
            local_step(&mut search, &mut region, options)?;
        }
        global_turn = !global_turn;

        if search.trials().len() > before {
            idle = 0;
            let trials = search.trials();
            let (last, earlier) = trials.split_last().expect("a proposal was recorded");
            let earlier: Vec<(&[f64], f64)> = earlier.iter().map(|t| (t.coords.as_slice(), t.value)).collect();
            lipschitz.update(&earlier, (&last.coords, last.value));
        } else {
            idle += 1;
        }
    }
    Ok(search.finish(OptimiserKind::MalherbePowell, constants))
}
