use super::{clamp_unit, Budget, Objective, OptimiserKind, Search, SearchResult};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    /// Per-axis offset of the initial vertices from the start point.
    pub simplex_scale: f64,
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    /// Stop once the largest vertex distance falls below this.
    pub min_diameter: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            simplex_scale: 0.1,
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            min_diameter: 1e-6,
        }
    }
}

fn diameter(vertices: &[(Vec<f64>, f64)]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, (a, _)) in vertices.iter().enumerate() {
        for (b, _) in &vertices[..i] {
            let dist = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            d = d.max(dist);
        }
    }
    d
}

/// `c + t (p - c)`, clamped into the unit box.
fn along(c: &[f64], p: &[f64], t: f64) -> Vec<f64> {
    c.iter().zip(p).map(|(&ci, &pi)| clamp_unit(ci + t * (pi - ci))).collect()
}

/// Simplex search for a maximum: the worst vertex is reflected through the
/// centroid of the others, expanded or contracted, and the simplex shrinks
/// towards the best vertex when nothing improves on the worst.
pub fn nelder_mead<O: Objective + ?Sized>(
    objective: &mut O,
    budget: Budget,
    start: &[f64],
    options: &NelderMeadOptions,
) -> Result<SearchResult> {
    let constants = serde_json::json!({
        "simplex_scale": options.simplex_scale,
        "reflection": options.reflection,
        "expansion": options.expansion,
        "contraction": options.contraction,
        "shrink": options.shrink,
        "min_diameter": options.min_diameter,
    });
    let mut search = Search::new(objective, budget);
    let m = start.len();
    let start: Vec<f64> = start.iter().map(|&c| clamp_unit(c)).collect();

    let mut initial = vec![start.clone()];
    for d in 0..m {
        let mut v = start.clone();
        v[d] = clamp_unit(start[d] + options.simplex_scale);
        if v[d] == start[d] {
            v[d] = clamp_unit(start[d] - options.simplex_scale);
        }
        initial.push(v);
    }
    let mut vertices: Vec<(Vec<f64>, f64)> = Vec::with_capacity(m + 1);
    for v in initial {
        match search.propose(&v)? {
            Some(f) => vertices.push((v, f)),
            None => return Ok(search.finish(OptimiserKind::NelderMead, constants)),
        }
    }

    macro_rules! eval {
        ($x:expr) => {
            match search.propose(&$x)? {
                Some(f) => f,
                None => break,
            }
        };
    }

    loop {
        // best first; ties keep their order
        vertices.sort_by(|a, b| b.1.total_cmp(&a.1));
        if diameter(&vertices) < options.min_diameter {
            break;
        }
        let (worst, f_worst) = vertices[m].clone();
        let f_second = vertices[m - 1].1;
        let f_best = vertices[0].1;
        let centroid: Vec<f64> = (0..m)
            .map(|d| vertices[..m].iter().map(|(v, _)| v[d]).sum::<f64>() / m as f64)
            .collect();

        let xr = along(&centroid, &worst, -options.reflection);
        let fr = eval!(xr);
        if fr > f_best {
            let xe = along(&centroid, &xr, options.expansion);
            let fe = eval!(xe);
            vertices[m] = if fe > fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr > f_second {
            vertices[m] = (xr, fr);
            continue;
        }
        let (xc, fc, accepted) = if fr > f_worst {
            let xc = along(&centroid, &xr, options.contraction);
            let fc = eval!(xc);
            (xc, fc, fc >= fr)
        } else {
            let xc = along(&centroid, &worst, options.contraction);
            let fc = eval!(xc);
            (xc, fc, fc > f_worst)
        };
        if accepted {
            vertices[m] = (xc, fc);
            continue;
        }
        let best = vertices[0].0.clone();
        let mut out_of_budget = false;
        for vertex in vertices.iter_mut().skip(1) {
            let x = along(&best, &vertex.0, options.shrink);
            match search.propose(&x)? {
                Some(f) => *vertex = (x, f),
                None => {
                    out_of_budget = true;
                    break;
                }
            }
        }
        if out_of_budget {
            break;
        }
    }
    Ok(search.finish(OptimiserKind::NelderMead, constants))
}
