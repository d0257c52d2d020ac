use super::{clamp_unit, Budget, Objective, OptimiserKind, Search, SearchResult};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HookeJeevesOptions {
    pub initial_step: f64,
    pub shrink: f64,
    pub min_step: f64,
}

impl Default for HookeJeevesOptions {
    fn default() -> Self {
        Self {
            initial_step: 0.1,
            shrink: 0.5,
            min_step: 1e-6,
        }
    }
}

/// Exploratory moves of ± `step` along each axis, keeping improvements.
/// `None` once the budget runs out.
fn explore<O: Objective + ?Sized>(
    search: &mut Search<'_, O>,
    mut x: Vec<f64>,
    mut fx: f64,
    step: f64,
) -> Result<Option<(Vec<f64>, f64)>> {
    for d in 0..x.len() {
        for sign in [1.0, -1.0] {
            let mut y = x.clone();
            y[d] = clamp_unit(y[d] + sign * step);
            let Some(fy) = search.propose(&y)? else {
                return Ok(None);
            };
            if fy > fx {
                x = y;
                fx = fy;
                break;
            }
        }
    }
    Ok(Some((x, fx)))
}

/// Pattern search: explore around the base, follow the improving direction
/// with pattern moves, and halve the step when no axis move improves.
pub fn hooke_jeeves<O: Objective + ?Sized>(
    objective: &mut O,
    budget: Budget,
    start: &[f64],
    options: &HookeJeevesOptions,
) -> Result<SearchResult> {
    let constants = serde_json::json!({
        "initial_step": options.initial_step,
        "shrink": options.shrink,
        "min_step": options.min_step,
    });
    let mut search = Search::new(objective, budget);
    let mut base: Vec<f64> = start.iter().map(|&c| clamp_unit(c)).collect();
    let Some(mut f_base) = search.propose(&base)? else {
        return Ok(search.finish(OptimiserKind::HookeJeeves, constants));
    };
    let mut step = options.initial_step;
    'outer: while step >= options.min_step {
        let Some((mut x, mut fx)) = explore(&mut search, base.clone(), f_base, step)? else {
            break;
        };
        if fx <= f_base {
            step *= options.shrink;
            continue;
        }
        while fx > f_base {
            let pattern: Vec<f64> = x.iter().zip(&base).map(|(&a, &b)| clamp_unit(2.0 * a - b)).collect();
            base = x;
            f_base = fx;
            let Some(fp) = search.propose(&pattern)? else {
                break 'outer;
            };
            match explore(&mut search, pattern, fp, step)? {
                Some((y, fy)) => {
                    x = y;
                    fx = fy;
                }
                None => break 'outer,
            }
        }
    }
    Ok(search.finish(OptimiserKind::HookeJeeves, constants))
}
