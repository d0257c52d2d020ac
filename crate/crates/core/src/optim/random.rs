use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Budget, Objective, OptimiserKind, Search, SearchResult};
use crate::error::Result;

/// Uniform point in `[0, 1)^dim`; the stream shared with the TPE warm-up.
pub(crate) fn uniform_point(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.random::<f64>()).collect()
}

/// Independent uniform proposals until the budget is spent.
pub fn random_search<O: Objective + ?Sized>(objective: &mut O, budget: Budget) -> Result<SearchResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    let dim = objective.dim();
    let mut search = Search::new(objective, budget);
    while search.propose(&uniform_point(&mut rng, dim))?.is_some() {}
    Ok(search.finish(OptimiserKind::Random, serde_json::json!({})))
}
