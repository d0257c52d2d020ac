use crate::error::{Error, Result};

/// Area under the ROC curve as the Mann-Whitney pair count: the fraction of
/// (target, other) pairs where the target scores higher, ties counting ½.
pub fn auroc(target_scores: &[f64], other_scores: &[f64]) -> Result<f64> {
    if target_scores.is_empty() || other_scores.is_empty() {
        return Err(Error::InvalidInput(
            "AUROC needs at least one target and one other score".into(),
        ));
    }
    if target_scores.iter().chain(other_scores).any(|s| s.is_nan()) {
        return Err(Error::InvalidInput("NaN score".into()));
    }
    let mut others = other_scores.to_vec();
    others.sort_unstable_by(f64::total_cmp);
    // twice the number of wins: 2 per strict win, 1 per tie
    let mut doubled: u128 = 0;
    for &t in target_scores {
        let below = others.partition_point(|&o| o < t);
        let not_above = others.partition_point(|&o| o <= t);
        doubled += 2 * below as u128 + (not_above - below) as u128;
    }
    let pairs = 2 * target_scores.len() as u128 * other_scores.len() as u128;
    Ok(doubled as f64 / pairs as f64)
}

/// [`auroc`] of one score vector split by a parallel target mask.
pub fn masked_auroc(scores: &[f64], is_target: &[bool]) -> Result<f64> {
    if scores.len() != is_target.len() {
        return Err(Error::InvalidInput(format!(
            "{} scores for {} labels",
            scores.len(),
            is_target.len()
        )));
    }
    let (mut t, mut o) = (Vec::new(), Vec::new());
    for (&s, &is_t) in scores.iter().zip(is_target) {
        if is_t {
            t.push(s);
        } else {
            o.push(s);
        }
    }
    auroc(&t, &o)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pair_count(t: &[f64], o: &[f64]) -> f64 {
        let mut wins = 0.0;
        for &a in t {
            for &b in o {
                if a > b {
                    wins += 1.0;
                } else if a == b {
                    wins += 0.5;
                }
            }
        }
        wins / (t.len() * o.len()) as f64
    }

    #[test]
    fn examples() {
        assert_eq!(auroc(&[0.9, 0.8], &[0.1, 0.2]).unwrap(), 1.0);
        assert_eq!(auroc(&[0.3, 0.3], &[0.3, 0.3, 0.3]).unwrap(), 0.5);
        assert_eq!(auroc(&[0.8, 0.3], &[0.5, 0.1]).unwrap(), 0.75);
        assert!(auroc(&[], &[1.0]).is_err());
        assert!(auroc(&[1.0], &[]).is_err());
    }

    #[test]
    fn sentinel_scores_tie_with_each_other() {
        let s = f64::MIN;
        // (s,s) ties, (s,0) loses, (1,s) and (1,0) win
        assert_eq!(auroc(&[s, 1.0], &[s, 0.0]).unwrap(), 0.625);
    }

    proptest! {
        #[test]
        fn matches_pair_counting(
            t in proptest::collection::vec(0u8..6, 1..30),
            o in proptest::collection::vec(0u8..6, 1..30),
        ) {
            let t: Vec<f64> = t.into_iter().map(f64::from).collect();
            let o: Vec<f64> = o.into_iter().map(f64::from).collect();
            prop_assert_eq!(auroc(&t, &o).unwrap(), pair_count(&t, &o));
        }

        #[test]
        fn invariant_under_increasing_transform(
            t in proptest::collection::vec(-5.0f64..5.0, 1..20),
            o in proptest::collection::vec(-5.0f64..5.0, 1..20),
        ) {
            let f = |v: &Vec<f64>| v.iter().map(|x| x.exp() * 3.0 + 1.0).collect::<Vec<_>>();
            prop_assert_eq!(auroc(&t, &o).unwrap(), auroc(&f(&t), &f(&o)).unwrap());
        }
    }
}
