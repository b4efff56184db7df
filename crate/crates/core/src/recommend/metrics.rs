use std::collections::{BTreeMap, BTreeSet};

/// Average precision of `ranking` at cutoff `n` against the relevant set.
/// Zero when nothing is relevant.
pub fn average_precision(ranking: &[String], relevant: &BTreeSet<String>, n: usize) -> f64 {
    let denom = relevant.len().min(n);
    if denom == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, item) in ranking.iter().take(n).enumerate() {
        if relevant.contains(item) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / denom as f64
}

/// Mean of `average_precision` over learners with a nonempty relevant set.
/// A learner without a ranking scores zero. `None` when no learner
/// qualifies.
pub fn map_at_n(
    rankings: &BTreeMap<String, Vec<String>>,
    relevant: &BTreeMap<String, BTreeSet<String>>,
    n: usize,
) -> Option<f64> {
    let scores: Vec<f64> = relevant
        .iter()
        .filter(|(_, rel)| !rel.is_empty())
        .map(|(learner, rel)| {
            rankings
                .get(learner)
                .map_or(0.0, |ranking| average_precision(ranking, rel, n))
        })
        .collect();
    if scores.is_empty() {
        None
    } else {
        Some(scores.iter().sum::<f64>() / scores.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn set(xs: &[&str]) -> BTreeSet<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn single_relevant() {
        let r = ids(&["a", "b", "c"]);
        assert_eq!(average_precision(&r, &set(&["a"]), 5), 1.0);
        assert_eq!(average_precision(&r, &set(&["b"]), 5), 0.5);
    }

    #[test]
    fn two_relevant_hits_one_and_three() {
        let r = ids(&["a", "x", "b", "y", "z"]);
        let ap = average_precision(&r, &set(&["a", "b"]), 5);
        assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn no_qualifying_learner_is_absent() {
        let rankings = BTreeMap::from([("u".to_string(), ids(&["a"]))]);
        assert_eq!(map_at_n(&rankings, &BTreeMap::new(), 5), None);
        let empty = BTreeMap::from([("u".to_string(), BTreeSet::new())]);
        assert_eq!(map_at_n(&rankings, &empty, 5), None);
    }

    #[test]
    fn perfect_ranking_scores_one() {
        let rel = BTreeMap::from([("u".to_string(), set(&["a", "b"])), ("v".to_string(), set(&["c"]))]);
        let rankings = BTreeMap::from([
            ("u".to_string(), ids(&["b", "a", "c"])),
            ("v".to_string(), ids(&["c", "a", "b"])),
        ]);
        assert_eq!(map_at_n(&rankings, &rel, 5), Some(1.0));
        assert_eq!(map_at_n(&rankings, &rel, 1), Some(1.0));
    }
}
