//! Thread-level text model: every token of a thread is drawn from the
//! word distribution of the thread's single topic, with a symmetric
//! Dirichlet prior on each topic's distribution integrated out.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::forumdata::WordId;

pub const DEFAULT_ETA: f64 = 0.01;

/// Token counts per topic and word for the currently assigned threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicWordState {
    counts: Vec<Vec<u64>>,
    totals: Vec<u64>,
    eta: f64,
}

impl TopicWordState {
    pub fn new(n_topics: usize, vocab_size: usize, eta: f64) -> Self {
        assert!(eta > 0.0, "Dirichlet smoothing must be positive");
        Self {
            counts: vec![vec![0; vocab_size]; n_topics],
            totals: vec![0; n_topics],
            eta,
        }
    }

    pub fn n_topics(&self) -> usize {
        self.counts.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.counts.first().map_or(0, Vec::len)
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn count(&self, k: usize, w: WordId) -> u64 {
        self.counts[k][w]
    }

    pub fn total(&self, k: usize) -> u64 {
        self.totals[k]
    }

    pub fn add(&mut self, k: usize, bag: &[(WordId, u32)]) {
        for &(w, n) in bag {
            self.counts[k][w] += u64::from(n);
            self.totals[k] += u64::from(n);
        }
    }

    /// # Panics
    /// If the bag was not previously added to topic `k`.
    pub fn remove(&mut self, k: usize, bag: &[(WordId, u32)]) {
        for &(w, n) in bag {
            let n = u64::from(n);
            assert!(self.counts[k][w] >= n, "removing tokens that were never added");
            self.counts[k][w] -= n;
            self.totals[k] -= n;
        }
    }

    /// Predictive log-probability of a whole bag of words under topic `k`:
    /// tokens are added one at a time, each conditioned on the ones before.
    ///
    /// # Panics
    /// If a word id lies outside the vocabulary.
    pub fn text_log_likelihood(&self, bag: &[(WordId, u32)], k: usize) -> f64 {
        let v = self.vocab_size();
        let row = &self.counts[k];
        let denom_base = self.totals[k] as f64 + v as f64 * self.eta;
        let mut ll = 0.0;
        let mut offset = 0.0;
        for &(w, n) in bag {
            assert!(w < v, "word id {w} outside vocabulary of size {v}");
            let base = row[w] as f64 + self.eta;
            for j in 0..n {
                ll += ((base + f64::from(j)) / (denom_base + offset)).ln();
                offset += 1.0;
            }
        }
        ll
    }

    /// Log marginal probability of all assigned tokens, with every topic's
    /// word distribution integrated out.
    pub fn log_marginal(&self) -> f64 {
        let v = self.vocab_size() as f64;
        let mut ll = 0.0;
        for (row, &tot) in self.counts.iter().zip(&self.totals) {
            ll += ln_gamma(v * self.eta) - ln_gamma(tot as f64 + v * self.eta);
            for &c in row.iter().filter(|&&c| c > 0) {
                ll += ln_gamma(c as f64 + self.eta) - ln_gamma(self.eta);
            }
        }
        ll
    }

    /// Posterior-mean topic-word matrix.
    pub fn estimate_phi(&self) -> Vec<Vec<f64>> {
        let v = self.vocab_size() as f64;
        self.counts
            .iter()
            .zip(&self.totals)
            .map(|(row, &tot)| {
                let denom = tot as f64 + v * self.eta;
                row.iter().map(|&c| (c as f64 + self.eta) / denom).collect()
            })
            .collect()
    }
}

/// The `n` most probable words, ties broken lexicographically.
pub fn top_words(phi_k: &[f64], vocabulary: &[String], n: usize) -> Vec<String> {
    let mut idx: Vec<usize> = (0..phi_k.len()).collect();
    idx.sort_by(|&a, &b| {
        phi_k[b]
            .total_cmp(&phi_k[a])
            .then_with(|| vocabulary[a].cmp(&vocabulary[b]))
    });
    idx.into_iter()
        .take(n)
        .map(|i| vocabulary[i].clone())
        .collect()
}

/// Multinomial log-probability of a bag under fixed word probabilities,
/// without the multinomial coefficient.
pub fn bag_log_prob(bag: &[(WordId, u32)], phi_k: &[f64]) -> f64 {
    bag.iter()
        .map(|&(w, n)| f64::from(n) * phi_k[w].ln())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn words(ws: &[&str]) -> Vec<String> {
        ws.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn empty_bag_is_zero() {
        let s = TopicWordState::new(2, 5, 0.01);
        assert_eq!(s.text_log_likelihood(&[], 0), 0.0);
    }

    #[test]
    fn single_token_uniform_state() {
        let s = TopicWordState::new(1, 7, 0.01);
        let ll = s.text_log_likelihood(&[(3, 1)], 0);
        assert!((ll + 7f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn two_copies_hand_value() {
        let s = TopicWordState::new(1, 2, 1.0);
        let ll = s.text_log_likelihood(&[(0, 2)], 0);
        let expected = 0.5f64.ln() + (2.0f64 / 3.0).ln();
        assert!((ll - expected).abs() < 1e-12);
        assert!((ll + 1.0986122886681098).abs() < 1e-12);
    }

    /// Monte-Carlo integration over phi ~ Dirichlet(1, 1) (uniform on the
    /// simplex) of phi_0^2 gives the same marginal probability 1/3.
    #[test]
    fn two_copies_monte_carlo() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 200_000;
        let mean: f64 = (0..n)
            .map(|_| {
                let p: f64 = rng.random();
                p * p
            })
            .sum::<f64>()
            / n as f64;
        let s = TopicWordState::new(1, 2, 1.0);
        let exact = s.text_log_likelihood(&[(0, 2)], 0).exp();
        assert!((mean - exact).abs() < 3e-3, "{mean} vs {exact}");
    }

    #[test]
    fn marginal_matches_sequential_predictive() {
        let mut s = TopicWordState::new(2, 3, 0.5);
        let bag = [(0, 2), (2, 1)];
        let empty = s.text_log_likelihood(&bag, 1);
        s.add(1, &bag);
        assert!((s.log_marginal() - empty).abs() < 1e-12);
    }

    #[test]
    fn phi_estimates() {
        let s = TopicWordState::new(2, 4, 0.01);
        for row in s.estimate_phi() {
            assert!(row.iter().all(|&p| (p - 0.25).abs() < 1e-15));
        }
        let mut s = TopicWordState::new(1, 2, 1.0);
        s.add(0, &[(0, 3), (1, 1)]);
        let phi = s.estimate_phi();
        assert!((phi[0][0] - 4.0 / 6.0).abs() < 1e-15);
        assert!((phi[0][1] - 2.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn top_words_order_and_ties() {
        assert_eq!(top_words(&[1.0 / 3.0; 3], &words(&["a", "b", "c"]), 2), words(&["a", "b"]));
        assert_eq!(top_words(&[0.1, 0.7, 0.2], &words(&["x", "y", "z"]), 1), words(&["y"]));
        assert_eq!(
            top_words(&[0.4, 0.2, 0.4], &words(&["q", "m", "b"]), 3),
            words(&["b", "q", "m"])
        );
    }

    proptest! {
        #[test]
        fn rows_sum_to_one(counts in prop::collection::vec(0u32..50, 1..20), eta in 0.001f64..2.0) {
            let mut s = TopicWordState::new(1, counts.len(), eta);
            let bag: Vec<(usize, u32)> = counts.iter().copied().enumerate().collect();
            s.add(0, &bag);
            let sum: f64 = s.estimate_phi()[0].iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
        }

        #[test]
        fn order_invariant(mut bag in prop::collection::vec((0usize..6, 1u32..4), 0..6), seed in 0u64..1000) {
            bag.sort();
            bag.dedup_by_key(|x| x.0);
            let mut s = TopicWordState::new(2, 6, 0.3);
            s.add(1, &[(0, 3), (4, 2)]);
            let forward = s.text_log_likelihood(&bag, 1);
            let mut shuffled = bag.clone();
            use rand::{seq::SliceRandom, SeedableRng};
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert!((forward - s.text_log_likelihood(&shuffled, 1)).abs() < 1e-10);
        }

        #[test]
        fn add_remove_restores(bag in prop::collection::vec((0usize..5, 1u32..5), 0..5)) {
            let mut s = TopicWordState::new(3, 5, 0.01);
            s.add(0, &[(1, 2)]);
            let before = s.clone();
            s.add(2, &bag);
            s.remove(2, &bag);
            prop_assert_eq!(before, s);
        }

        #[test]
        fn topic_posterior_normalizes(bag in prop::collection::vec((0usize..4, 1u32..3), 1..4)) {
            let mut s = TopicWordState::new(3, 4, 0.5);
            s.add(0, &[(0, 5)]);
            s.add(1, &[(2, 3), (3, 1)]);
            let lw: Vec<f64> = (0..3).map(|k| s.text_log_likelihood(&bag, k) - 3f64.ln()).collect();
            let m = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = lw.iter().map(|x| (x - m).exp()).sum();
            let total: f64 = lw.iter().map(|x| (x - m).exp() / z).sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
        }
    }
}
