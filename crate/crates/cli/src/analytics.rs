//! Summaries of a fitted model: topic timescales with their leading words,
//! the excitation multipliers, and week-by-week topic volume.

use std::collections::HashMap;

use anyhow::{bail, Result};
use forum_hawkes::inference::PosteriorEstimate;
use forum_hawkes::topicmodel::top_words;
use forum_hawkes::ForumCorpus;
use serde::Serialize;

pub const DAYS_PER_WEEK: f64 = 7.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopicSummary {
    pub topic: usize,
    /// Modal decay rate (1/day).
    pub gamma: f64,
    pub half_life_days: f64,
    pub top_words: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExcitationSummary {
    pub alpha: f64,
    pub beta: f64,
    /// Excitation of an explicit reply relative to an unjoined thread.
    pub reply_multiplier: f64,
}

pub fn half_life(gamma: f64) -> f64 {
    std::f64::consts::LN_2 / gamma
}

pub fn topic_summaries(estimate: &PosteriorEstimate, n_words: usize) -> Vec<TopicSummary> {
    estimate
        .gamma_mode()
        .into_iter()
        .enumerate()
        .map(|(k, gamma)| TopicSummary {
            topic: k,
            gamma,
            half_life_days: half_life(gamma),
            top_words: top_words(&estimate.phi[k], &estimate.vocabulary, n_words),
        })
        .collect()
}

pub fn excitation_summary(estimate: &PosteriorEstimate) -> ExcitationSummary {
    ExcitationSummary {
        alpha: estimate.alpha,
        beta: estimate.beta,
        reply_multiplier: estimate.alpha * estimate.beta,
    }
}

/// Week index of a time in days, counted from time zero.
pub fn week_of(t: f64) -> usize {
    (t / DAYS_PER_WEEK).floor().max(0.0) as usize
}

/// `counts[w][k]`: posts in week `w` on threads whose estimated topic is
/// `k`. Every post of every corpus thread is counted once.
pub fn weekly_topic_counts(corpus: &ForumCorpus, estimate: &PosteriorEstimate) -> Result<Vec<Vec<usize>>> {
    let topic_of: HashMap<&str, usize> = estimate
        .thread_ids
        .iter()
        .map(String::as_str)
        .zip(estimate.z.iter().copied())
        .collect();
    let last = corpus
        .threads
        .iter()
        .map(|t| t.last_time())
        .fold(corpus.horizon, f64::max);
    let mut counts = vec![vec![0usize; estimate.n_topics()]; week_of(last) + 1];
    for thread in &corpus.threads {
        let Some(&k) = topic_of.get(thread.thread_id.as_str()) else {
            bail!("thread {} is not covered by the estimate", thread.thread_id);
        };
        for post in &thread.posts {
            counts[week_of(post.time)][k] += 1;
        }
    }
    Ok(counts)
}
