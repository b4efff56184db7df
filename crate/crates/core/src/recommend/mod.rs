//! Thread recommendation over a held-out time window and its evaluation.
//!
//! A split trains on threads started before `t1`, using only their posts
//! before `t1`, and scores whether each learner posts in each of those
//! threads during `[t1, t2)`. New threads started in the test window are
//! never candidates.

mod metrics;
mod sweep;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forumdata::{
    extract_reply_annotations, CorpusOptions, ForumCorpus, PreprocessConfig, ReplyAnnotation, ThreadRecord,
};
use crate::ppcore::{passive_exposure, EventContext, Excitation, ModelParams};
use crate::topicmodel::bag_log_prob;

pub use metrics::{average_precision, map_at_n};
pub use sweep::{sweep_experiment, SweepConfig, SweepRow, METHOD_MODEL, METHOD_POPULARITY, METHOD_RECENCY};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub t1: f64,
    pub t2: f64,
}

impl SplitSpec {
    pub fn new(t1: f64, t2: f64) -> Self {
        Self { t1, t2 }
    }

    pub fn validate(&self, horizon: f64) -> Result<()> {
        if !(0.0 < self.t1 && self.t1 < self.t2 && self.t2 <= horizon) {
            return Err(Error::Config(format!(
                "split needs 0 < t1 < t2 <= horizon, got t1={} t2={} horizon={horizon}",
                self.t1, self.t2
            )));
        }
        Ok(())
    }
}

/// Training corpus plus the held-out posting events.
#[derive(Debug, Clone)]
pub struct TrainSplit {
    pub spec: SplitSpec,
    /// Threads started before `t1`, truncated at `t1`, horizon `t1`.
    pub train: ForumCorpus,
    pub annotations: ReplyAnnotation,
    /// Learner name to the training threads they posted in during the test
    /// window. Anonymous posts are excluded.
    pub test_posts: BTreeMap<String, BTreeSet<String>>,
}

impl TrainSplit {
    /// Learners with at least one test-window post.
    pub fn test_learners(&self) -> impl Iterator<Item = &str> {
        self.test_posts.keys().map(String::as_str)
    }
}

/// Builds the training corpus from raw text before `t1` only, so nothing in
/// the test window can influence preprocessing.
pub fn split_corpus(corpus: &ForumCorpus, spec: SplitSpec, preprocess: &PreprocessConfig) -> Result<TrainSplit> {
    spec.validate(corpus.horizon)?;
    let mut train_records = Vec::new();
    let mut test_posts: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for rec in corpus.to_records() {
        if rec.posts[0].time >= spec.t1 {
            continue;
        }
        for p in &rec.posts {
            if p.time >= spec.t1 && p.time < spec.t2 {
                if let Some(name) = &p.learner {
                    test_posts.entry(name.clone()).or_default().insert(rec.thread_id.clone());
                }
            }
        }
        train_records.push(ThreadRecord {
            thread_id: rec.thread_id,
            posts: rec.posts.into_iter().filter(|p| p.time < spec.t1).collect(),
        });
    }
    if train_records.is_empty() {
        return Err(Error::Config(format!("no thread starts before t1={}", spec.t1)));
    }
    let options = CorpusOptions {
        preprocess: preprocess.clone(),
        horizon: Some(spec.t1),
    };
    let train = ForumCorpus::from_records(train_records, &options)?;
    let annotations = extract_reply_annotations(&train);
    Ok(TrainSplit {
        spec,
        train,
        annotations,
        test_posts,
    })
}

/// Posterior-predictive ranking model over a training split.
#[derive(Debug, Clone)]
pub struct Recommender<'s> {
    split: &'s TrainSplit,
    params: ModelParams,
    /// Interest level used for learners absent from the training data.
    fallback_interest: f64,
    /// `topic_probs[r][k] = P(z_r = k | training data)`.
    topic_probs: Vec<Vec<f64>>,
}

impl<'s> Recommender<'s> {
    /// `params` must be indexed by the training corpus's learners and
    /// vocabulary.
    pub fn new(split: &'s TrainSplit, params: ModelParams, fallback_interest: f64) -> Result<Self> {
        params.validate()?;
        if params.n_learners() != split.train.n_learners()
            || params.phi.first().map_or(0, Vec::len) != split.train.vocab_size()
        {
            return Err(Error::Config("parameters do not match the training corpus".into()));
        }
        let topic_probs = (0..split.train.n_threads())
            .map(|r| topic_posterior(&split.train, &split.annotations, &params, r))
            .collect();
        Ok(Self {
            split,
            params,
            fallback_interest,
            topic_probs,
        })
    }

    pub fn topic_probs(&self, r: usize) -> &[f64] {
        &self.topic_probs[r]
    }

    pub fn set_topic_probs(&mut self, r: usize, probs: Vec<f64>) {
        assert_eq!(probs.len(), self.params.n_topics());
        self.topic_probs[r] = probs;
    }

    fn context(&self, learner: Option<usize>, r: usize) -> EventContext {
        let train = &self.split.train;
        match learner {
            Some(u) => EventContext::build(train, &self.split.annotations, r, u, f64::INFINITY),
            None => EventContext::passive(&train.threads[r].posts.iter().map(|p| p.time).collect::<Vec<_>>()),
        }
    }

    /// Probability that `learner` posts at least once in training thread
    /// `r` during the test window.
    pub fn posting_probability(&self, learner: &str, r: usize) -> f64 {
        let u = self.split.train.learner_id(learner);
        let ctx = self.context(u, r);
        let (t1, t2) = (self.split.spec.t1, self.split.spec.t2);
        self.topic_probs[r]
            .iter()
            .enumerate()
            .map(|(k, &pk)| {
                let a = u.map_or(self.fallback_interest, |u| self.params.a[u][k]);
                let ex = Excitation {
                    a,
                    gamma: self.params.gamma[k],
                    alpha: self.params.alpha,
                    beta: self.params.beta,
                };
                -(-ex.integral(&ctx, t1, t2)).exp_m1() * pk
            })
            .sum::<f64>()
            .clamp(0.0, 1.0)
    }

    /// All training threads with their posting probability, most likely
    /// first, ties by thread id.
    pub fn rank_threads(&self, learner: &str) -> Vec<(String, f64)> {
        let mut scored: Vec<(String, f64)> = self
            .split
            .train
            .threads
            .iter()
            .enumerate()
            .map(|(r, t)| (t.thread_id.clone(), self.posting_probability(learner, r)))
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        scored
    }
}

/// `P(z_r = k)` from the initiator's normalized background rates, the
/// thread text under `phi`, and every learner's training-window posting
/// likelihood in the thread.
pub fn topic_posterior(train: &ForumCorpus, ann: &ReplyAnnotation, params: &ModelParams, r: usize) -> Vec<f64> {
    let k_n = params.n_topics();
    let thread = &train.threads[r];
    let horizon = train.horizon;
    let times: Vec<f64> = thread.posts.iter().map(|p| p.time).collect();
    // Everyone whose context differs from a passive observer's.
    let mut posters: Vec<usize> = thread
        .posts
        .iter()
        .filter_map(|p| p.author)
        .chain(ann.recipients[r].iter().flatten().copied())
        .collect();
    posters.sort_unstable();
    posters.dedup();
    let contexts: Vec<EventContext> = posters
        .iter()
        .map(|&u| EventContext::build(train, ann, r, u, f64::INFINITY))
        .collect();
    let initiator_total: Option<f64> = thread
        .initiator()
        .map(|u| params.mu[u].iter().sum::<f64>())
        .filter(|s| *s > 0.0);

    let lw: Vec<f64> = (0..k_n)
        .map(|k| {
            let mut lw = bag_log_prob(&thread.token_counts, &params.phi[k]);
            if let (Some(u1), Some(total)) = (thread.initiator(), initiator_total) {
                lw += (params.mu[u1][k] / total).ln();
            }
            let total_a: f64 = params.a.iter().map(|row| row[k]).sum();
            let mut poster_a = 0.0;
            for (&u, ctx) in posters.iter().zip(&contexts) {
                poster_a += params.a[u][k];
                lw += params.excitation(u, k).log_likelihood(ctx, horizon).value();
            }
            lw - (total_a - poster_a).max(0.0) * passive_exposure(&times, params.gamma[k], horizon)
        })
        .collect();
    if lw.iter().all(|l| *l == f64::NEG_INFINITY) {
        return vec![1.0 / k_n as f64; k_n];
    }
    crate::stats::softmax(&lw)
}

/// Training threads by training-window post count, most first, ties by id.
pub fn baseline_popularity(split: &TrainSplit) -> Vec<String> {
    let mut threads: Vec<(&str, usize)> = split
        .train
        .threads
        .iter()
        .map(|t| (t.thread_id.as_str(), t.posts.len()))
        .collect();
    threads.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    threads.into_iter().map(|(id, _)| id.to_string()).collect()
}

/// Training threads by latest training post, newest first, ties by id.
pub fn baseline_recency(split: &TrainSplit) -> Vec<String> {
    let mut threads: Vec<(&str, f64)> = split
        .train
        .threads
        .iter()
        .map(|t| (t.thread_id.as_str(), t.last_time()))
        .collect();
    threads.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    threads.into_iter().map(|(id, _)| id.to_string()).collect()
}

/// One ranked row of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingRow {
    pub learner_id: String,
    pub rank: usize,
    pub thread_id: String,
    pub probability: f64,
}

/// Rankings of every test-window learner plus MAP summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    pub rows: Vec<RankingRow>,
    /// `(N, MAP@N)` for the model, `None` when no learner qualifies.
    pub model_map: Vec<(usize, Option<f64>)>,
    pub popularity_map: Vec<(usize, Option<f64>)>,
    pub recency_map: Vec<(usize, Option<f64>)>,
}

/// Ranks threads for every test-window learner, keeping the top `top`
/// rows each, and scores the model and both baselines.
pub fn ranking_report(rec: &Recommender<'_>, ns: &[usize], top: usize) -> RankingReport {
    let split = rec.split;
    let mut rows = Vec::new();
    let mut model: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for learner in split.test_learners() {
        let ranked = rec.rank_threads(learner);
        for (i, (tid, p)) in ranked.iter().take(top).enumerate() {
            rows.push(RankingRow {
                learner_id: learner.to_string(),
                rank: i + 1,
                thread_id: tid.clone(),
                probability: *p,
            });
        }
        model.insert(learner.to_string(), ranked.into_iter().map(|(t, _)| t).collect());
    }
    let ppl = baseline_popularity(split);
    let recent = baseline_recency(split);
    let shared = |list: &Vec<String>| -> BTreeMap<String, Vec<String>> {
        split.test_learners().map(|l| (l.to_string(), list.clone())).collect()
    };
    let (ppl, recent) = (shared(&ppl), shared(&recent));
    let score = |rankings: &BTreeMap<String, Vec<String>>| -> Vec<(usize, Option<f64>)> {
        ns.iter().map(|&n| (n, map_at_n(rankings, &split.test_posts, n))).collect()
    };
    RankingReport {
        rows,
        model_map: score(&model),
        popularity_map: score(&ppl),
        recency_map: score(&recent),
    }
}

#[cfg(test)]
mod tests;
