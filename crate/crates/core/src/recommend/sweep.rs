use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{baseline_popularity, baseline_recency, ranking_report, split_corpus, Recommender, SplitSpec, TrainSplit};
use crate::error::{Error, Result};
use crate::forumdata::{ForumCorpus, PreprocessConfig};
use crate::inference::{run_gibbs, SamplerConfig};
use crate::recommend::map_at_n;

/// Grid of training cutoffs, test-window lengths, topic counts and ranking
/// depths.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub t1: Vec<f64>,
    pub delta_t: Vec<f64>,
    pub n_topics: Vec<usize>,
    pub top_n: Vec<usize>,
    pub sampler: SamplerConfig,
    pub preprocess: PreprocessConfig,
}

/// One MAP cell. `k` is `None` on baseline rows; `map` is `None` when no
/// learner posted in the test window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub method: String,
    pub t1: f64,
    pub delta_t: f64,
    pub k: Option<usize>,
    pub n: usize,
    pub map: Option<f64>,
}

pub const METHOD_MODEL: &str = "model";
pub const METHOD_POPULARITY: &str = "PPL";
pub const METHOD_RECENCY: &str = "REC";

/// Trains one chain per `(t1, K)` and scores every `(delta_t, N)` against
/// both baselines. Cells run in parallel on the current rayon pool; output
/// order is fixed: by `t1`, then `delta_t`, then baselines before the
/// model rows in grid order.
pub fn sweep_experiment(corpus: &ForumCorpus, config: &SweepConfig) -> Result<Vec<SweepRow>> {
    if config.t1.is_empty() || config.delta_t.is_empty() || config.n_topics.is_empty() || config.top_n.is_empty() {
        return Err(Error::Config("every sweep grid must be nonempty".into()));
    }
    for &t1 in &config.t1 {
        for &dt in &config.delta_t {
            SplitSpec::new(t1, t1 + dt).validate(corpus.horizon)?;
        }
    }
    if config.n_topics.contains(&0) || config.top_n.contains(&0) {
        return Err(Error::Config("topic counts and ranking depths must be positive".into()));
    }

    // Splits sharing t1 share a training corpus; None marks a cutoff before
    // any thread starts.
    let splits: Vec<Vec<Option<TrainSplit>>> = config
        .t1
        .iter()
        .map(|&t1| {
            config
                .delta_t
                .iter()
                .map(|&dt| match split_corpus(corpus, SplitSpec::new(t1, t1 + dt), &config.preprocess) {
                    Ok(s) => Ok(Some(s)),
                    Err(Error::Config(_)) => Ok(None),
                    Err(e) => Err(e),
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize)> = (0..config.t1.len())
        .flat_map(|i| (0..config.n_topics.len()).map(move |j| (i, j)))
        .collect();
    let model_maps: Vec<Vec<Vec<Option<f64>>>> = jobs
        .par_iter()
        .map(|&(i, j)| -> Result<Vec<Vec<Option<f64>>>> {
            let Some(first) = splits[i][0].as_ref() else {
                return Ok(vec![vec![None; config.top_n.len()]; config.delta_t.len()]);
            };
            let sampler = SamplerConfig {
                n_topics: config.n_topics[j],
                ..config.sampler.clone()
            };
            let estimate = run_gibbs(&first.train, &first.annotations, &sampler)?;
            let fallback = sampler.a_prior.mean();
            splits[i]
                .iter()
                .map(|split| {
                    let split = split.as_ref().expect("all splits of one cutoff share training threads");
                    let rec = Recommender::new(split, estimate.params(), fallback)?;
                    let report = ranking_report(&rec, &config.top_n, 0);
                    Ok(report.model_map.into_iter().map(|(_, m)| m).collect())
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (i, &t1) in config.t1.iter().enumerate() {
        for (d, &dt) in config.delta_t.iter().enumerate() {
            let split = splits[i][d].as_ref();
            for (method, rank) in [
                (METHOD_POPULARITY, baseline_popularity as fn(&TrainSplit) -> Vec<String>),
                (METHOD_RECENCY, baseline_recency),
            ] {
                for &n in &config.top_n {
                    let map = split.and_then(|s| {
                        let list = rank(s);
                        let rankings = s.test_learners().map(|l| (l.to_string(), list.clone())).collect();
                        map_at_n(&rankings, &s.test_posts, n)
                    });
                    rows.push(SweepRow {
                        method: method.to_string(),
                        t1,
                        delta_t: dt,
                        k: None,
                        n,
                        map,
                    });
                }
            }
            for (j, &k) in config.n_topics.iter().enumerate() {
                let cell = &model_maps[i * config.n_topics.len() + j][d];
                for (x, &n) in config.top_n.iter().enumerate() {
                    rows.push(SweepRow {
                        method: METHOD_MODEL.to_string(),
                        t1,
                        delta_t: dt,
                        k: Some(k),
                        n,
                        map: cell[x],
                    });
                }
            }
        }
    }
    Ok(rows)
}
