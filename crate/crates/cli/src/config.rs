//! Key-value run configuration, one TOML table per stage.
//!
//! Every table is optional and every key inside it falls back to the
//! library default. Unknown keys are rejected so typos fail before any
//! work starts. Command-line flags override file values.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use forum_hawkes::forumdata::{CorpusOptions, PreprocessConfig};
use forum_hawkes::inference::{GammaDist, SamplerConfig};
use forum_hawkes::simulator::Scenario;
use serde::Deserialize;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: CorpusSection,
    pub simulate: Scenario,
    pub train: TrainSection,
    pub evaluate: EvaluateSection,
}

/// Ingestion settings.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    /// Skip stopword removal and frequency filtering.
    pub permissive: bool,
    pub stopwords: Option<PathBuf>,
    pub min_count: Option<u32>,
    pub max_doc_frac: Option<f64>,
    pub lowercase: Option<bool>,
    /// Observation end (days); defaults to the last post.
    pub horizon: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub iterations: Option<usize>,
    pub burn_in: Option<usize>,
    pub n_topics: Option<usize>,
    /// Decay grid given as half-lives in days.
    pub half_lives: Option<Vec<f64>>,
    pub a_prior: Option<GammaDist>,
    pub mu_prior: Option<GammaDist>,
    pub alpha_prior: Option<GammaDist>,
    pub beta_prior: Option<GammaDist>,
    pub eta: Option<f64>,
    pub collapse_rates: Option<bool>,
    pub narrow_reply_parents: Option<bool>,
    pub checkpoint_every: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    pub t1: Option<Vec<f64>>,
    pub delta_t: Option<Vec<f64>>,
    pub n_topics: Option<Vec<usize>>,
    pub top_n: Option<Vec<usize>>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text)
            .map_err(|e| forum_hawkes::Error::Config(format!("{}: {e}", path.display())).into())
    }
}

impl CorpusSection {
    pub fn options(&self, horizon_flag: Option<f64>) -> Result<CorpusOptions> {
        let mut preprocess = if self.permissive {
            PreprocessConfig::permissive()
        } else {
            PreprocessConfig::default()
        };
        if let Some(path) = &self.stopwords {
            preprocess = preprocess.with_stopword_file(path)?;
        }
        if let Some(x) = self.min_count {
            preprocess.min_count = x;
        }
        if let Some(x) = self.max_doc_frac {
            preprocess.max_doc_frac = x;
        }
        if let Some(x) = self.lowercase {
            preprocess.lowercase = x;
        }
        Ok(CorpusOptions {
            preprocess,
            horizon: horizon_flag.or(self.horizon),
        })
    }
}

impl TrainSection {
    pub fn sampler(&self, seed: u64) -> SamplerConfig {
        let mut c = SamplerConfig {
            seed,
            ..SamplerConfig::default()
        };
        if let Some(h) = &self.half_lives {
            c = c.with_half_lives(h);
        }
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(x) = self.$f.clone() { c.$f = x; })* };
        }
        set!(iterations, burn_in, n_topics, a_prior, mu_prior, alpha_prior, beta_prior, eta, collapse_rates, narrow_reply_parents);
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c: RunConfig = toml::from_str("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.train.sampler(3).iterations, 200);
        assert_eq!(c.train.sampler(3).seed, 3);
    }

    #[test]
    fn sections_override() {
        let c: RunConfig = toml::from_str(
            "[simulate]\nn_learners = 50\n[train]\niterations = 20\nburn_in = 5\nhalf_lives = [1.0]\na_prior = { shape = 2.0, rate = 3.0 }\n[corpus]\npermissive = true\nhorizon = 9.0\n",
        )
        .unwrap();
        assert_eq!(c.simulate.n_learners, 50);
        assert_eq!(c.simulate.horizon, Scenario::default().horizon);
        let s = c.train.sampler(0);
        assert_eq!((s.iterations, s.burn_in), (20, 5));
        assert!((s.decay_grid[0] - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(s.a_prior, GammaDist::new(2.0, 3.0));
        let o = c.corpus.options(None).unwrap();
        assert_eq!(o.horizon, Some(9.0));
        assert_eq!(o.preprocess, PreprocessConfig::permissive());
        assert_eq!(c.corpus.options(Some(4.0)).unwrap().horizon, Some(4.0));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<RunConfig>("[train]\niteration = 3\n").is_err());
        assert!(toml::from_str::<RunConfig>("[simulate]\nlearners = 3\n").is_err());
        assert!(toml::from_str::<RunConfig>("bogus = 1\n").is_err());
    }
}
