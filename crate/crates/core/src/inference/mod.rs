//! Gibbs sampling over thread topics, decay rates, interest and background
//! levels, the two global multipliers, and auxiliary parent assignments.
//!
//! One sweep updates, in order: parents, interest levels `a`, `alpha`,
//! `beta`, background rates `mu`, decay rates `gamma`, thread topics `z`.
//! Topic-word distributions are integrated out.
//!
//! With [`SamplerConfig::collapse_rates`] set (the default) the `gamma` and
//! `z` updates integrate `a` out of their conditionals, and the `z` update
//! integrates `mu` out as well. Both are redrawn before anything conditions
//! on them, so the chain keeps the same stationary distribution while
//! avoiding the lock-in that near-zero prior draws of `a` and `mu` cause.

mod conditionals;
mod sampler;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use conditionals::{
    alpha_posterior, background_posterior, beta_posterior, collapsed_interest_term, interest_posterior,
    parent_log_weights, EdgeCounts, GammaDist,
};
pub use sampler::{augmented_log_likelihood, Sampler, SamplerState, ThreadData, TraceRow};

use crate::error::{Error, Result};
use crate::forumdata::{ForumCorpus, ReplyAnnotation};
use crate::ppcore::ModelParams;

/// Default decay grid as half-lives in days: 10 min, 1 h, 4 h, 1 d, 3 d,
/// 1 w, 2 w.
pub const DEFAULT_HALF_LIVES: [f64; 7] = [
    10.0 / 1440.0,
    1.0 / 24.0,
    4.0 / 24.0,
    1.0,
    3.0,
    7.0,
    14.0,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub n_topics: usize,
    /// Candidate decay rates (1/day).
    pub decay_grid: Vec<f64>,
    pub a_prior: GammaDist,
    pub mu_prior: GammaDist,
    pub alpha_prior: GammaDist,
    pub beta_prior: GammaDist,
    /// Symmetric Dirichlet smoothing of topic-word distributions.
    pub eta: f64,
    pub seed: u64,
    pub collapse_rates: bool,
    /// Fix the parent of a first-comment reply to the post it comments on.
    pub narrow_reply_parents: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            iterations: 200,
            burn_in: 100,
            n_topics: 3,
            decay_grid: DEFAULT_HALF_LIVES.iter().map(|h| std::f64::consts::LN_2 / h).collect(),
            a_prior: GammaDist::new(1e-4, 1.0),
            mu_prior: GammaDist::new(1e-4, 1.0),
            alpha_prior: GammaDist::new(1.0, 1.0),
            beta_prior: GammaDist::new(1.0, 1.0),
            eta: crate::topicmodel::DEFAULT_ETA,
            seed: 0,
            collapse_rates: true,
            narrow_reply_parents: true,
        }
    }
}

impl SamplerConfig {
    pub fn with_half_lives(mut self, half_lives: &[f64]) -> Self {
        self.decay_grid = half_lives.iter().map(|h| std::f64::consts::LN_2 / h).collect();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.iterations {
            return Err(Error::Config(format!(
                "burn_in ({}) must be smaller than iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        if self.n_topics == 0 {
            return Err(Error::Config("at least one topic is required".into()));
        }
        if self.decay_grid.is_empty() || self.decay_grid.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
            return Err(Error::Config("decay grid must be nonempty with positive rates".into()));
        }
        for (name, d) in [
            ("a", self.a_prior),
            ("mu", self.mu_prior),
            ("alpha", self.alpha_prior),
            ("beta", self.beta_prior),
        ] {
            if !(d.shape > 0.0 && d.rate > 0.0 && d.shape.is_finite() && d.rate.is_finite()) {
                return Err(Error::Config(format!("{name} prior must have positive shape and rate")));
            }
        }
        if self.eta.is_nan() || self.eta <= 0.0 {
            return Err(Error::Config("eta must be positive".into()));
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        self.iterations - self.burn_in
    }
}

/// Posterior summary built from the retained samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorEstimate {
    pub n_samples: usize,
    pub seed: u64,
    pub learners: Vec<String>,
    pub vocabulary: Vec<String>,
    pub thread_ids: Vec<String>,
    pub horizon: f64,
    pub decay_grid: Vec<f64>,
    /// Sample mean of `a[u][k]`.
    pub a: Vec<Vec<f64>>,
    pub mu: Vec<Vec<f64>>,
    pub alpha: f64,
    pub beta: f64,
    /// Sample mean of each topic's decay rate.
    pub gamma_mean: Vec<f64>,
    /// Retained draws per topic and grid point.
    pub gamma_counts: Vec<Vec<usize>>,
    /// Most frequent topic per thread, ties to the lower index.
    pub z: Vec<usize>,
    /// Retained draws per thread and topic.
    pub z_counts: Vec<Vec<usize>>,
    pub phi: Vec<Vec<f64>>,
    pub trace: Vec<TraceRow>,
}

impl PosteriorEstimate {
    pub fn n_topics(&self) -> usize {
        self.gamma_counts.len()
    }

    /// Grid index of the most frequent decay rate per topic.
    pub fn gamma_mode_index(&self) -> Vec<usize> {
        self.gamma_counts.iter().map(|c| argmax_first(c)).collect()
    }

    pub fn gamma_mode(&self) -> Vec<f64> {
        self.gamma_mode_index().iter().map(|&s| self.decay_grid[s]).collect()
    }

    /// Point estimate as model parameters; decay rates take their modal
    /// grid value.
    pub fn params(&self) -> ModelParams {
        ModelParams {
            gamma: self.gamma_mode(),
            a: self.a.clone(),
            mu: self.mu.clone(),
            alpha: self.alpha,
            beta: self.beta,
            phi: self.phi.clone(),
        }
    }

    pub fn learner_index(&self, name: &str) -> Option<usize> {
        self.learners.binary_search_by(|l| l.as_str().cmp(name)).ok()
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let s = serde_json::to_string(self)?;
        std::fs::write(path, s).map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&s)?)
    }
}

pub(crate) fn argmax_first(xs: &[usize]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Runs a full chain from prior initialization and summarizes it.
pub fn run_gibbs(corpus: &ForumCorpus, ann: &ReplyAnnotation, config: &SamplerConfig) -> Result<PosteriorEstimate> {
    let mut sampler = Sampler::new(corpus, ann, config.clone())?;
    sampler.run()?;
    sampler.estimate()
}
