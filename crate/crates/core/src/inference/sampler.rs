use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::conditionals::{
    alpha_posterior, background_posterior, beta_posterior, collapsed_interest_term, interest_posterior,
    parent_log_weights, EdgeCounts, GammaDist,
};
use super::{argmax_first, PosteriorEstimate, SamplerConfig};
use crate::error::{Error, Result};
use crate::forumdata::{ForumCorpus, LearnerId, ReplyAnnotation, WordId};
use crate::ppcore::{kernel, passive_exposure, EventContext, Excitation, ExcitationStats};
use crate::stats::sample_log_categorical;
use crate::topicmodel::TopicWordState;

/// A post whose time is explained by the excitation process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeledPost {
    /// Position in the thread.
    pub q: usize,
    /// Slot of the author in [`ThreadData::posters`].
    pub poster: usize,
    pub forced_parent: Option<usize>,
}

/// Per-thread structure the sampler reuses every sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ThreadData {
    pub initiator: Option<LearnerId>,
    /// Distinct named authors, ascending.
    pub posters: Vec<LearnerId>,
    /// Context of each poster, parallel to `posters`.
    pub contexts: Vec<EventContext>,
    pub times: Vec<f64>,
    pub modeled: Vec<ModeledPost>,
    pub bag: Vec<(WordId, u32)>,
}

impl ThreadData {
    pub fn build(corpus: &ForumCorpus, ann: &ReplyAnnotation, r: usize, narrow: bool) -> Self {
        let thread = &corpus.threads[r];
        let mut posters: Vec<LearnerId> = thread.posts.iter().filter_map(|p| p.author).collect();
        posters.sort_unstable();
        posters.dedup();
        let contexts = posters
            .iter()
            .map(|&u| EventContext::build(corpus, ann, r, u, f64::INFINITY))
            .collect();
        let modeled = thread
            .posts
            .iter()
            .enumerate()
            .skip(1)
            .filter_map(|(q, p)| {
                let u = p.author?;
                Some(ModeledPost {
                    q,
                    poster: posters.binary_search(&u).expect("author is a poster"),
                    forced_parent: if narrow { ann.first_comment_of[r][q] } else { None },
                })
            })
            .collect();
        Self {
            initiator: thread.initiator(),
            posters,
            contexts,
            times: thread.posts.iter().map(|p| p.time).collect(),
            modeled,
            bag: thread.token_counts.clone(),
        }
    }

    pub fn prepare_all(corpus: &ForumCorpus, ann: &ReplyAnnotation, narrow: bool) -> Vec<Self> {
        (0..corpus.n_threads())
            .into_par_iter()
            .map(|r| Self::build(corpus, ann, r, narrow))
            .collect()
    }

    fn stats(&self, gamma: f64, alpha: f64, beta: f64, horizon: f64) -> TopicStats {
        let ex = Excitation {
            a: 1.0,
            gamma,
            alpha,
            beta,
        };
        TopicStats {
            posters: self.contexts.iter().map(|c| ex.stats(c, horizon)).collect(),
            passive: passive_exposure(&self.times, gamma, horizon),
        }
    }
}

/// Statistics of one thread under one decay rate.
#[derive(Debug, Clone, Default)]
struct TopicStats {
    posters: Vec<ExcitationStats>,
    /// Exposure of a learner who never posted in the thread.
    passive: f64,
}

/// Log-likelihood of a thread's modeled posts with parents fixed:
/// every post contributes `log(m * a * kernel)` for its parent edge, and
/// every poster pays their full class-weighted exposure. Summing its
/// exponential over all parent assignments gives the thread likelihood.
/// `a` is indexed like `thread.posters`.
pub fn augmented_log_likelihood(
    thread: &ThreadData,
    parents: &[usize],
    a: &[f64],
    gamma: f64,
    alpha: f64,
    beta: f64,
    horizon: f64,
) -> f64 {
    let mut ll = 0.0;
    for (m, &p) in thread.modeled.iter().zip(parents) {
        let ctx = &thread.contexts[m.poster];
        let src = ctx.sources[p];
        let mult = src.class.multiplier(alpha, beta);
        ll += (mult * a[m.poster] * kernel(thread.times[m.q] - src.time, gamma)).ln();
    }
    let stats = thread.stats(gamma, alpha, beta, horizon);
    for (st, &ai) in stats.posters.iter().zip(a) {
        ll -= ai * st.exposure.weighted(alpha, beta);
    }
    ll
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: Vec<f64>,
    /// `-inf` while some sampled rate is zero where events occurred.
    #[serde(with = "crate::serde_float")]
    pub log_lik: f64,
}

/// Running sums over retained samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Accumulator {
    n: usize,
    a: Vec<Vec<f64>>,
    mu: Vec<Vec<f64>>,
    alpha: f64,
    beta: f64,
    gamma: Vec<f64>,
    gamma_counts: Vec<Vec<usize>>,
    z_counts: Vec<Vec<usize>>,
    phi: Vec<Vec<f64>>,
}

impl Accumulator {
    fn new(u: usize, k: usize, s: usize, r: usize, v: usize) -> Self {
        Self {
            n: 0,
            a: vec![vec![0.0; k]; u],
            mu: vec![vec![0.0; k]; u],
            alpha: 0.0,
            beta: 0.0,
            gamma: vec![0.0; k],
            gamma_counts: vec![vec![0; s]; k],
            z_counts: vec![vec![0; k]; r],
            phi: vec![vec![0.0; v]; k],
        }
    }
}

/// Complete chain state; serializable for checkpoint and resume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerState {
    /// Completed sweeps.
    pub iteration: usize,
    pub z: Vec<usize>,
    pub gamma_index: Vec<usize>,
    pub a: Vec<Vec<f64>>,
    pub mu: Vec<Vec<f64>>,
    pub alpha: f64,
    pub beta: f64,
    /// `parents[r][q]`: parent of post `q` of thread `r`; `None` for posts
    /// that are not modeled or before the first sweep.
    pub parents: Vec<Vec<Option<usize>>>,
    pub trace: Vec<TraceRow>,
    rng: ChaCha8Rng,
    accum: Accumulator,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    config: SamplerConfig,
    state: SamplerState,
}

const CHECKPOINT_VERSION: u32 = 1;

/// Per-learner sufficient statistics of the current topic assignment.
#[derive(Debug, Clone)]
struct Aggregates {
    /// Modeled posts of `u` in topic-`k` threads.
    events: Vec<Vec<u32>>,
    /// Class-weighted exposure minus passive exposure, over threads `u`
    /// posted in.
    corr: Vec<Vec<f64>>,
    /// Passive exposure summed over all threads of the topic.
    base: Vec<f64>,
    started: Vec<Vec<u32>>,
}

impl Aggregates {
    fn empty(u: usize, k: usize) -> Self {
        Self {
            events: vec![vec![0; k]; u],
            corr: vec![vec![0.0; k]; u],
            base: vec![0.0; k],
            started: vec![vec![0; k]; u],
        }
    }

    fn add(&mut self, td: &ThreadData, st: &TopicStats, k: usize, alpha: f64, beta: f64) {
        self.base[k] += st.passive;
        for (&u, s) in td.posters.iter().zip(&st.posters) {
            self.events[u][k] += s.events;
            self.corr[u][k] += s.exposure.weighted(alpha, beta) - st.passive;
        }
        if let Some(u) = td.initiator {
            self.started[u][k] += 1;
        }
    }

    fn remove(&mut self, td: &ThreadData, st: &TopicStats, k: usize, alpha: f64, beta: f64) {
        self.base[k] -= st.passive;
        for (&u, s) in td.posters.iter().zip(&st.posters) {
            self.events[u][k] -= s.events;
            self.corr[u][k] -= s.exposure.weighted(alpha, beta) - st.passive;
        }
        if let Some(u) = td.initiator {
            self.started[u][k] -= 1;
        }
    }

    fn exposure(&self, u: usize, k: usize) -> f64 {
        // guards against round-off when threads leave a topic
        (self.base[k] + self.corr[u][k]).max(0.0)
    }
}

pub struct Sampler<'a> {
    corpus: &'a ForumCorpus,
    config: SamplerConfig,
    threads: Vec<ThreadData>,
    words: TopicWordState,
    state: SamplerState,
}

impl<'a> Sampler<'a> {
    /// Initializes every latent variable from its prior.
    pub fn new(corpus: &'a ForumCorpus, ann: &ReplyAnnotation, config: SamplerConfig) -> Result<Self> {
        config.validate()?;
        if corpus.n_threads() == 0 {
            return Err(Error::EmptyCorpus);
        }
        let (u_n, k_n, s_n, r_n) = (
            corpus.n_learners(),
            config.n_topics,
            config.decay_grid.len(),
            corpus.n_threads(),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let gamma_index = (0..k_n).map(|_| rng.random_range(0..s_n)).collect();
        let z = (0..r_n).map(|_| rng.random_range(0..k_n)).collect();
        let draw = |d: GammaDist, rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
            (0..u_n).map(|_| (0..k_n).map(|_| d.sample(rng)).collect()).collect()
        };
        let a = draw(config.a_prior, &mut rng);
        let mu = draw(config.mu_prior, &mut rng);
        let alpha = config.alpha_prior.sample(&mut rng);
        let beta = config.beta_prior.sample(&mut rng);
        let state = SamplerState {
            iteration: 0,
            z,
            gamma_index,
            a,
            mu,
            alpha,
            beta,
            parents: corpus.threads.iter().map(|t| vec![None; t.posts.len()]).collect(),
            trace: Vec::new(),
            rng,
            accum: Accumulator::new(u_n, k_n, s_n, r_n, corpus.vocab_size()),
        };
        Self::from_state(corpus, ann, config, state)
    }

    /// Rebuilds a sampler around an existing chain state.
    pub fn from_state(
        corpus: &'a ForumCorpus,
        ann: &ReplyAnnotation,
        config: SamplerConfig,
        state: SamplerState,
    ) -> Result<Self> {
        config.validate()?;
        let k_n = config.n_topics;
        let consistent = state.z.len() == corpus.n_threads()
            && state.a.len() == corpus.n_learners()
            && state.gamma_index.len() == k_n
            && state.z.iter().all(|&k| k < k_n)
            && state.gamma_index.iter().all(|&s| s < config.decay_grid.len())
            && state.accum.phi.first().map_or(0, Vec::len) == corpus.vocab_size();
        if !consistent {
            return Err(Error::Config("sampler state does not match corpus and configuration".into()));
        }
        let threads = ThreadData::prepare_all(corpus, ann, config.narrow_reply_parents);
        let mut words = TopicWordState::new(k_n, corpus.vocab_size(), config.eta);
        for (td, &k) in threads.iter().zip(&state.z) {
            words.add(k, &td.bag);
        }
        Ok(Self {
            corpus,
            config,
            threads,
            words,
            state,
        })
    }

    pub fn resume(corpus: &'a ForumCorpus, ann: &ReplyAnnotation, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cp: Checkpoint = serde_json::from_str(&text)?;
        if cp.version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!("unsupported checkpoint version {}", cp.version)));
        }
        Self::from_state(corpus, ann, cp.config, cp.state)
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let cp = Checkpoint {
            version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            state: self.state.clone(),
        };
        let text = serde_json::to_string(&cp)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn state(&self) -> &SamplerState {
        &self.state
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    pub fn threads(&self) -> &[ThreadData] {
        &self.threads
    }

    /// Overrides the current draws of the global multipliers and rates;
    /// used to study single conditionals in isolation.
    pub fn set_params(&mut self, a: Vec<Vec<f64>>, mu: Vec<Vec<f64>>, alpha: f64, beta: f64) {
        self.state.a = a;
        self.state.mu = mu;
        self.state.alpha = alpha;
        self.state.beta = beta;
    }

    pub fn set_gamma_index(&mut self, gamma_index: Vec<usize>) {
        self.state.gamma_index = gamma_index;
    }

    pub fn set_topics(&mut self, z: Vec<usize>) {
        assert_eq!(z.len(), self.threads.len());
        let mut words = TopicWordState::new(self.config.n_topics, self.corpus.vocab_size(), self.config.eta);
        for (td, &k) in self.threads.iter().zip(&z) {
            words.add(k, &td.bag);
        }
        self.words = words;
        self.state.z = z;
    }

    fn gamma(&self, k: usize) -> f64 {
        self.config.decay_grid[self.state.gamma_index[k]]
    }

    fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.state.rng
    }

    /// Runs sweeps until the configured iteration count is reached.
    pub fn run(&mut self) -> Result<()> {
        self.run_until(self.config.iterations)
    }

    pub fn run_until(&mut self, iterations: usize) -> Result<()> {
        let stop = iterations.min(self.config.iterations);
        while self.state.iteration < stop {
            self.sweep()?;
        }
        Ok(())
    }

    fn current_stats(&self) -> Vec<TopicStats> {
        let (alpha, beta, horizon) = (self.state.alpha, self.state.beta, self.corpus.horizon);
        self.threads
            .par_iter()
            .zip(&self.state.z)
            .map(|(td, &k)| td.stats(self.gamma(k), alpha, beta, horizon))
            .collect()
    }

    fn aggregates(&self, stats: &[TopicStats]) -> Aggregates {
        let mut agg = Aggregates::empty(self.corpus.n_learners(), self.config.n_topics);
        for ((td, st), &k) in self.threads.iter().zip(stats).zip(&self.state.z) {
            agg.add(td, st, k, self.state.alpha, self.state.beta);
        }
        agg
    }

    /// One full sweep in the fixed order.
    pub fn sweep(&mut self) -> Result<()> {
        let edges = self.sample_parents()?;
        let stats = self.current_stats();
        let agg = self.aggregates(&stats);
        self.sample_interest(&agg);
        self.sample_alpha(&edges, &stats);
        self.sample_beta(&edges, &stats);
        self.sample_mu(&agg);
        for k in 0..self.config.n_topics {
            self.sample_decay(k)?;
        }
        self.sample_topics()?;

        let it = self.state.iteration;
        if it >= self.config.burn_in {
            self.accumulate();
        }
        let log_lik = self.log_likelihood();
        self.state.trace.push(TraceRow {
            iteration: it + 1,
            alpha: self.state.alpha,
            beta: self.state.beta,
            gamma: (0..self.config.n_topics).map(|k| self.gamma(k)).collect(),
            log_lik,
        });
        self.state.iteration += 1;
        Ok(())
    }

    /// Log-weights of each candidate parent of post `q` in thread `r`
    /// under the current state.
    pub fn parent_log_weights(&self, r: usize, q: usize) -> Vec<f64> {
        let td = &self.threads[r];
        let m = td
            .modeled
            .iter()
            .find(|m| m.q == q)
            .expect("post is modeled");
        if let Some(p) = m.forced_parent {
            let mut lw = vec![f64::NEG_INFINITY; q];
            lw[p] = 0.0;
            return lw;
        }
        parent_log_weights(
            &td.contexts[m.poster].sources,
            q,
            self.gamma(self.state.z[r]),
            self.state.alpha,
            self.state.beta,
        )
    }

    /// Draws every parent variable and returns the edge counts by class.
    pub fn sample_parents(&mut self) -> Result<EdgeCounts> {
        let mut edges = EdgeCounts::default();
        for r in 0..self.threads.len() {
            let n_modeled = self.threads[r].modeled.len();
            for i in 0..n_modeled {
                let m = self.threads[r].modeled[i];
                let p = match m.forced_parent {
                    Some(p) => p,
                    None => {
                        let lw = self.parent_log_weights(r, m.q);
                        if lw.iter().all(|l| *l == f64::NEG_INFINITY) {
                            return Err(Error::Collapse {
                                variable: format!("parent of post {} in thread {}", m.q, self.corpus.threads[r].thread_id),
                            });
                        }
                        let u = self.rng().random();
                        sample_log_categorical(&lw, u)
                    }
                };
                self.state.parents[r][m.q] = Some(p);
                edges.add(self.threads[r].contexts[m.poster].sources[p].class);
            }
        }
        Ok(edges)
    }

    fn sample_interest(&mut self, agg: &Aggregates) {
        let prior = self.config.a_prior;
        for u in 0..self.corpus.n_learners() {
            for k in 0..self.config.n_topics {
                let post = interest_posterior(prior, u64::from(agg.events[u][k]), agg.exposure(u, k));
                self.state.a[u][k] = post.sample(&mut self.state.rng);
            }
        }
    }

    /// Conditional of `alpha` given the current parents, `a`, `beta` and
    /// topic assignment.
    fn alpha_conditional(&self, edges: &EdgeCounts, stats: &[TopicStats]) -> GammaDist {
        let beta = self.state.beta;
        let mut exposure = 0.0;
        for ((td, st), &k) in self.threads.iter().zip(stats).zip(&self.state.z) {
            for (&u, s) in td.posters.iter().zip(&st.posters) {
                exposure += self.state.a[u][k] * (s.exposure.post + beta * s.exposure.reply);
            }
        }
        alpha_posterior(self.config.alpha_prior, edges, exposure)
    }

    fn beta_conditional(&self, edges: &EdgeCounts, stats: &[TopicStats]) -> GammaDist {
        let alpha = self.state.alpha;
        let mut exposure = 0.0;
        for ((td, st), &k) in self.threads.iter().zip(stats).zip(&self.state.z) {
            for (&u, s) in td.posters.iter().zip(&st.posters) {
                exposure += alpha * self.state.a[u][k] * s.exposure.reply;
            }
        }
        beta_posterior(self.config.beta_prior, edges, exposure)
    }

    fn sample_alpha(&mut self, edges: &EdgeCounts, stats: &[TopicStats]) {
        let d = self.alpha_conditional(edges, stats);
        self.state.alpha = d.sample(&mut self.state.rng);
    }

    fn sample_beta(&mut self, edges: &EdgeCounts, stats: &[TopicStats]) {
        let d = self.beta_conditional(edges, stats);
        self.state.beta = d.sample(&mut self.state.rng);
    }

    /// Conditionals of `alpha` and `beta` under the current state.
    pub fn multiplier_conditionals(&self, edges: &EdgeCounts) -> (GammaDist, GammaDist) {
        let stats = self.current_stats();
        (self.alpha_conditional(edges, &stats), self.beta_conditional(edges, &stats))
    }

    /// Conditional of `a[u][k]` under the current state.
    pub fn interest_conditional(&self, u: usize, k: usize) -> GammaDist {
        let agg = self.aggregates(&self.current_stats());
        interest_posterior(self.config.a_prior, u64::from(agg.events[u][k]), agg.exposure(u, k))
    }

    fn sample_mu(&mut self, agg: &Aggregates) {
        let prior = self.config.mu_prior;
        let horizon = self.corpus.horizon;
        for u in 0..self.corpus.n_learners() {
            for k in 0..self.config.n_topics {
                let post = background_posterior(prior, u64::from(agg.started[u][k]), horizon);
                self.state.mu[u][k] = post.sample(&mut self.state.rng);
            }
        }
    }

    /// Log-weights of every grid point for topic `k`'s decay rate.
    pub fn decay_log_weights(&self, k: usize) -> Vec<f64> {
        let (alpha, beta, horizon) = (self.state.alpha, self.state.beta, self.corpus.horizon);
        let members: Vec<&ThreadData> = self
            .threads
            .iter()
            .zip(&self.state.z)
            .filter(|(_, &z)| z == k)
            .map(|(td, _)| td)
            .collect();
        let u_n = self.corpus.n_learners();
        let prior = self.config.a_prior;
        let collapse = self.config.collapse_rates;
        let a = &self.state.a;
        self.config
            .decay_grid
            .par_iter()
            .map(|&g| {
                let mut lks = 0.0;
                let mut base = 0.0;
                let mut corr = vec![0.0; u_n];
                let mut events = vec![0u32; u_n];
                for td in &members {
                    let st = td.stats(g, alpha, beta, horizon);
                    base += st.passive;
                    for (&u, s) in td.posters.iter().zip(&st.posters) {
                        lks += s.log_kernel_sum;
                        corr[u] += s.exposure.weighted(alpha, beta) - st.passive;
                        events[u] += s.events;
                    }
                }
                let mut lw = lks;
                for u in 0..u_n {
                    let exposure = (base + corr[u]).max(0.0);
                    lw -= if collapse {
                        (prior.shape + f64::from(events[u])) * (prior.rate + exposure).ln()
                    } else {
                        a[u][k] * exposure
                    };
                }
                lw
            })
            .collect()
    }

    pub fn sample_decay(&mut self, k: usize) -> Result<()> {
        let lw = self.decay_log_weights(k);
        if lw.iter().all(|l| !l.is_finite()) {
            return Err(Error::Collapse {
                variable: format!("gamma[{k}]"),
            });
        }
        let u = self.rng().random();
        self.state.gamma_index[k] = sample_log_categorical(&lw, u);
        Ok(())
    }

    fn topic_stats_all(&self) -> Vec<Vec<TopicStats>> {
        let (alpha, beta, horizon) = (self.state.alpha, self.state.beta, self.corpus.horizon);
        let gammas: Vec<f64> = (0..self.config.n_topics).map(|k| self.gamma(k)).collect();
        self.threads
            .par_iter()
            .map(|td| gammas.iter().map(|&g| td.stats(g, alpha, beta, horizon)).collect())
            .collect()
    }

    /// Log-weights of thread `r`'s topic with the thread removed from the
    /// other threads' statistics. `words` and `agg` must exclude `r`.
    fn topic_log_weights_excluding(
        &self,
        r: usize,
        cache: &[TopicStats],
        words: &TopicWordState,
        agg: &Aggregates,
        interest_totals: &[f64],
    ) -> Vec<f64> {
        let td = &self.threads[r];
        let (alpha, beta) = (self.state.alpha, self.state.beta);
        let prior = self.config.a_prior;
        (0..self.config.n_topics)
            .map(|k| {
                let st = &cache[k];
                let mut lw = words.text_log_likelihood(&td.bag, k);
                if self.config.collapse_rates {
                    if let Some(u1) = td.initiator {
                        lw += (self.config.mu_prior.shape + f64::from(agg.started[u1][k])).ln();
                    }
                    let p = st.passive;
                    let term = |u: usize| {
                        let s = prior.shape + f64::from(agg.events[u][k]);
                        let rho = prior.rate + agg.exposure(u, k);
                        (s, rho)
                    };
                    for u in 0..self.corpus.n_learners() {
                        let (s, rho) = term(u);
                        lw -= s * (p / rho).ln_1p();
                    }
                    for (&u, sp) in td.posters.iter().zip(&st.posters) {
                        let (s, rho) = term(u);
                        lw += s * (p / rho).ln_1p();
                        lw += collapsed_interest_term(
                            s,
                            rho,
                            sp.events,
                            sp.log_kernel_sum,
                            sp.exposure.weighted(alpha, beta),
                        );
                    }
                } else {
                    if let Some(u1) = td.initiator {
                        lw += self.state.mu[u1][k].ln();
                    }
                    let mut poster_a = 0.0;
                    for (&u, sp) in td.posters.iter().zip(&st.posters) {
                        let a = self.state.a[u][k];
                        poster_a += a;
                        lw += sp.log_likelihood(a, alpha, beta);
                    }
                    lw -= st.passive * (interest_totals[k] - poster_a).max(0.0);
                }
                lw
            })
            .collect()
    }

    fn interest_totals(&self) -> Vec<f64> {
        (0..self.config.n_topics)
            .map(|k| self.state.a.iter().map(|row| row[k]).sum())
            .collect()
    }

    /// Log-weights of thread `r`'s topic under the current state.
    pub fn topic_log_weights(&self, r: usize) -> Vec<f64> {
        let cache = self.topic_stats_all();
        let stats: Vec<TopicStats> = cache
            .iter()
            .zip(&self.state.z)
            .map(|(c, &k)| c[k].clone())
            .collect();
        let (alpha, beta) = (self.state.alpha, self.state.beta);
        let mut agg = self.aggregates(&stats);
        let k_old = self.state.z[r];
        agg.remove(&self.threads[r], &stats[r], k_old, alpha, beta);
        let mut words = self.words.clone();
        words.remove(k_old, &self.threads[r].bag);
        self.topic_log_weights_excluding(r, &cache[r], &words, &agg, &self.interest_totals())
    }

    /// Redraws every thread topic in turn, updating counts after each draw.
    pub fn sample_topics(&mut self) -> Result<()> {
        let cache = self.topic_stats_all();
        let (alpha, beta) = (self.state.alpha, self.state.beta);
        let current: Vec<TopicStats> = cache
            .iter()
            .zip(&self.state.z)
            .map(|(c, &k)| c[k].clone())
            .collect();
        let mut agg = self.aggregates(&current);
        let totals = self.interest_totals();
        let mut words = std::mem::replace(&mut self.words, TopicWordState::new(1, 1, 1.0));
        for (r, stats) in cache.iter().enumerate() {
            let k_old = self.state.z[r];
            let td = &self.threads[r];
            agg.remove(td, &stats[k_old], k_old, alpha, beta);
            words.remove(k_old, &td.bag);
            let lw = self.topic_log_weights_excluding(r, stats, &words, &agg, &totals);
            if lw.iter().all(|l| *l == f64::NEG_INFINITY) || lw.iter().any(|l| l.is_nan()) {
                self.words = words;
                return Err(Error::Collapse {
                    variable: format!("topic of thread {}", self.corpus.threads[r].thread_id),
                });
            }
            let u = self.state.rng.random();
            let k_new = sample_log_categorical(&lw, u);
            let td = &self.threads[r];
            agg.add(td, &stats[k_new], k_new, alpha, beta);
            words.add(k_new, &td.bag);
            self.state.z[r] = k_new;
        }
        self.words = words;
        Ok(())
    }

    fn accumulate(&mut self) {
        let phi = self.words.estimate_phi();
        let grid = &self.config.decay_grid;
        let s = &mut self.state;
        let acc = &mut s.accum;
        acc.n += 1;
        for (sum, cur) in acc.a.iter_mut().zip(&s.a) {
            for (x, y) in sum.iter_mut().zip(cur) {
                *x += y;
            }
        }
        for (sum, cur) in acc.mu.iter_mut().zip(&s.mu) {
            for (x, y) in sum.iter_mut().zip(cur) {
                *x += y;
            }
        }
        acc.alpha += s.alpha;
        acc.beta += s.beta;
        for (k, &gi) in s.gamma_index.iter().enumerate() {
            acc.gamma[k] += grid[gi];
            acc.gamma_counts[k][gi] += 1;
        }
        for (r, &k) in s.z.iter().enumerate() {
            acc.z_counts[r][k] += 1;
        }
        for (sum, cur) in acc.phi.iter_mut().zip(&phi) {
            for (x, y) in sum.iter_mut().zip(cur) {
                *x += y;
            }
        }
    }

    /// Log-likelihood of all post times and text under the current state,
    /// with topic-word distributions integrated out.
    pub fn log_likelihood(&self) -> f64 {
        let stats = self.current_stats();
        let (alpha, beta) = (self.state.alpha, self.state.beta);
        let totals = self.interest_totals();
        let mut ll = 0.0;
        for ((td, st), &k) in self.threads.iter().zip(&stats).zip(&self.state.z) {
            let mut poster_a = 0.0;
            for (&u, sp) in td.posters.iter().zip(&st.posters) {
                let a = self.state.a[u][k];
                poster_a += a;
                ll += sp.log_likelihood(a, alpha, beta);
            }
            ll -= st.passive * (totals[k] - poster_a).max(0.0);
        }
        let mut started = vec![vec![0u32; self.config.n_topics]; self.corpus.n_learners()];
        for (td, &k) in self.threads.iter().zip(&self.state.z) {
            if let Some(u) = td.initiator {
                started[u][k] += 1;
            }
        }
        for (row_mu, row_n) in self.state.mu.iter().zip(&started) {
            for (&mu, &n) in row_mu.iter().zip(row_n) {
                ll += crate::ppcore::initial_post_log_likelihood(n, self.corpus.horizon, mu).value();
            }
        }
        ll + self.words.log_marginal()
    }

    /// Summary of the retained samples.
    pub fn estimate(&self) -> Result<PosteriorEstimate> {
        let acc = &self.state.accum;
        if acc.n == 0 {
            return Err(Error::Config("no post-burn-in samples retained yet".into()));
        }
        let n = acc.n as f64;
        let scale = |m: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            m.iter().map(|r| r.iter().map(|x| x / n).collect()).collect()
        };
        Ok(PosteriorEstimate {
            n_samples: acc.n,
            seed: self.config.seed,
            learners: self.corpus.learners.clone(),
            vocabulary: self.corpus.vocabulary.clone(),
            thread_ids: self.corpus.threads.iter().map(|t| t.thread_id.clone()).collect(),
            horizon: self.corpus.horizon,
            decay_grid: self.config.decay_grid.clone(),
            a: scale(&acc.a),
            mu: scale(&acc.mu),
            alpha: acc.alpha / n,
            beta: acc.beta / n,
            gamma_mean: acc.gamma.iter().map(|g| g / n).collect(),
            gamma_counts: acc.gamma_counts.clone(),
            z: acc.z_counts.iter().map(|c| argmax_first(c)).collect(),
            z_counts: acc.z_counts.clone(),
            phi: scale(&acc.phi),
            trace: self.state.trace.clone(),
        })
    }
}
