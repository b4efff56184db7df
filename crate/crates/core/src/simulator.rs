//! Synthetic forum generator.
//!
//! Thread births follow independent homogeneous Poisson processes per
//! learner and topic. Replies are generated with the cluster (branching)
//! construction: every post spawns, for every learner, a Poisson number of
//! offspring with intensity `m * a[u][k] * exp(-gamma_k (t - t_p))`. Posts
//! are finalized in time order so each source's class for a learner is
//! decided from the history at the moment the source appears, exactly as
//! the rate function classifies it.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet};
use std::path::Path;

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Gamma, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forumdata::{CorpusOptions, ForumCorpus, PostRecord, PreprocessConfig, ThreadRecord};
use crate::ppcore::{kernel_mass, ExcitationClass, ModelParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: ModelParams,
    pub horizon: f64,
    /// Mean of the Poisson token count of each post.
    pub tokens_per_post: f64,
    /// Chance that an offspring post is filed as a comment under the post
    /// that spawned it.
    pub reply_probability: f64,
    pub seed: u64,
}

impl SimConfig {
    pub fn n_learners(&self) -> usize {
        self.params.n_learners()
    }

    pub fn n_topics(&self) -> usize {
        self.params.n_topics()
    }

    pub fn vocab_size(&self) -> usize {
        self.params.phi.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.n_learners() == 0 {
            return Err(Error::Config("at least one learner is required".into()));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config("horizon must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.reply_probability) {
            return Err(Error::Config("reply_probability must lie in [0, 1]".into()));
        }
        if self.tokens_per_post.is_nan() || self.tokens_per_post < 0.0 {
            return Err(Error::Config("tokens_per_post must be nonnegative".into()));
        }
        for k in 0..self.n_topics() {
            let ratio = branching_ratio(&self.params, k);
            if ratio >= 1.0 {
                return Err(Error::Supercritical { topic: k, ratio });
            }
        }
        Ok(())
    }
}

/// Upper bound on the expected number of posts any single post triggers
/// in a topic-`k` thread. Every learner may already be subscribed, and the
/// post has at most one explicit recipient, which is the case for every
/// simulated post.
pub fn branching_ratio(params: &ModelParams, k: usize) -> f64 {
    let g = params.gamma[k];
    let joined = params.alpha.max(1.0);
    let replied = (params.alpha * params.beta).max(joined);
    let col = params.a.iter().map(|row| row[k] / g);
    let (sum, max) = col.fold((0.0, 0.0f64), |(s, m), c| (s + c, m.max(c)));
    joined * sum + (replied - joined) * max
}

/// A thread start: learner, topic and time of the initial post.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Birth {
    pub initiator: usize,
    pub topic: usize,
    pub time: f64,
}

/// A generated post before it is turned into a record.
#[derive(Debug, Clone, PartialEq)]
pub struct SimPost {
    pub author: usize,
    pub time: f64,
    /// Post that generated this one; `None` for the initial post.
    pub cause: Option<usize>,
    /// Class of `cause` relative to `author`.
    pub cause_class: Option<ExcitationClass>,
    /// Filed as a comment under this post.
    pub comment_on: Option<usize>,
    pub recipients: Vec<usize>,
}

/// Ground truth written next to a simulated corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub horizon: f64,
    pub learners: Vec<String>,
    pub vocabulary: Vec<String>,
    pub params: ModelParams,
    /// True topic of each thread, keyed by thread id.
    pub thread_topics: BTreeMap<String, usize>,
}

impl GroundTruth {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let s = serde_json::to_string_pretty(self)?;
        std::fs::write(path, s).map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&s)?)
    }
}

/// Output of a simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedForum {
    pub records: Vec<ThreadRecord>,
    pub truth: GroundTruth,
    /// Generated posts per thread, parallel to `records`.
    pub cascades: Vec<Vec<SimPost>>,
    pub topics: Vec<usize>,
}

impl SimulatedForum {
    /// Options under which the emitted records re-ingest losslessly.
    pub fn corpus_options(&self) -> CorpusOptions {
        CorpusOptions {
            preprocess: PreprocessConfig::permissive(),
            horizon: Some(self.truth.horizon),
        }
    }

    pub fn corpus(&self) -> Result<ForumCorpus> {
        ForumCorpus::from_records(self.records.clone(), &self.corpus_options())
    }
}

pub fn learner_name(u: usize) -> String {
    format!("u{u:05}")
}

/// Letters-only word so that generated text survives tokenization.
/// Lexicographic order matches index order.
pub fn word_name(w: usize) -> String {
    let mut s = String::from("zq");
    let mut x = w;
    let mut letters = [b'a'; 4];
    for slot in letters.iter_mut().rev() {
        *slot = b'a' + (x % 26) as u8;
        x /= 26;
    }
    s.push_str(std::str::from_utf8(&letters).unwrap());
    s
}

pub fn simulate(config: &SimConfig) -> Result<SimulatedForum> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let births = simulate_thread_births(config, &mut rng);

    let learners: Vec<String> = (0..config.n_learners()).map(learner_name).collect();
    let vocabulary: Vec<String> = (0..config.vocab_size()).map(word_name).collect();
    let word_samplers: Vec<WeightedIndex<f64>> = config
        .params
        .phi
        .iter()
        .map(|row| WeightedIndex::new(row).expect("phi rows validated"))
        .collect();

    let mut records = Vec::with_capacity(births.len());
    let mut cascades = Vec::with_capacity(births.len());
    let mut topics = Vec::with_capacity(births.len());
    let mut thread_topics = BTreeMap::new();
    for (i, birth) in births.iter().enumerate() {
        let thread_id = format!("t{i:06}");
        let posts = simulate_replies(birth, config, &mut rng);
        let recs = posts
            .iter()
            .enumerate()
            .map(|(q, p)| {
                let words = simulate_text_with(&word_samplers[birth.topic], config.tokens_per_post, &mut rng);
                PostRecord {
                    post_id: format!("{thread_id}-p{q:04}"),
                    learner: Some(learners[p.author].clone()),
                    time: p.time,
                    text: words
                        .iter()
                        .map(|&w| vocabulary[w].as_str())
                        .collect::<Vec<_>>()
                        .join(" "),
                    parent_post_id: p.comment_on.map(|c| format!("{thread_id}-p{c:04}")),
                    mentions: Vec::new(),
                }
            })
            .collect();
        thread_topics.insert(thread_id.clone(), birth.topic);
        records.push(ThreadRecord {
            thread_id,
            posts: recs,
        });
        cascades.push(posts);
        topics.push(birth.topic);
    }

    Ok(SimulatedForum {
        records,
        truth: GroundTruth {
            seed: config.seed,
            horizon: config.horizon,
            learners,
            vocabulary,
            params: config.params.clone(),
            thread_topics,
        },
        cascades,
        topics,
    })
}

/// Thread starts for every (learner, topic) pair, sorted by time.
pub fn simulate_thread_births<R: Rng>(config: &SimConfig, rng: &mut R) -> Vec<Birth> {
    let mut births = Vec::new();
    for (u, row) in config.params.mu.iter().enumerate() {
        for (k, &mu) in row.iter().enumerate() {
            let mean = mu * config.horizon;
            if mean <= 0.0 {
                continue;
            }
            let n = Poisson::new(mean).expect("positive mean").sample(rng) as usize;
            for _ in 0..n {
                births.push(Birth {
                    initiator: u,
                    topic: k,
                    time: rng.random::<f64>() * config.horizon,
                });
            }
        }
    }
    births.sort_by(|a, b| a.time.total_cmp(&b.time));
    births
}

#[derive(Debug, PartialEq)]
struct Pending {
    time: f64,
    author: usize,
    cause: usize,
    seq: usize,
}

impl Eq for Pending {}

impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on time, then creation order
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Cascade of one thread under construction. Posts are finalized in time
/// order; when a post is finalized its class for every learner is fixed.
struct Cascade<'c> {
    config: &'c SimConfig,
    topic: usize,
    posts: Vec<SimPost>,
    first_post: HashMap<usize, usize>,
    commented: HashSet<usize>,
    heap: BinaryHeap<Pending>,
    seq: usize,
}

impl<'c> Cascade<'c> {
    fn new(config: &'c SimConfig, topic: usize, history: Vec<SimPost>) -> Self {
        let mut first_post = HashMap::new();
        let mut commented = HashSet::new();
        for (q, p) in history.iter().enumerate() {
            first_post.entry(p.author).or_insert(q);
            if let Some(c) = p.comment_on {
                commented.insert(c);
            }
        }
        Self {
            config,
            topic,
            posts: history,
            first_post,
            commented,
            heap: BinaryHeap::new(),
            seq: 0,
        }
    }

    /// Queues the offspring post `q` triggers within `[start, end)`.
    fn spawn<R: Rng>(&mut self, q: usize, start: f64, end: f64, rng: &mut R) {
        let params = &self.config.params;
        let gamma = params.gamma[self.topic];
        let src = &self.posts[q];
        let start = start.max(src.time);
        let window = end - start;
        if window <= 0.0 {
            return;
        }
        let mass = (-gamma * (start - src.time)).exp() * kernel_mass(window, gamma);
        let weights: Vec<f64> = params
            .a
            .iter()
            .enumerate()
            .map(|(v, row)| {
                let class = source_class(q, src, v, &self.first_post);
                class.multiplier(params.alpha, params.beta) * row[self.topic] * mass
            })
            .collect();
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return;
        }
        let n = Poisson::new(total).expect("positive mean").sample(rng) as usize;
        if n == 0 {
            return;
        }
        let pick = WeightedIndex::new(&weights).expect("positive total weight");
        let tail = -(-gamma * window).exp_m1();
        for _ in 0..n {
            let author = pick.sample(rng);
            // inverse CDF of the kernel truncated to (start, end)
            let u: f64 = rng.random();
            let time = start - (-u * tail).ln_1p() / gamma;
            if time <= start || time >= end {
                continue;
            }
            self.heap.push(Pending {
                time,
                author,
                cause: q,
                seq: self.seq,
            });
            self.seq += 1;
        }
    }

    /// Finalizes queued posts in time order until the queue is empty.
    fn run<R: Rng>(&mut self, end: f64, rng: &mut R) {
        while let Some(next) = self.heap.pop() {
            let q = self.posts.len();
            let cause = &self.posts[next.cause];
            let cause_class = Some(source_class(next.cause, cause, next.author, &self.first_post));
            let mut comment_on = None;
            let mut recipients = Vec::new();
            if rng.random::<f64>() < self.config.reply_probability {
                comment_on = Some(next.cause);
                if self.commented.insert(next.cause) && cause.author != next.author {
                    recipients.push(cause.author);
                }
            }
            self.posts.push(SimPost {
                author: next.author,
                time: next.time,
                cause: Some(next.cause),
                cause_class,
                comment_on,
                recipients,
            });
            self.first_post.entry(next.author).or_insert(q);
            self.spawn(q, next.time, end, rng);
        }
    }
}

/// Generates the full reply cascade of one thread, initial post included.
pub fn simulate_replies<R: Rng>(birth: &Birth, config: &SimConfig, rng: &mut R) -> Vec<SimPost> {
    let initial = SimPost {
        author: birth.initiator,
        time: birth.time,
        cause: None,
        cause_class: None,
        comment_on: None,
        recipients: Vec::new(),
    };
    let mut cascade = Cascade::new(config, birth.topic, vec![initial]);
    cascade.spawn(0, birth.time, config.horizon, rng);
    cascade.run(config.horizon, rng);
    cascade.posts
}

/// Continues a topic-`topic` thread whose posts before `start` are
/// `history`, returning only the posts generated in `[start, end)`.
pub fn simulate_window<R: Rng>(
    history: &[SimPost],
    topic: usize,
    start: f64,
    end: f64,
    config: &SimConfig,
    rng: &mut R,
) -> Vec<SimPost> {
    let n = history.len();
    let mut cascade = Cascade::new(config, topic, history.to_vec());
    for q in 0..n {
        cascade.spawn(q, start, end, rng);
    }
    cascade.run(end, rng);
    cascade.posts.split_off(n)
}

/// Class of post `q` as a source for `learner`, given first-post positions.
fn source_class(q: usize, post: &SimPost, learner: usize, first_post: &HashMap<usize, usize>) -> ExcitationClass {
    match first_post.get(&learner) {
        Some(&f) if f <= q => {
            if post.recipients.contains(&learner) {
                ExcitationClass::ExplicitReply
            } else {
                ExcitationClass::PostFirstPost
            }
        }
        _ => ExcitationClass::PreFirstPost,
    }
}

/// Bag of words for one post: Poisson token count, tokens i.i.d. from phi_k.
pub fn simulate_text<R: Rng>(k: usize, params: &ModelParams, tokens_per_post: f64, rng: &mut R) -> Vec<usize> {
    let sampler = WeightedIndex::new(&params.phi[k]).expect("phi row is a distribution");
    simulate_text_with(&sampler, tokens_per_post, rng)
}

fn simulate_text_with<R: Rng>(sampler: &WeightedIndex<f64>, tokens_per_post: f64, rng: &mut R) -> Vec<usize> {
    if tokens_per_post <= 0.0 {
        return Vec::new();
    }
    let n = Poisson::new(tokens_per_post).expect("positive mean").sample(rng) as usize;
    (0..n).map(|_| sampler.sample(rng)).collect()
}

/// Recipe for planted parameters: per topic, a small core of highly
/// interested learners plus a long tail of occasional participants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub n_learners: usize,
    pub half_lives: Vec<f64>,
    pub horizon: f64,
    pub vocab_size: usize,
    pub alpha: f64,
    pub beta: f64,
    /// Expected number of threads over the horizon.
    pub expected_threads: f64,
    /// Target branching bound per topic (< 1), see [`branching_ratio`].
    pub branching_ratio: f64,
    /// Core learners per topic.
    pub core_size: usize,
    /// Share of each topic's interest mass held by its core.
    pub core_interest: f64,
    /// Share of each topic's threads started by its core.
    pub core_threads: f64,
    /// Share of a tail learner's interest on their favourite topic.
    pub focus: f64,
    /// Gamma shape of tail activity weights.
    pub activity_shape: f64,
    /// Share of each topic's word mass placed on its own block of words.
    pub word_focus: f64,
    pub tokens_per_post: f64,
    pub reply_probability: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            n_learners: 200,
            half_lives: vec![4.0 / 24.0, 1.0, 3.0],
            horizon: 60.0,
            vocab_size: 300,
            alpha: 5.0,
            beta: 3.0,
            expected_threads: 500.0,
            branching_ratio: 0.95,
            core_size: 3,
            core_interest: 0.8,
            core_threads: 0.8,
            focus: 0.8,
            activity_shape: 0.5,
            word_focus: 0.9,
            tokens_per_post: 8.0,
            reply_probability: 1.0,
        }
    }
}

impl Scenario {
    pub fn n_topics(&self) -> usize {
        self.half_lives.len()
    }

    fn core_topic(&self, u: usize) -> Option<usize> {
        let k = u / self.core_size.max(1);
        (self.core_size > 0 && k < self.n_topics()).then_some(k)
    }

    /// Draws planted parameters and wraps them in a simulation config.
    pub fn build(&self, seed: u64) -> Result<SimConfig> {
        let k_n = self.n_topics();
        let u_n = self.n_learners;
        if k_n == 0 || self.vocab_size < k_n || u_n <= self.core_size * k_n {
            return Err(Error::Config(
                "scenario needs topics, a word per topic and learners beyond the cores".into(),
            ));
        }
        for (name, x) in [
            ("core_interest", self.core_interest),
            ("core_threads", self.core_threads),
            ("focus", self.focus),
            ("word_focus", self.word_focus),
        ] {
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::Config(format!("{name} must lie in [0, 1]")));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5ce0);
        let activity = Gamma::new(self.activity_shape, 1.0).map_err(|e| Error::Config(e.to_string()))?;
        let gamma: Vec<f64> = self.half_lives.iter().map(|h| std::f64::consts::LN_2 / h).collect();

        // relative weights; columns are normalized per topic below
        let mut tail = vec![vec![0.0; k_n]; u_n];
        let mut core = vec![vec![0.0; k_n]; u_n];
        for u in 0..u_n {
            if let Some(k) = self.core_topic(u) {
                core[u][k] = 1.0;
                continue;
            }
            let w: f64 = activity.sample(&mut rng);
            let fav = rng.random_range(0..k_n);
            for (k, cell) in tail[u].iter_mut().enumerate() {
                let share = if k_n == 1 {
                    1.0
                } else if k == fav {
                    self.focus
                } else {
                    (1.0 - self.focus) / (k_n - 1) as f64
                };
                *cell = w * share;
            }
        }
        let mix = |core_share: f64| -> Vec<Vec<f64>> {
            let mut m = vec![vec![0.0; k_n]; u_n];
            for k in 0..k_n {
                let ct: f64 = core.iter().map(|r| r[k]).sum();
                let tt: f64 = tail.iter().map(|r| r[k]).sum();
                let (cs, ts) = match (ct > 0.0, tt > 0.0) {
                    (true, true) => (core_share, 1.0 - core_share),
                    (true, false) => (1.0, 0.0),
                    _ => (0.0, 1.0),
                };
                for u in 0..u_n {
                    m[u][k] = if ct > 0.0 { cs * core[u][k] / ct } else { 0.0 }
                        + if tt > 0.0 { ts * tail[u][k] / tt } else { 0.0 };
                }
            }
            m
        };

        let mut a = mix(self.core_interest);
        let unit = ModelParams {
            gamma: gamma.clone(),
            a: a.clone(),
            mu: vec![vec![0.0; k_n]; u_n],
            alpha: self.alpha,
            beta: self.beta,
            phi: vec![vec![1.0]; k_n],
        };
        for k in 0..k_n {
            // the bound is linear in the column of a
            let scale = self.branching_ratio / branching_ratio(&unit, k);
            for row in a.iter_mut() {
                row[k] *= scale;
            }
        }
        let per_topic = self.expected_threads / self.horizon / k_n as f64;
        let mu: Vec<Vec<f64>> = mix(self.core_threads)
            .into_iter()
            .map(|r| r.into_iter().map(|x| x * per_topic).collect())
            .collect();

        let block = self.vocab_size / k_n;
        let word_weight = Gamma::new(2.0, 1.0).expect("valid shape");
        let phi = (0..k_n)
            .map(|k| {
                let own: Vec<f64> = (0..self.vocab_size)
                    .map(|w| {
                        if (w / block).min(k_n - 1) == k {
                            word_weight.sample(&mut rng)
                        } else {
                            0.0
                        }
                    })
                    .collect();
                let own_total: f64 = own.iter().sum();
                let row: Vec<f64> = own
                    .iter()
                    .map(|x| self.word_focus * x / own_total + (1.0 - self.word_focus) / self.vocab_size as f64)
                    .collect();
                let s: f64 = row.iter().sum();
                row.into_iter().map(|x| x / s).collect()
            })
            .collect();

        let config = SimConfig {
            params: ModelParams {
                gamma,
                a,
                mu,
                alpha: self.alpha,
                beta: self.beta,
                phi,
            },
            horizon: self.horizon,
            tokens_per_post: self.tokens_per_post,
            reply_probability: self.reply_probability,
            seed,
        };
        config.validate()?;
        Ok(config)
    }
}
