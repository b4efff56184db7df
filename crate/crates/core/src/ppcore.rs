//! Rate functions, closed-form integrals and log-likelihoods for the
//! exponential-kernel forum process.
//!
//! For learner `u` in a thread on topic `k`, each earlier post `p` adds
//! `m_p * a[u][k] * exp(-gamma[k] * (t - t_p))` to the posting rate, with
//! the multiplier `m_p` set by the post's [`ExcitationClass`] relative to
//! `u`. Initial thread posts follow a constant background rate `mu[u][k]`.
//!
//! A source at exactly `t_p == t` does not yet contribute.

use std::ops::Add;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forumdata::{ForumCorpus, LearnerId, ReplyAnnotation};

/// Exponential decay kernel `exp(-gamma * dt)`.
///
/// # Panics
/// If `dt` is negative or `gamma` is not positive.
pub fn kernel(dt: f64, gamma: f64) -> f64 {
    assert!(dt >= 0.0, "kernel evaluated at negative lag {dt}");
    assert!(gamma > 0.0, "decay rate must be positive, got {gamma}");
    (-gamma * dt).exp()
}

/// `(1 - exp(-gamma * span)) / gamma`: total excitation a unit source
/// delivers over `span` time units.
pub fn kernel_mass(span: f64, gamma: f64) -> f64 {
    if span <= 0.0 {
        return 0.0;
    }
    -(-gamma * span).exp_m1() / gamma
}

/// How a source post relates to the learner whose rate is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExcitationClass {
    /// Before the learner's first post in the thread (multiplier 1).
    PreFirstPost,
    /// At or after the learner's first post (multiplier alpha).
    PostFirstPost,
    /// An explicit reply to the learner (multiplier beta * alpha).
    ExplicitReply,
}

impl ExcitationClass {
    pub fn multiplier(self, alpha: f64, beta: f64) -> f64 {
        match self {
            ExcitationClass::PreFirstPost => 1.0,
            ExcitationClass::PostFirstPost => alpha,
            ExcitationClass::ExplicitReply => beta * alpha,
        }
    }

    /// Classifies post `q` of a thread for a learner whose first post sits
    /// at `first_post` (None if they never posted).
    pub fn classify(q: usize, first_post: Option<usize>, is_recipient: bool) -> Self {
        match first_post {
            Some(f) if q >= f => {
                if is_recipient {
                    ExcitationClass::ExplicitReply
                } else {
                    ExcitationClass::PostFirstPost
                }
            }
            _ => ExcitationClass::PreFirstPost,
        }
    }
}

/// Log-likelihood value with an explicit marker for an impossible event
/// sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LogLik {
    Finite(f64),
    NegInfinite,
}

impl LogLik {
    pub fn from_f64(x: f64) -> Self {
        if x == f64::NEG_INFINITY {
            LogLik::NegInfinite
        } else {
            LogLik::Finite(x)
        }
    }

    pub fn value(self) -> f64 {
        match self {
            LogLik::Finite(x) => x,
            LogLik::NegInfinite => f64::NEG_INFINITY,
        }
    }

    pub fn is_neg_infinite(self) -> bool {
        matches!(self, LogLik::NegInfinite)
    }
}

impl Add for LogLik {
    type Output = LogLik;

    fn add(self, rhs: LogLik) -> LogLik {
        match (self, rhs) {
            (LogLik::Finite(a), LogLik::Finite(b)) => LogLik::Finite(a + b),
            _ => LogLik::NegInfinite,
        }
    }
}

/// Complete parameter set of the model. Matrices are indexed `[learner][topic]`
/// and `[topic][word]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Per-topic decay rate, 1/day.
    pub gamma: Vec<f64>,
    /// Interest levels `a[u][k]`.
    pub a: Vec<Vec<f64>>,
    /// Background thread-start rates `mu[u][k]`.
    pub mu: Vec<Vec<f64>>,
    pub alpha: f64,
    pub beta: f64,
    /// Topic-word distributions, one row per topic.
    pub phi: Vec<Vec<f64>>,
}

impl ModelParams {
    pub fn n_topics(&self) -> usize {
        self.gamma.len()
    }

    pub fn n_learners(&self) -> usize {
        self.a.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.n_topics();
        if k == 0 {
            return Err(Error::Config("at least one topic is required".into()));
        }
        if self.gamma.iter().any(|&g| !(g > 0.0 && g.is_finite())) {
            return Err(Error::Config("decay rates must be positive".into()));
        }
        if self.mu.len() != self.a.len() {
            return Err(Error::Config("a and mu must have one row per learner".into()));
        }
        for row in self.a.iter().chain(&self.mu) {
            if row.len() != k || row.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
                return Err(Error::Config(
                    "a and mu rows need K nonnegative entries".into(),
                ));
            }
        }
        if !(self.alpha >= 0.0 && self.beta >= 0.0) {
            return Err(Error::Config("alpha and beta must be nonnegative".into()));
        }
        if self.phi.len() != k {
            return Err(Error::Config("phi needs one row per topic".into()));
        }
        for row in &self.phi {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 || row.iter().any(|&x| x < 0.0) {
                return Err(Error::Config("phi rows must be probability vectors".into()));
            }
        }
        Ok(())
    }

    pub fn excitation(&self, u: LearnerId, k: usize) -> Excitation {
        Excitation {
            a: self.a[u][k],
            gamma: self.gamma[k],
            alpha: self.alpha,
            beta: self.beta,
        }
    }

    /// Half-life `ln 2 / gamma_k` in days.
    pub fn half_life(&self, k: usize) -> f64 {
        std::f64::consts::LN_2 / self.gamma[k]
    }
}

/// A prior post acting as an excitation source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Source {
    pub time: f64,
    pub class: ExcitationClass,
}

/// One learner's view of one thread: every post as a classified source,
/// plus the positions of the learner's own modeled posts.
///
/// The thread's initial post is never a modeled event; it belongs to the
/// background process.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EventContext {
    pub sources: Vec<Source>,
    /// Indices into `sources` of the learner's own posts, initial post excluded.
    pub events: Vec<usize>,
}

impl EventContext {
    /// Context for learner `u` in thread `r`, restricted to posts strictly
    /// before `cutoff`.
    pub fn build(
        corpus: &ForumCorpus,
        ann: &ReplyAnnotation,
        r: usize,
        u: LearnerId,
        cutoff: f64,
    ) -> Self {
        let thread = &corpus.threads[r];
        let first = ann.first_post(r, u);
        let mut ctx = EventContext::default();
        for (q, post) in thread.posts.iter().enumerate() {
            if post.time >= cutoff {
                break;
            }
            let class = ExcitationClass::classify(q, first, ann.recipients[r][q].contains(&u));
            ctx.sources.push(Source {
                time: post.time,
                class,
            });
            if q > 0 && post.author == Some(u) {
                ctx.events.push(q);
            }
        }
        ctx
    }

    /// Context where all sources are pre-first-post and the learner has no
    /// events of their own.
    pub fn passive(times: &[f64]) -> Self {
        EventContext {
            sources: times
                .iter()
                .map(|&time| Source {
                    time,
                    class: ExcitationClass::PreFirstPost,
                })
                .collect(),
            events: Vec::new(),
        }
    }

    pub fn event_times(&self) -> impl Iterator<Item = f64> + '_ {
        self.events.iter().map(|&i| self.sources[i].time)
    }
}

/// Unweighted excitation mass split by class.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassExposure {
    pub pre: f64,
    pub post: f64,
    pub reply: f64,
}

impl ClassExposure {
    pub fn weighted(&self, alpha: f64, beta: f64) -> f64 {
        self.pre + alpha * self.post + alpha * beta * self.reply
    }

    fn add(&mut self, class: ExcitationClass, x: f64) {
        match class {
            ExcitationClass::PreFirstPost => self.pre += x,
            ExcitationClass::PostFirstPost => self.post += x,
            ExcitationClass::ExplicitReply => self.reply += x,
        }
    }
}

/// Sufficient statistics of one learner's thread likelihood as a function
/// of the interest level `a`:
/// `loglik(a) = events * ln a + log_kernel_sum - a * exposure.weighted(alpha, beta)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ExcitationStats {
    pub events: u32,
    pub log_kernel_sum: f64,
    pub exposure: ClassExposure,
}

impl ExcitationStats {
    pub fn log_likelihood(&self, a: f64, alpha: f64, beta: f64) -> f64 {
        let event_term = if self.events == 0 {
            0.0
        } else if a > 0.0 {
            f64::from(self.events) * a.ln()
        } else {
            return f64::NEG_INFINITY;
        };
        event_term + self.log_kernel_sum - a * self.exposure.weighted(alpha, beta)
    }
}

/// Scalar parameters that fix one learner-topic rate function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Excitation {
    pub a: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Excitation {
    fn multiplier(&self, class: ExcitationClass) -> f64 {
        class.multiplier(self.alpha, self.beta)
    }

    /// Sum of `m_p * exp(-gamma (t - t_p))` over sources with `t_p < t`.
    pub fn kernel_sum(&self, ctx: &EventContext, t: f64) -> f64 {
        ctx.sources
            .iter()
            .take_while(|s| s.time < t)
            .map(|s| self.multiplier(s.class) * kernel(t - s.time, self.gamma))
            .sum()
    }

    pub fn rate(&self, ctx: &EventContext, t: f64) -> f64 {
        self.a * self.kernel_sum(ctx, t)
    }

    /// Closed-form integral of [`Excitation::rate`] over `[t0, t1]`.
    pub fn integral(&self, ctx: &EventContext, t0: f64, t1: f64) -> f64 {
        assert!(t0 <= t1, "integration bounds out of order: {t0} > {t1}");
        let g = self.gamma;
        let mut total = 0.0;
        for s in ctx.sources.iter().take_while(|s| s.time < t1) {
            let start = t0.max(s.time);
            // exp(-g(start - tp)) - exp(-g(t1 - tp))
            let decayed = (-g * (start - s.time)).exp();
            total += self.multiplier(s.class) * decayed * kernel_mass(t1 - start, g);
        }
        self.a * total
    }

    /// Log-likelihood of the learner's own posts over `[0, horizon)`:
    /// log-rates at each post minus the integrated rate.
    pub fn log_likelihood(&self, ctx: &EventContext, horizon: f64) -> LogLik {
        let mut ll = 0.0;
        for t in ctx.event_times() {
            let rate = self.rate(ctx, t);
            if rate <= 0.0 {
                return LogLik::NegInfinite;
            }
            ll += rate.ln();
        }
        LogLik::Finite(ll - self.integral(ctx, 0.0, horizon))
    }

    /// Statistics that are independent of `a` (see [`ExcitationStats`]).
    pub fn stats(&self, ctx: &EventContext, horizon: f64) -> ExcitationStats {
        let mut st = ExcitationStats::default();
        for &e in &ctx.events {
            let t = ctx.sources[e].time;
            let ks = self.kernel_sum(ctx, t);
            st.events += 1;
            st.log_kernel_sum += if ks > 0.0 { ks.ln() } else { f64::NEG_INFINITY };
        }
        for s in ctx.sources.iter().take_while(|s| s.time < horizon) {
            st.exposure
                .add(s.class, kernel_mass(horizon - s.time, self.gamma));
        }
        st
    }
}

/// Total excitation mass `sum_p (1 - exp(-gamma (T - t_p))) / gamma` of
/// pre-first-post sources; the exposure of a learner who never posted.
pub fn passive_exposure(times: &[f64], gamma: f64, horizon: f64) -> f64 {
    times
        .iter()
        .filter(|&&t| t < horizon)
        .map(|&t| kernel_mass(horizon - t, gamma))
        .sum()
}

pub fn reply_rate(u: LearnerId, k: usize, t: f64, params: &ModelParams, ctx: &EventContext) -> f64 {
    params.excitation(u, k).rate(ctx, t)
}

pub fn reply_rate_integral(
    u: LearnerId,
    k: usize,
    t0: f64,
    t1: f64,
    params: &ModelParams,
    ctx: &EventContext,
) -> f64 {
    params.excitation(u, k).integral(ctx, t0, t1)
}

pub fn thread_log_likelihood(
    u: LearnerId,
    k: usize,
    params: &ModelParams,
    ctx: &EventContext,
    horizon: f64,
) -> LogLik {
    params.excitation(u, k).log_likelihood(ctx, horizon)
}

/// Log-likelihood of `n_started` thread starts under a constant rate `mu`
/// over `[0, horizon)`.
pub fn initial_post_log_likelihood(n_started: u32, horizon: f64, mu: f64) -> LogLik {
    assert!(horizon > 0.0 && mu >= 0.0);
    if n_started == 0 {
        return LogLik::Finite(-mu * horizon);
    }
    if mu == 0.0 {
        return LogLik::NegInfinite;
    }
    LogLik::Finite(f64::from(n_started) * mu.ln() - mu * horizon)
}
