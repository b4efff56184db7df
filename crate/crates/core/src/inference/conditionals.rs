//! Closed-form conditional distributions used by the sampler.
//!
//! All Gamma distributions use the shape-rate convention: density
//! proportional to `x^(shape-1) exp(-rate x)`.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::ppcore::{ExcitationClass, Source};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaDist {
    pub shape: f64,
    pub rate: f64,
}

impl GammaDist {
    pub fn new(shape: f64, rate: f64) -> Self {
        assert!(shape > 0.0 && rate > 0.0, "Gamma({shape}, {rate}) is not proper");
        Self { shape, rate }
    }

    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        Gamma::new(self.shape, 1.0 / self.rate)
            .expect("validated parameters")
            .sample(rng)
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        self.shape * self.rate.ln() - ln_gamma(self.shape) + (self.shape - 1.0) * x.ln() - self.rate * x
    }

    /// Posterior after observing `events` points with total exposure
    /// `exposure` under a Poisson-type likelihood `x^events exp(-x exposure)`.
    pub fn update(&self, events: f64, exposure: f64) -> Self {
        Self::new(self.shape + events, self.rate + exposure)
    }
}

/// Number of parent edges by the class of the parent relative to the
/// child's author.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EdgeCounts {
    pub pre: u64,
    pub post: u64,
    pub reply: u64,
}

impl EdgeCounts {
    pub fn add(&mut self, class: ExcitationClass) {
        match class {
            ExcitationClass::PreFirstPost => self.pre += 1,
            ExcitationClass::PostFirstPost => self.post += 1,
            ExcitationClass::ExplicitReply => self.reply += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.pre + self.post + self.reply
    }
}

/// `a[u][k]` given `events` modeled posts of `u` in topic-`k` threads and
/// the class-weighted exposure `exposure` summed over those threads.
pub fn interest_posterior(prior: GammaDist, events: u64, exposure: f64) -> GammaDist {
    prior.update(events as f64, exposure)
}

/// `mu[u][k]` given `started` topic-`k` threads started by `u`.
pub fn background_posterior(prior: GammaDist, started: u64, horizon: f64) -> GammaDist {
    prior.update(started as f64, horizon)
}

/// `alpha` given parent edges and `sum a (post + beta * reply)` over every
/// poster of every thread.
pub fn alpha_posterior(prior: GammaDist, edges: &EdgeCounts, exposure: f64) -> GammaDist {
    prior.update((edges.post + edges.reply) as f64, exposure)
}

/// `beta` given parent edges and `sum alpha * a * reply`.
pub fn beta_posterior(prior: GammaDist, edges: &EdgeCounts, exposure: f64) -> GammaDist {
    prior.update(edges.reply as f64, exposure)
}

/// Log-weights of every earlier post as the parent of the post at
/// `sources[child]`, where `sources` is classified for the child's author.
/// The interest level is common to all candidates and omitted.
///
/// # Panics
/// If `child == 0`.
pub fn parent_log_weights(sources: &[Source], child: usize, gamma: f64, alpha: f64, beta: f64) -> Vec<f64> {
    assert!(child > 0, "the initial post has no parent");
    let t = sources[child].time;
    sources[..child]
        .iter()
        .map(|s| s.class.multiplier(alpha, beta).ln() - gamma * (t - s.time))
        .collect()
}

/// Log marginal likelihood ratio of adding one thread's observations for a
/// learner, with the interest level integrated out against its current
/// `Gamma(shape, rate)` conditional. `events`, `log_kernel_sum` and
/// `exposure` are the thread's statistics for that learner.
pub fn collapsed_interest_term(shape: f64, rate: f64, events: u32, log_kernel_sum: f64, exposure: f64) -> f64 {
    let decay = -shape * (exposure / rate).ln_1p();
    if events == 0 {
        return decay + log_kernel_sum;
    }
    let n = f64::from(events);
    ln_gamma(shape + n) - ln_gamma(shape) + decay - n * (rate + exposure).ln() + log_kernel_sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use ExcitationClass::*;

    /// Normalizes `f` on a uniform grid and returns the density values.
    fn grid_density(f: impl Fn(f64) -> f64, hi: f64, n: usize) -> (Vec<f64>, f64) {
        let h = hi / n as f64;
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * h).collect();
        let lw: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        let m = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = lw.iter().map(|l| (l - m).exp()).collect();
        let z: f64 = w.iter().sum::<f64>() * h;
        (w.into_iter().map(|x| x / z).collect(), h)
    }

    #[test]
    fn posterior_matches_grid_product() {
        let prior = GammaDist::new(2.0, 1.5);
        let (n, e) = (4.0, 2.5);
        let post = prior.update(n, e);
        let (dens, h) = grid_density(|x| prior.ln_pdf(x) + n * x.ln() - x * e, 20.0, 200_000);
        let kl: f64 = dens
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let x = (i as f64 + 0.5) * h;
                if p > 0.0 {
                    p * (p.ln() - post.ln_pdf(x)) * h
                } else {
                    0.0
                }
            })
            .sum();
        assert!(kl.abs() < 1e-6, "kl {kl}");
    }

    #[test]
    fn mu_examples() {
        let prior = GammaDist::new(1e-4, 1.0);
        let p = background_posterior(prior, 0, 10.0);
        assert_eq!((p.shape, p.rate), (1e-4, 11.0));
        let p = background_posterior(prior, 3, 10.0);
        assert!((p.shape - 3.0001).abs() < 1e-12);
        assert!((p.mean() - 0.2727).abs() < 1e-4);
    }

    #[test]
    fn interest_examples() {
        let prior = GammaDist::new(1.0, 1.0);
        assert_eq!(interest_posterior(prior, 0, 0.0), prior);
        // unit excitation mass from one class-1 source with T large
        let e = crate::ppcore::kernel_mass(1e9, 1.0);
        assert!((interest_posterior(prior, 0, e).rate - 2.0).abs() < 1e-12);
    }

    #[test]
    fn empty_edges_leave_prior() {
        let prior = GammaDist::new(1.0, 1.0);
        let edges = EdgeCounts { pre: 7, ..Default::default() };
        assert_eq!(alpha_posterior(prior, &edges, 0.0), prior);
        assert_eq!(beta_posterior(prior, &edges, 0.0), prior);
        let edges = EdgeCounts { pre: 1, post: 2, reply: 3 };
        assert_eq!(alpha_posterior(prior, &edges, 0.5).shape, 6.0);
        assert_eq!(beta_posterior(prior, &edges, 0.5).shape, 4.0);
    }

    #[test]
    fn parent_weights_by_class() {
        let src = |time, class| Source { time, class };
        let s = [src(0.0, PostFirstPost), src(0.0, ExplicitReply), src(0.0, PostFirstPost)];
        let lw = parent_log_weights(&s, 2, 1.0, 1.0, 3.0);
        assert!((lw[1] - lw[0] - 3f64.ln()).abs() < 1e-12);
        let s = [src(0.0, PreFirstPost), src(1.0, PreFirstPost)];
        assert_eq!(parent_log_weights(&s, 1, 2.0, 5.0, 5.0), vec![-2.0]);
    }

    #[test]
    fn collapsed_term_matches_quadrature() {
        // integral of a^n e^{-a E} e^{lks} Gam(a; s, rho) da by the midpoint rule
        for &(s, rho, n, lks, e) in &[(1.5, 2.0, 0u32, 0.0, 0.7), (0.5, 1.0, 3, -1.2, 2.3), (4.0, 0.5, 1, 0.3, 0.1)] {
            let prior = GammaDist::new(s, rho);
            let hi = 60.0;
            let m = 600_000;
            let h = hi / m as f64;
            let integral: f64 = (0..m)
                .map(|i| {
                    let a = (i as f64 + 0.5) * h;
                    (prior.ln_pdf(a) + f64::from(n) * a.ln() - a * e + lks).exp() * h
                })
                .sum();
            let got = collapsed_interest_term(s, rho, n, lks, e);
            assert!((got - integral.ln()).abs() < 1e-5, "{got} vs {}", integral.ln());
        }
    }

    #[test]
    fn sample_mean_matches() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let d = GammaDist::new(3.0001, 11.0);
        let n = 100_000;
        let mean: f64 = (0..n).map(|_| d.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean / d.mean() - 1.0).abs() < 0.01);
    }
}
