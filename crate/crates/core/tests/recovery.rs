use forum_hawkes::forumdata::extract_reply_annotations;
use forum_hawkes::inference::{run_gibbs, SamplerConfig};
use forum_hawkes::simulator::{simulate, Scenario};

/// Two well-separated topics (4 hours and 7 days) over a dense forum of
/// 20 learners, so each learner posts often in both.
fn two_topic_scenario() -> Scenario {
    Scenario {
        n_learners: 20,
        expected_threads: 1500.0,
        half_lives: vec![4.0 / 24.0, 7.0],
        word_focus: 1.0,
        ..Scenario::default()
    }
}

struct Fit {
    agreement: f64,
    fast_mode_fraction: f64,
    /// Relative errors of `a` for (learner, topic) pairs with at least 30
    /// modeled posts.
    a_errors: Vec<f64>,
}

fn fit(seed: u64) -> Fit {
    let cfg = two_topic_scenario().build(seed).unwrap();
    let sim = simulate(&cfg).unwrap();
    let corpus = sim.corpus().unwrap();
    let ann = extract_reply_annotations(&corpus);
    let est = run_gibbs(&corpus, &ann, &SamplerConfig { seed, n_topics: 2, ..SamplerConfig::default() }).unwrap();

    let direct = est.z.iter().zip(&sim.topics).filter(|(z, t)| z == t).count();
    let perm = if 2 * direct >= corpus.n_threads() { [0, 1] } else { [1, 0] };
    let agree = est.z.iter().zip(&sim.topics).filter(|(&z, &t)| perm[z] == t).count();

    let fast = perm.iter().position(|&t| t == 0).unwrap();
    let planted = est.decay_grid.iter().position(|&g| (g / cfg.params.gamma[0] - 1.0).abs() < 1e-9).unwrap();
    let fast_mode_fraction = est.gamma_counts[fast][planted] as f64 / est.n_samples as f64;

    let mut posts = vec![[0usize; 2]; corpus.n_learners()];
    for (r, thread) in corpus.threads.iter().enumerate() {
        for p in &thread.posts[1..] {
            if let Some(u) = p.author {
                posts[u][sim.topics[r]] += 1;
            }
        }
    }
    let mut a_errors = Vec::new();
    for (u, name) in corpus.learners.iter().enumerate() {
        let truth_u = sim.truth.learners.iter().position(|l| l == name).unwrap();
        for k in 0..2 {
            if posts[u][perm[k]] >= 30 {
                a_errors.push(est.a[u][k] / cfg.params.a[truth_u][perm[k]] - 1.0);
            }
        }
    }
    Fit {
        agreement: agree as f64 / corpus.n_threads() as f64,
        fast_mode_fraction,
        a_errors,
    }
}

#[test]
fn planted_partition_and_timescales_recovered() {
    let fits: Vec<Fit> = (0..4).map(fit).collect();
    for f in &fits {
        assert!(f.agreement >= 0.95, "topic agreement {}", f.agreement);
        assert!(f.fast_mode_fraction >= 0.9, "4h mode in {} of samples", f.fast_mode_fraction);
    }

    // Per-pair error is dominated by Poisson noise (about 18% sd at 30
    // posts), so the bound applies to the typical pair.
    let mut errors: Vec<f64> = fits.iter().flat_map(|f| f.a_errors.iter().map(|e| e.abs())).collect();
    assert!(errors.len() >= 20, "only {} well-observed pairs", errors.len());
    errors.sort_by(f64::total_cmp);
    let median = errors[errors.len() / 2];
    let within = errors.iter().filter(|&&e| e <= 0.2).count() as f64 / errors.len() as f64;
    assert!(median <= 0.2, "median relative error {median}");
    assert!(within >= 0.75, "only {within} of pairs within 20%");
}
