use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::forumdata::PostRecord;
use crate::simulator::{simulate_window, SimConfig, SimPost};

fn post(id: &str, learner: Option<&str>, time: f64, text: &str, parent: Option<&str>) -> PostRecord {
    PostRecord {
        post_id: id.into(),
        learner: learner.map(Into::into),
        time,
        text: text.into(),
        parent_post_id: parent.map(Into::into),
        mentions: Vec::new(),
    }
}

fn thread(id: &str, posts: Vec<PostRecord>) -> ThreadRecord {
    ThreadRecord {
        thread_id: id.into(),
        posts,
    }
}

fn corpus(records: Vec<ThreadRecord>, horizon: f64) -> ForumCorpus {
    let options = CorpusOptions {
        preprocess: PreprocessConfig::permissive(),
        horizon: Some(horizon),
    };
    ForumCorpus::from_records(records, &options).unwrap()
}

/// Single-topic parameters with uniform text over the training vocabulary.
fn flat_params(split: &TrainSplit, a: f64, gamma: f64, alpha: f64, beta: f64) -> ModelParams {
    let u = split.train.n_learners();
    let v = split.train.vocab_size();
    ModelParams {
        gamma: vec![gamma],
        a: vec![vec![a]; u],
        mu: vec![vec![0.1]; u],
        alpha,
        beta,
        phi: vec![vec![1.0 / v as f64; v]],
    }
}

fn two_thread_corpus() -> ForumCorpus {
    corpus(
        vec![
            thread(
                "ta",
                vec![
                    post("a1", Some("x"), 0.0, "apple", None),
                    post("a2", Some("u"), 1.0, "apple", Some("a1")),
                    post("a3", Some("x"), 5.0, "apple", None),
                ],
            ),
            thread(
                "tb",
                vec![
                    post("b1", Some("x"), 0.0, "apple", None),
                    post("b2", Some("y"), 1.0, "apple", Some("b1")),
                    post("b3", Some("u"), 6.0, "apple", None),
                    post("b4", None, 7.0, "apple", None),
                ],
            ),
            thread("tc", vec![post("c1", Some("y"), 5.5, "apple", None)]),
        ],
        10.0,
    )
}

#[test]
fn split_validation() {
    let c = two_thread_corpus();
    let pp = PreprocessConfig::permissive();
    assert!(split_corpus(&c, SplitSpec::new(0.0, 2.0), &pp).is_err());
    assert!(split_corpus(&c, SplitSpec::new(3.0, 3.0), &pp).is_err());
    assert!(split_corpus(&c, SplitSpec::new(3.0, 10.5), &pp).is_err());
}

#[test]
fn split_keeps_training_window_only() {
    let c = two_thread_corpus();
    let s = split_corpus(&c, SplitSpec::new(5.0, 8.0), &PreprocessConfig::permissive()).unwrap();
    assert_eq!(s.train.horizon, 5.0);
    let ids: Vec<&str> = s.train.threads.iter().map(|t| t.thread_id.as_str()).collect();
    assert_eq!(ids, ["ta", "tb"]);
    assert!(s.train.threads.iter().all(|t| t.posts.len() == 2));
    // x posts in ta at exactly t1; u in tb; the anonymous post and the new
    // thread tc are not test events
    assert_eq!(s.test_posts.len(), 2);
    assert_eq!(s.test_posts["x"], BTreeSet::from(["ta".to_string()]));
    assert_eq!(s.test_posts["u"], BTreeSet::from(["tb".to_string()]));
}

#[test]
fn zero_interest_gives_zero() {
    let c = two_thread_corpus();
    let s = split_corpus(&c, SplitSpec::new(5.0, 8.0), &PreprocessConfig::permissive()).unwrap();
    let rec = Recommender::new(&s, flat_params(&s, 0.0, 1.0, 2.0, 2.0), 0.0).unwrap();
    for r in 0..2 {
        assert_eq!(rec.posting_probability("u", r), 0.0);
        assert_eq!(rec.posting_probability("nobody", r), 0.0);
    }
}

#[test]
fn survival_complement() {
    // one source at 0 for an unseen learner: integral over [t1, t2] is
    // (a/g)(e^{-g t1} - e^{-g t2}); choose a to make it ln 2
    let c = corpus(
        vec![thread("t", vec![post("p", Some("x"), 0.0, "w", None)])],
        4.0,
    );
    let s = split_corpus(&c, SplitSpec::new(1.0, 3.0), &PreprocessConfig::permissive()).unwrap();
    let g = 0.5f64;
    let a = std::f64::consts::LN_2 * g / ((-g).exp() - (-3.0 * g).exp());
    let rec = Recommender::new(&s, flat_params(&s, 0.0, g, 1.0, 1.0), a).unwrap();
    assert!((rec.posting_probability("new", 0) - 0.5).abs() < 1e-12);
}

#[test]
fn ties_break_by_thread_id() {
    let c = corpus(
        vec![
            thread("tb", vec![post("b", Some("x"), 0.0, "w", None)]),
            thread("ta", vec![post("a", Some("x"), 0.0, "w", None)]),
        ],
        4.0,
    );
    let s = split_corpus(&c, SplitSpec::new(1.0, 2.0), &PreprocessConfig::permissive()).unwrap();
    let rec = Recommender::new(&s, flat_params(&s, 0.3, 1.0, 1.0, 1.0), 0.3).unwrap();
    let ranked = rec.rank_threads("x");
    assert_eq!(ranked[0].0, "ta");
    assert_eq!(ranked[1].0, "tb");
    assert_eq!(ranked[0].1, ranked[1].1);
}

#[test]
fn subscribed_thread_ranks_first() {
    let c = corpus(
        vec![
            thread(
                "t1",
                vec![post("a1", Some("x"), 0.0, "w", None), post("a2", Some("y"), 0.5, "w", None)],
            ),
            thread(
                "t2",
                vec![post("b1", Some("x"), 0.0, "w", None), post("b2", Some("u"), 0.5, "w", None)],
            ),
        ],
        4.0,
    );
    let s = split_corpus(&c, SplitSpec::new(1.0, 2.0), &PreprocessConfig::permissive()).unwrap();
    let rec = Recommender::new(&s, flat_params(&s, 0.3, 1.0, 4.0, 1.0), 0.3).unwrap();
    let ranked = rec.rank_threads("u");
    assert_eq!(ranked[0].0, "t2");
    assert!(ranked[0].1 > ranked[1].1);
}

#[test]
fn baselines_order() {
    let c = corpus(
        vec![
            thread("t2", vec![post("p", Some("x"), 0.0, "w", None), post("q", Some("y"), 3.0, "w", None)]),
            thread(
                "t5",
                (0..5).map(|i| post(&format!("r{i}"), Some("x"), 0.5 + f64::from(i) * 0.1, "w", None)).collect(),
            ),
            thread("t1", vec![post("s", Some("x"), 0.2, "w", None), post("t", Some("y"), 0.3, "w", None)]),
        ],
        6.0,
    );
    let s = split_corpus(&c, SplitSpec::new(4.0, 6.0), &PreprocessConfig::permissive()).unwrap();
    assert_eq!(baseline_popularity(&s), ["t5", "t1", "t2"]);
    assert_eq!(baseline_recency(&s), ["t2", "t5", "t1"]);
}

#[test]
fn probability_grows_with_window() {
    let c = two_thread_corpus();
    let pp = PreprocessConfig::permissive();
    let mut last = [0.0; 2];
    for t2 in [5.5, 6.0, 7.0, 9.0, 10.0] {
        let s = split_corpus(&c, SplitSpec::new(5.0, t2), &pp).unwrap();
        let rec = Recommender::new(&s, flat_params(&s, 0.4, 0.7, 3.0, 2.0), 1e-4).unwrap();
        for (r, prev) in last.iter_mut().enumerate() {
            let p = rec.posting_probability("u", r);
            assert!(p >= *prev && p <= 1.0);
            *prev = p;
        }
    }
}

#[test]
fn test_window_content_is_not_read() {
    let base = two_thread_corpus();
    let mut records = base.to_records();
    for rec in &mut records {
        for p in &mut rec.posts {
            if p.time >= 5.0 {
                p.text = "zebra zebra zebra".into();
                p.parent_post_id = None;
                p.mentions = vec!["y".into()];
            }
        }
    }
    let perturbed = corpus(records, 10.0);
    let pp = PreprocessConfig::permissive();
    let spec = SplitSpec::new(5.0, 8.0);
    let (s1, s2) = (split_corpus(&base, spec, &pp).unwrap(), split_corpus(&perturbed, spec, &pp).unwrap());
    assert_eq!(s1.train, s2.train);
    let r1 = Recommender::new(&s1, flat_params(&s1, 0.4, 0.7, 3.0, 2.0), 1e-4).unwrap();
    let r2 = Recommender::new(&s2, flat_params(&s2, 0.4, 0.7, 3.0, 2.0), 1e-4).unwrap();
    for l in ["u", "x", "y"] {
        assert_eq!(r1.rank_threads(l), r2.rank_threads(l));
    }
}

#[test]
fn topic_posterior_uses_text() {
    let c = corpus(
        vec![thread(
            "t",
            vec![post("p", Some("x"), 0.0, "apple apple", None), post("q", Some("y"), 0.1, "pear", None)],
        )],
        2.0,
    );
    let s = split_corpus(&c, SplitSpec::new(1.0, 2.0), &PreprocessConfig::permissive()).unwrap();
    let mut params = flat_params(&s, 0.2, 1.0, 1.0, 1.0);
    params.gamma = vec![1.0, 1.0];
    for row in params.a.iter_mut().chain(params.mu.iter_mut()) {
        row.push(row[0]);
    }
    // vocabulary is [apple, pear]
    params.phi = vec![vec![0.9, 0.1], vec![0.1, 0.9]];
    let post = topic_posterior(&s.train, &s.annotations, &params, 0);
    let expected = 0.9f64.powi(2) * 0.1 / (0.9f64.powi(2) * 0.1 + 0.1f64.powi(2) * 0.9);
    assert!((post[0] - expected).abs() < 1e-12);
}

#[test]
fn matches_simulated_window() {
    // u (index 0) commented in the thread and got a reply; only u has
    // interest, so u's first test-window post is driven by training sources
    let c = corpus(
        vec![thread(
            "t",
            vec![
                post("p0", Some("v"), 0.0, "w", None),
                post("p1", Some("u"), 0.4, "w", Some("p0")),
                post("p2", Some("v"), 0.9, "w", Some("p1")),
            ],
        )],
        3.0,
    );
    let s = split_corpus(&c, SplitSpec::new(1.0, 2.5), &PreprocessConfig::permissive()).unwrap();
    let mut params = flat_params(&s, 0.0, 1.2, 2.0, 1.5);
    params.a[0][0] = 0.35;
    let rec = Recommender::new(&s, params.clone(), 0.0).unwrap();
    let p = rec.posting_probability("u", 0);

    let history = vec![
        SimPost { author: 1, time: 0.0, cause: None, cause_class: None, comment_on: None, recipients: vec![] },
        SimPost { author: 0, time: 0.4, cause: Some(0), cause_class: None, comment_on: Some(0), recipients: vec![1] },
        SimPost { author: 1, time: 0.9, cause: Some(1), cause_class: None, comment_on: Some(1), recipients: vec![0] },
    ];
    let config = SimConfig {
        params,
        horizon: 3.0,
        tokens_per_post: 0.0,
        reply_probability: 0.0,
        seed: 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 10_000;
    let hits = (0..n)
        .filter(|_| simulate_window(&history, 0, 1.0, 2.5, &config, &mut rng).iter().any(|q| q.author == 0))
        .count();
    let freq = hits as f64 / n as f64;
    let sd = (p * (1.0 - p) / n as f64).sqrt();
    assert!((freq - p).abs() < 2.0 * sd, "empirical {freq} vs {p} (sd {sd})");
}
