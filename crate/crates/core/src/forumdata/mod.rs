//! Forum data model, JSONL ingestion and structural annotations.
//!
//! A corpus is a set of threads, each a chronologically ordered list of
//! posts. Times are real-valued days since course start. Posts written
//! anonymously carry no learner and are kept as excitation sources only.

mod annotations;
mod jsonl;
mod preprocess;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use annotations::{extract_reply_annotations, ReplyAnnotation};
pub use jsonl::{read_jsonl, write_jsonl};
pub use preprocess::{default_stopwords, PreprocessConfig};

/// Index of a learner in [`ForumCorpus::learners`].
pub type LearnerId = usize;
/// Index of a word in [`ForumCorpus::vocabulary`].
pub type WordId = usize;

/// One post as it appears on a line of the JSONL format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostRecord {
    pub post_id: String,
    /// `None` marks an anonymous post.
    pub learner: Option<String>,
    pub time: f64,
    pub text: String,
    #[serde(default)]
    pub parent_post_id: Option<String>,
    #[serde(default)]
    pub mentions: Vec<String>,
}

/// One line of the JSONL corpus format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreadRecord {
    pub thread_id: String,
    pub posts: Vec<PostRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Post {
    pub post_id: String,
    pub thread_id: String,
    /// `None` marks an anonymous post.
    pub learner: Option<String>,
    pub author: Option<LearnerId>,
    pub time: f64,
    pub text: String,
    pub parent_post_id: Option<String>,
    pub mentions: BTreeSet<String>,
    pub tokens: Vec<WordId>,
}

impl Post {
    pub fn is_anonymous(&self) -> bool {
        self.learner.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Thread {
    pub thread_id: String,
    /// Strictly increasing in time; the first entry is the initiator.
    pub posts: Vec<Post>,
    /// Bag of words over all posts, sorted by word id.
    pub token_counts: Vec<(WordId, u32)>,
}

impl Thread {
    pub fn initial_post(&self) -> &Post {
        &self.posts[0]
    }

    pub fn initiator(&self) -> Option<LearnerId> {
        self.posts[0].author
    }

    pub fn start_time(&self) -> f64 {
        self.posts[0].time
    }

    pub fn last_time(&self) -> f64 {
        self.posts[self.posts.len() - 1].time
    }

    pub fn n_tokens(&self) -> u32 {
        self.token_counts.iter().map(|&(_, c)| c).sum()
    }
}

/// Options applied when building a corpus from records.
#[derive(Debug, Clone, Default)]
pub struct CorpusOptions {
    pub preprocess: PreprocessConfig,
    /// Observation end time. Defaults to the latest post time.
    pub horizon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForumCorpus {
    pub threads: Vec<Thread>,
    /// Sorted learner identifiers.
    pub learners: Vec<String>,
    /// Sorted vocabulary.
    pub vocabulary: Vec<String>,
    pub horizon: f64,
    learner_index: HashMap<String, LearnerId>,
}

impl ForumCorpus {
    /// Builds a validated corpus: sorts posts, checks structure, tokenizes
    /// text and assigns learner and word indices.
    pub fn from_records(records: Vec<ThreadRecord>, options: &CorpusOptions) -> Result<Self> {
        options.preprocess.validate()?;
        if records.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut seen_threads = HashSet::new();
        let mut records = records;
        for rec in &mut records {
            if !seen_threads.insert(rec.thread_id.clone()) {
                return Err(Error::Structure(format!(
                    "duplicate thread id {}",
                    rec.thread_id
                )));
            }
            validate_thread(rec)?;
        }

        let learners: Vec<String> = records
            .iter()
            .flat_map(|r| r.posts.iter().filter_map(|p| p.learner.clone()))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let learner_index: HashMap<String, LearnerId> = learners
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i))
            .collect();

        let docs: Vec<Vec<&str>> = records
            .iter()
            .map(|r| r.posts.iter().map(|p| p.text.as_str()).collect())
            .collect();
        let tokens = options.preprocess.preprocess_corpus(&docs);
        let vocabulary: Vec<String> = tokens
            .iter()
            .flatten()
            .flatten()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let word_index: HashMap<&str, WordId> = vocabulary
            .iter()
            .enumerate()
            .map(|(i, w)| (w.as_str(), i))
            .collect();

        let max_time = records
            .iter()
            .flat_map(|r| r.posts.iter().map(|p| p.time))
            .fold(0.0_f64, f64::max);
        let horizon = match options.horizon {
            Some(h) if h < max_time || !h.is_finite() => {
                return Err(Error::Config(format!(
                    "horizon {h} precedes the latest post at {max_time}"
                )))
            }
            Some(h) => h,
            None => max_time,
        };

        let threads = records
            .into_iter()
            .zip(tokens)
            .map(|(rec, thread_tokens)| {
                let mut bag: BTreeMap<WordId, u32> = BTreeMap::new();
                let posts = rec
                    .posts
                    .into_iter()
                    .zip(thread_tokens)
                    .map(|(p, toks)| {
                        let ids: Vec<WordId> = toks.iter().map(|w| word_index[w.as_str()]).collect();
                        for &w in &ids {
                            *bag.entry(w).or_default() += 1;
                        }
                        Post {
                            author: p.learner.as_ref().map(|l| learner_index[l]),
                            post_id: p.post_id,
                            thread_id: rec.thread_id.clone(),
                            learner: p.learner,
                            time: p.time,
                            text: p.text,
                            parent_post_id: p.parent_post_id,
                            mentions: p.mentions.into_iter().collect(),
                            tokens: ids,
                        }
                    })
                    .collect();
                Thread {
                    thread_id: rec.thread_id,
                    posts,
                    token_counts: bag.into_iter().collect(),
                }
            })
            .collect();

        Ok(Self {
            threads,
            learners,
            vocabulary,
            horizon,
            learner_index,
        })
    }

    pub fn n_learners(&self) -> usize {
        self.learners.len()
    }

    pub fn n_threads(&self) -> usize {
        self.threads.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn n_posts(&self) -> usize {
        self.threads.iter().map(|t| t.posts.len()).sum()
    }

    pub fn learner_id(&self, name: &str) -> Option<LearnerId> {
        self.learner_index.get(name).copied()
    }

    pub fn thread_index(&self, thread_id: &str) -> Option<usize> {
        self.threads.iter().position(|t| t.thread_id == thread_id)
    }

    /// Converts back to the JSONL record form.
    pub fn to_records(&self) -> Vec<ThreadRecord> {
        self.threads
            .iter()
            .map(|t| ThreadRecord {
                thread_id: t.thread_id.clone(),
                posts: t
                    .posts
                    .iter()
                    .map(|p| PostRecord {
                        post_id: p.post_id.clone(),
                        learner: p.learner.clone(),
                        time: p.time,
                        text: p.text.clone(),
                        parent_post_id: p.parent_post_id.clone(),
                        mentions: p.mentions.iter().cloned().collect(),
                    })
                    .collect(),
            })
            .collect()
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        write_jsonl(path, &self.to_records())
    }
}

/// Reads a JSONL corpus file and builds the corpus.
pub fn ingest_corpus(path: &Path, options: &CorpusOptions) -> Result<ForumCorpus> {
    let records = read_jsonl(path)?;
    ForumCorpus::from_records(records, options)
}

fn validate_thread(rec: &mut ThreadRecord) -> Result<()> {
    if rec.posts.is_empty() {
        return Err(Error::Structure(format!(
            "thread {} has no posts",
            rec.thread_id
        )));
    }
    for p in &rec.posts {
        if !p.time.is_finite() || p.time < 0.0 {
            return Err(Error::Structure(format!(
                "post {} has invalid time {}",
                p.post_id, p.time
            )));
        }
    }
    rec.posts.sort_by(|a, b| a.time.total_cmp(&b.time));
    let mut times: HashMap<&str, f64> = HashMap::new();
    for w in rec.posts.windows(2) {
        if w[0].time == w[1].time {
            return Err(Error::Structure(format!(
                "posts {} and {} in thread {} share timestamp {}",
                w[0].post_id, w[1].post_id, rec.thread_id, w[0].time
            )));
        }
    }
    for p in &rec.posts {
        if let Some(parent) = &p.parent_post_id {
            match times.get(parent.as_str()) {
                Some(&t) if t < p.time => {}
                _ => {
                    return Err(Error::Structure(format!(
                        "post {} references unknown or later parent {} in thread {}",
                        p.post_id, parent, rec.thread_id
                    )))
                }
            }
        }
        if times.insert(p.post_id.as_str(), p.time).is_some() {
            return Err(Error::Structure(format!(
                "duplicate post id {} in thread {}",
                p.post_id, rec.thread_id
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn post(id: &str, learner: Option<&str>, time: f64, text: &str) -> PostRecord {
        PostRecord {
            post_id: id.into(),
            learner: learner.map(Into::into),
            time,
            text: text.into(),
            parent_post_id: None,
            mentions: vec![],
        }
    }

    fn opts() -> CorpusOptions {
        CorpusOptions {
            preprocess: PreprocessConfig::permissive(),
            horizon: None,
        }
    }

    #[test]
    fn horizon_defaults_to_latest_post() {
        let recs = vec![ThreadRecord {
            thread_id: "t".into(),
            posts: vec![post("p", Some("x"), 2.0, "hello")],
        }];
        let c = ForumCorpus::from_records(recs, &opts()).unwrap();
        assert_eq!(c.horizon, 2.0);
        assert_eq!(c.learners, vec!["x"]);
    }

    #[test]
    fn empty_input_rejected() {
        assert!(matches!(
            ForumCorpus::from_records(vec![], &opts()),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn posts_resorted() {
        let recs = vec![ThreadRecord {
            thread_id: "t".into(),
            posts: vec![
                post("b", Some("y"), 3.0, "second"),
                post("a", Some("x"), 1.0, "first"),
            ],
        }];
        let c = ForumCorpus::from_records(recs, &opts()).unwrap();
        let ids: Vec<_> = c.threads[0].posts.iter().map(|p| p.post_id.as_str()).collect();
        assert_eq!(ids, ["a", "b"]);
        assert_eq!(c.threads[0].initiator(), c.learner_id("x"));
    }

    #[test]
    fn unknown_parent_is_structural_error() {
        let mut child = post("b", Some("y"), 3.0, "");
        child.parent_post_id = Some("zzz".into());
        let recs = vec![ThreadRecord {
            thread_id: "t".into(),
            posts: vec![post("a", Some("x"), 1.0, ""), child],
        }];
        assert!(matches!(
            ForumCorpus::from_records(recs, &opts()),
            Err(Error::Structure(_))
        ));
    }

    #[test]
    fn horizon_before_last_post_rejected() {
        let recs = vec![ThreadRecord {
            thread_id: "t".into(),
            posts: vec![post("a", Some("x"), 5.0, "")],
        }];
        let o = CorpusOptions {
            horizon: Some(4.0),
            ..opts()
        };
        assert!(ForumCorpus::from_records(recs, &o).is_err());
    }

    #[test]
    fn anonymous_posts_have_no_learner() {
        let recs = vec![ThreadRecord {
            thread_id: "t".into(),
            posts: vec![post("a", None, 0.5, "anon"), post("b", Some("x"), 1.0, "")],
        }];
        let c = ForumCorpus::from_records(recs, &opts()).unwrap();
        assert_eq!(c.n_learners(), 1);
        assert!(c.threads[0].posts[0].is_anonymous());
        assert_eq!(c.threads[0].initiator(), None);
    }

    #[test]
    fn bag_of_words_aggregates_posts() {
        let recs = vec![ThreadRecord {
            thread_id: "t".into(),
            posts: vec![
                post("a", Some("x"), 0.0, "alpha beta"),
                post("b", Some("y"), 1.0, "beta beta"),
            ],
        }];
        let c = ForumCorpus::from_records(recs, &opts()).unwrap();
        assert_eq!(c.vocabulary, vec!["alpha", "beta"]);
        assert_eq!(c.threads[0].token_counts, vec![(0, 1), (1, 3)]);
        assert_eq!(c.threads[0].n_tokens(), 4);
    }
}
