use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::{ForumCorpus, LearnerId};

/// Explicit-reply structure of every thread, indexed by thread position and
/// post position within the thread.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplyAnnotation {
    /// `recipients[r][p]`: learners that post `p` of thread `r` explicitly
    /// replies to.
    pub recipients: Vec<Vec<BTreeSet<LearnerId>>>,
    /// `first_post_index[r][u]`: position of learner `u`'s first post in
    /// thread `r`. Absent when `u` never posted there.
    pub first_post_index: Vec<BTreeMap<LearnerId, usize>>,
    /// `first_comment_of[r][p] = Some(q)` when post `p` is the first comment
    /// under post `q` and counts as an explicit reply to its author.
    pub first_comment_of: Vec<Vec<Option<usize>>>,
}

impl ReplyAnnotation {
    pub fn recipients_of(&self, corpus: &ForumCorpus, post_id: &str) -> Option<&BTreeSet<LearnerId>> {
        corpus.threads.iter().enumerate().find_map(|(r, t)| {
            t.posts
                .iter()
                .position(|p| p.post_id == post_id)
                .map(|q| &self.recipients[r][q])
        })
    }

    pub fn first_post(&self, thread: usize, learner: LearnerId) -> Option<usize> {
        self.first_post_index[thread].get(&learner).copied()
    }
}

/// Derives recipient sets and first-post positions.
///
/// Post `p'` explicitly replies to the author of an earlier post `p` when it
/// mentions that author, or when it is the chronologically first comment
/// whose parent is `p`. Self-replies and anonymous posts have no recipients.
pub fn extract_reply_annotations(corpus: &ForumCorpus) -> ReplyAnnotation {
    let mut recipients = Vec::with_capacity(corpus.n_threads());
    let mut first_post_index = Vec::with_capacity(corpus.n_threads());
    let mut first_comment_of = Vec::with_capacity(corpus.n_threads());

    for thread in &corpus.threads {
        let n = thread.posts.len();
        let mut first: BTreeMap<LearnerId, usize> = BTreeMap::new();
        let mut position: HashMap<&str, usize> = HashMap::new();
        let mut commented: HashMap<usize, usize> = HashMap::new();
        let mut rec = vec![BTreeSet::new(); n];
        let mut fc = vec![None; n];

        for (q, post) in thread.posts.iter().enumerate() {
            position.insert(post.post_id.as_str(), q);
            let Some(author) = post.author else {
                // anonymous posts still take the "first comment" slot
                if let Some(parent) = post.parent_post_id.as_deref() {
                    commented.entry(position[parent]).or_insert(q);
                }
                continue;
            };
            for name in &post.mentions {
                if let Some(u) = corpus.learner_id(name) {
                    // mention counts only if u wrote an earlier post here
                    if u != author && first.contains_key(&u) {
                        rec[q].insert(u);
                    }
                }
            }
            if let Some(parent) = post.parent_post_id.as_deref() {
                let pq = position[parent];
                if let Entry::Vacant(slot) = commented.entry(pq) {
                    slot.insert(q);
                    if let Some(target) = thread.posts[pq].author {
                        if target != author {
                            rec[q].insert(target);
                            fc[q] = Some(pq);
                        }
                    }
                }
            }
            first.entry(author).or_insert(q);
        }
        recipients.push(rec);
        first_post_index.push(first);
        first_comment_of.push(fc);
    }

    ReplyAnnotation {
        recipients,
        first_post_index,
        first_comment_of,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forumdata::{CorpusOptions, PostRecord, PreprocessConfig, ThreadRecord};

    fn p(id: &str, who: Option<&str>, t: f64, parent: Option<&str>, mentions: &[&str]) -> PostRecord {
        PostRecord {
            post_id: id.into(),
            learner: who.map(Into::into),
            time: t,
            text: String::new(),
            parent_post_id: parent.map(Into::into),
            mentions: mentions.iter().map(|m| m.to_string()).collect(),
        }
    }

    fn corpus(posts: Vec<PostRecord>) -> ForumCorpus {
        ForumCorpus::from_records(
            vec![ThreadRecord {
                thread_id: "t".into(),
                posts,
            }],
            &CorpusOptions {
                preprocess: PreprocessConfig::permissive(),
                horizon: None,
            },
        )
        .unwrap()
    }

    #[test]
    fn first_comment_replies_to_author() {
        let c = corpus(vec![
            p("A", Some("x"), 0.0, None, &[]),
            p("B", Some("y"), 1.0, Some("A"), &[]),
            p("C", Some("z"), 2.0, Some("A"), &[]),
        ]);
        let ann = extract_reply_annotations(&c);
        let x = c.learner_id("x").unwrap();
        assert_eq!(ann.recipients_of(&c, "B").unwrap(), &BTreeSet::from([x]));
        assert!(ann.recipients_of(&c, "C").unwrap().is_empty());
        assert_eq!(ann.first_comment_of[0], vec![None, Some(0), None]);
    }

    #[test]
    fn self_reply_excluded() {
        let c = corpus(vec![
            p("A", Some("x"), 0.0, None, &[]),
            p("B", Some("x"), 1.0, Some("A"), &["x"]),
        ]);
        let ann = extract_reply_annotations(&c);
        assert!(ann.recipients[0][1].is_empty());
        assert_eq!(ann.first_comment_of[0][1], None);
    }

    #[test]
    fn mention_and_comment_combine() {
        let c = corpus(vec![
            p("A", Some("x"), 0.0, None, &[]),
            p("B", Some("w"), 0.5, None, &[]),
            p("C", Some("y"), 1.0, Some("A"), &["w"]),
        ]);
        let ann = extract_reply_annotations(&c);
        let want: BTreeSet<_> = ["w", "x"].iter().map(|n| c.learner_id(n).unwrap()).collect();
        assert_eq!(ann.recipients[0][2], want);
    }

    #[test]
    fn mention_of_learner_without_earlier_post_ignored() {
        let c = corpus(vec![
            p("A", Some("x"), 0.0, None, &["y"]),
            p("B", Some("y"), 1.0, None, &[]),
        ]);
        let ann = extract_reply_annotations(&c);
        assert!(ann.recipients[0][0].is_empty());
    }

    #[test]
    fn anonymous_posts_have_no_recipients_but_take_first_comment_slot() {
        let c = corpus(vec![
            p("A", Some("x"), 0.0, None, &[]),
            p("B", None, 1.0, Some("A"), &["x"]),
            p("C", Some("y"), 2.0, Some("A"), &[]),
        ]);
        let ann = extract_reply_annotations(&c);
        assert!(ann.recipients[0][1].is_empty());
        assert!(ann.recipients[0][2].is_empty());
    }

    #[test]
    fn first_post_index_tracks_first_only() {
        let c = corpus(vec![
            p("A", Some("x"), 0.0, None, &[]),
            p("B", Some("y"), 1.0, None, &[]),
            p("C", Some("x"), 2.0, None, &[]),
            p("D", Some("y"), 3.0, None, &[]),
        ]);
        let ann = extract_reply_annotations(&c);
        let x = c.learner_id("x").unwrap();
        let y = c.learner_id("y").unwrap();
        assert_eq!(ann.first_post(0, x), Some(0));
        assert_eq!(ann.first_post(0, y), Some(1));
        assert_eq!(ann.first_post_index[0].len(), 2);
    }
}
