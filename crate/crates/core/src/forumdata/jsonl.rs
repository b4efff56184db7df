use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::ThreadRecord;
use crate::error::{Error, Result};

/// Reads one thread per line. Blank lines are skipped; an input with no
/// threads is rejected.
pub fn read_jsonl(path: &Path) -> Result<Vec<ThreadRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ThreadRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    if out.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(out)
}

pub fn write_jsonl(path: &Path, records: &[ThreadRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for rec in records {
        serde_json::to_writer(&mut w, rec)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forumdata::{CorpusOptions, ForumCorpus, PostRecord, PreprocessConfig};

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        std::fs::write(
            &p,
            "{\"thread_id\":\"a\",\"posts\":[]}\n\n{not json}\n",
        )
        .unwrap();
        match read_jsonl(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_file_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        std::fs::write(&p, "\n").unwrap();
        assert!(matches!(read_jsonl(&p), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn null_learner_and_missing_optional_fields() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        std::fs::write(
            &p,
            r#"{"thread_id":"t1","posts":[{"post_id":"p1","learner":null,"time":0.25,"text":"hi there"}]}"#,
        )
        .unwrap();
        let recs = read_jsonl(&p).unwrap();
        assert_eq!(recs[0].posts[0].learner, None);
        assert!(recs[0].posts[0].mentions.is_empty());
    }

    #[test]
    fn write_then_read_round_trips() {
        let recs = vec![ThreadRecord {
            thread_id: "t1".into(),
            posts: vec![
                PostRecord {
                    post_id: "p1".into(),
                    learner: Some("ann".into()),
                    time: 0.1 + 0.2,
                    text: "matrix rank".into(),
                    parent_post_id: None,
                    mentions: vec![],
                },
                PostRecord {
                    post_id: "p2".into(),
                    learner: None,
                    time: 1.0 / 3.0,
                    text: "rank".into(),
                    parent_post_id: Some("p1".into()),
                    mentions: vec!["ann".into()],
                },
            ],
        }];
        let opts = CorpusOptions {
            preprocess: PreprocessConfig::permissive(),
            horizon: Some(2.0),
        };
        let corpus = ForumCorpus::from_records(recs, &opts).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        corpus.write_jsonl(&p).unwrap();
        let again = crate::forumdata::ingest_corpus(&p, &opts).unwrap();
        assert_eq!(corpus, again);
    }
}
