//! Relevance-judgment files: IR qrels as TSV `query_id<TAB>docid` lines
//! (repeats accumulate into the docid set), QA qrels as JSONL objects with
//! `query_id` and `answers`.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader};
use std::path::Path;

use deskret_core::metrics::QrelSet;

use crate::error::{open_file, Error, Result};

pub fn read_ir_qrels(path: &Path) -> Result<QrelSet> {
    let display = path.display().to_string();
    let reader = BufReader::new(open_file(path)?);
    let mut map: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let (Some(qid), Some(docid), None) = (fields.next(), fields.next(), fields.next())
        else {
            return Err(Error::Line {
                path: display,
                line: lineno,
                message: "expected `query_id<TAB>docid`".into(),
            });
        };
        if qid.is_empty() || docid.is_empty() {
            return Err(Error::Line {
                path: display,
                line: lineno,
                message: "empty query_id or docid".into(),
            });
        }
        map.entry(qid.to_string()).or_default().insert(docid.to_string());
    }
    Ok(QrelSet::Ir(map))
}

#[derive(serde::Deserialize)]
struct QaQrelLine {
    query_id: String,
    answers: Vec<String>,
}

pub fn read_qa_qrels(path: &Path) -> Result<QrelSet> {
    let display = path.display().to_string();
    let reader = BufReader::new(open_file(path)?);
    let mut map: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: QaQrelLine = serde_json::from_str(&line).map_err(|e| Error::Line {
            path: display.clone(),
            line: lineno,
            message: e.to_string(),
        })?;
        if parsed.answers.is_empty() {
            return Err(Error::Line {
                path: display,
                line: lineno,
                message: format!("query {:?} has no answers", parsed.query_id),
            });
        }
        if map.insert(parsed.query_id.clone(), parsed.answers).is_some() {
            return Err(Error::Line {
                path: display,
                line: lineno,
                message: format!("duplicate query_id {:?}", parsed.query_id),
            });
        }
    }
    Ok(QrelSet::Qa(map))
}
