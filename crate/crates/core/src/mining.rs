//! Hard-negative mining: turn a retrieval run over training queries into
//! extra negatives for a second training round.
//!
//! For each training record whose query appears in the run, take the hits
//! down to `depth`, drop every docid listed among that record's positives
//! (and, for records carrying answers, any passage whose text matches an
//! answer), and append the first `per_query` survivors to the record's
//! negatives. Records whose query is missing from the run pass through
//! unchanged and are tallied so callers can warn.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::data::{RawPassage, RawTrainRecord};
use crate::metrics::{answer_matches, Run};
use crate::{CoreError, Result};

/// docid → (title, text), for rebuilding mined passages.
pub type CorpusMap = BTreeMap<String, (String, String)>;

/// Augmented records plus the count of queries absent from the run.
pub fn mine_hard_negatives(
    run: &Run,
    records: &[RawTrainRecord],
    corpus: &CorpusMap,
    depth: usize,
    per_query: usize,
) -> Result<(Vec<RawTrainRecord>, usize)> {
    let by_query: BTreeMap<&str, &[crate::index::Hit]> = run
        .iter()
        .map(|(qid, hits)| (qid.as_str(), hits.as_slice()))
        .collect();

    let mut out = Vec::with_capacity(records.len());
    let mut missing = 0usize;
    for record in records {
        let mut record = record.clone();
        let Some(hits) = by_query.get(record.query_id.as_str()) else {
            missing += 1;
            out.push(record);
            continue;
        };
        let positives: BTreeSet<&str> = record
            .positive_passages
            .iter()
            .map(|p| p.docid.as_str())
            .collect();
        let mut added = 0usize;
        for hit in hits.iter().take(depth) {
            if added == per_query {
                break;
            }
            if positives.contains(hit.docid.as_str()) {
                continue;
            }
            let (title, text) = corpus
                .get(&hit.docid)
                .ok_or_else(|| CoreError::MissingCorpusText(hit.docid.clone()))?;
            if let Some(answers) = &record.answers {
                let raw = crate::tokenizer::passage_raw_text(title, text);
                if answer_matches(answers, &raw) {
                    continue;
                }
            }
            record.negative_passages.push(RawPassage {
                docid: hit.docid.clone(),
                title: title.clone(),
                text: text.clone(),
            });
            added += 1;
        }
        out.push(record);
    }
    Ok((out, missing))
}
