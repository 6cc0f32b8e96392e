//! Record types shared by ingestion, training, encoding, and evaluation.
//!
//! Raw records mirror the line-oriented JSON training template: a query with
//! positive and negative passages, plus an optional answers list that marks
//! the record as QA rather than IR.  Tokenized forms carry fixed-vocabulary
//! token ids; corpus records additionally retain the raw passage string so
//! answer matching can run without the original input file.

use alloc::string::String;
use alloc::vec::Vec;

use crate::tokenizer::{self, TokenizerConfig};
use crate::CoreError;

/// Untokenized passage as it appears in the input template.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct RawPassage {
    pub docid: String,
    #[serde(default)]
    pub title: String,
    pub text: String,
}

/// Schema of a raw training file: plain retrieval, or QA with answers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schema {
    Ir,
    Qa,
}

/// Untokenized training record (one query, its positives and negatives).
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct RawTrainRecord {
    pub query_id: String,
    pub query: String,
    pub positive_passages: Vec<RawPassage>,
    pub negative_passages: Vec<RawPassage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answers: Option<Vec<String>>,
}

impl RawTrainRecord {
    /// Schema checks beyond what deserialization enforces.
    pub fn validate(&self, schema: Schema) -> Result<(), CoreError> {
        if self.query_id.is_empty() {
            return Err(CoreError::Invalid("empty query_id".into()));
        }
        if self.positive_passages.is_empty() {
            return Err(CoreError::Invalid(alloc::format!(
                "record {:?} has no positive passages",
                self.query_id
            )));
        }
        for p in self.positive_passages.iter().chain(&self.negative_passages) {
            validate_passage(p)?;
        }
        match schema {
            Schema::Qa => {
                let ok = self.answers.as_ref().is_some_and(|a| !a.is_empty());
                if !ok {
                    return Err(CoreError::Invalid(alloc::format!(
                        "qa record {:?} has no answers",
                        self.query_id
                    )));
                }
            }
            Schema::Ir => {}
        }
        Ok(())
    }
}

fn validate_passage(p: &RawPassage) -> Result<(), CoreError> {
    if p.docid.is_empty() {
        return Err(CoreError::Invalid("passage with empty docid".into()));
    }
    if p.text.is_empty() {
        return Err(CoreError::Invalid(alloc::format!(
            "passage {:?} has empty text",
            p.docid
        )));
    }
    Ok(())
}

/// Untokenized corpus entry: one retrievable passage.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct RawCorpusRecord {
    pub docid: String,
    #[serde(default)]
    pub title: String,
    pub text: String,
}

/// Untokenized query for encoding/search.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct RawQueryRecord {
    pub query_id: String,
    pub query: String,
}

/// Tokenized training example. Invariant: at least one positive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainExample {
    pub query: Vec<u32>,
    pub positives: Vec<(String, Vec<u32>)>,
    pub negatives: Vec<(String, Vec<u32>)>,
}

/// Tokenized corpus passage plus its display text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusRecord {
    pub docid: String,
    pub tokens: Vec<u32>,
    pub raw_text: String,
}

/// Tokenized query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryRecord {
    pub query_id: String,
    pub tokens: Vec<u32>,
}

/// Tokenize one raw training record.
pub fn tokenize_train_record(
    rec: &RawTrainRecord,
    query_cfg: TokenizerConfig,
    passage_cfg: TokenizerConfig,
) -> TrainExample {
    let seq = |p: &RawPassage| {
        (
            p.docid.clone(),
            tokenizer::tokenize_passage(&p.title, &p.text, passage_cfg),
        )
    };
    TrainExample {
        query: tokenizer::tokenize(&rec.query, query_cfg),
        positives: rec.positive_passages.iter().map(seq).collect(),
        negatives: rec.negative_passages.iter().map(seq).collect(),
    }
}

/// Tokenize one raw corpus record, retaining its display text.
pub fn tokenize_corpus_record(rec: &RawCorpusRecord, passage_cfg: TokenizerConfig) -> CorpusRecord {
    CorpusRecord {
        docid: rec.docid.clone(),
        tokens: tokenizer::tokenize_passage(&rec.title, &rec.text, passage_cfg),
        raw_text: tokenizer::passage_raw_text(&rec.title, &rec.text),
    }
}

/// Tokenize one raw query record.
pub fn tokenize_query_record(rec: &RawQueryRecord, query_cfg: TokenizerConfig) -> QueryRecord {
    QueryRecord {
        query_id: rec.query_id.clone(),
        tokens: tokenizer::tokenize(&rec.query, query_cfg),
    }
}
