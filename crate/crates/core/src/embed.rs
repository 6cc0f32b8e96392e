//! Embedding shards: id-paired f32 row matrices produced by corpus/query
//! encoding and consumed by index construction.
//!
//! Training math is f64; rows are narrowed to f32 at this boundary (the
//! on-disk convention for embedding dumps) and all downstream scoring
//! accumulates in f64 over the stored f32 values.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use crate::data::{CorpusRecord, QueryRecord};
use crate::model::{self, EncoderParams, Side};
use crate::{CoreError, Result};

/// One encoded shard: `ids[r]` labels `matrix` row `r` (row-major, d_out wide).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingShard {
    pub d_out: usize,
    pub ids: Vec<String>,
    pub matrix: Vec<f32>,
}

impl EmbeddingShard {
    pub fn new(d_out: usize) -> Self {
        EmbeddingShard {
            d_out,
            ids: Vec::new(),
            matrix: Vec::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.ids.len()
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.matrix[r * self.d_out..(r + 1) * self.d_out]
    }

    /// Append a row, narrowing f64 → f32.
    pub fn push_row(&mut self, id: String, row: &[f64]) -> Result<()> {
        if row.len() != self.d_out {
            return Err(CoreError::DimMismatch {
                left: row.len(),
                right: self.d_out,
            });
        }
        self.ids.push(id);
        self.matrix.extend(row.iter().map(|&v| v as f32));
        Ok(())
    }

    /// Shape and id-uniqueness checks (within this shard).
    pub fn validate(&self) -> Result<()> {
        if self.matrix.len() != self.ids.len() * self.d_out {
            return Err(CoreError::Invalid(alloc::format!(
                "shard matrix has {} values for {} rows of width {}",
                self.matrix.len(),
                self.ids.len(),
                self.d_out
            )));
        }
        let mut seen = BTreeSet::new();
        for id in &self.ids {
            if !seen.insert(id.as_str()) {
                return Err(CoreError::DuplicateDocid(id.clone()));
            }
        }
        Ok(())
    }
}

/// Encode a run of corpus records into one shard, in input order.
pub fn encode_corpus_shard<'a, I>(params: &EncoderParams, records: I) -> Result<EmbeddingShard>
where
    I: IntoIterator<Item = &'a CorpusRecord>,
{
    let mut shard = EmbeddingShard::new(params.cfg.d_out);
    for rec in records {
        let emb = model::encode(params, &rec.tokens, Side::Passage)?;
        shard.push_row(rec.docid.clone(), &emb)?;
    }
    Ok(shard)
}

/// Encode queries into one shard, in input order.
pub fn encode_query_shard<'a, I>(params: &EncoderParams, records: I) -> Result<EmbeddingShard>
where
    I: IntoIterator<Item = &'a QueryRecord>,
{
    let mut shard = EmbeddingShard::new(params.cfg.d_out);
    for rec in records {
        let emb = model::encode(params, &rec.tokens, Side::Query)?;
        shard.push_row(rec.query_id.clone(), &emb)?;
    }
    Ok(shard)
}
