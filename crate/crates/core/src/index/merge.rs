//! Exact top-k merging of per-shard search results.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use crate::{CoreError, Result};

use super::{rank_cmp, SearchResult};

/// Merge per-shard rankings into the exact top-`depth` of their union,
/// query by query, under the shared rank order (score desc, docid asc).
/// Shards must agree on the query count, and a docid may appear in at most
/// one shard's result for a query.
pub fn merge_shard_results(
    per_shard: &[Vec<SearchResult>],
    depth: usize,
) -> Result<Vec<SearchResult>> {
    if depth == 0 {
        return Err(CoreError::Invalid("depth must be >= 1".into()));
    }
    let first = per_shard
        .first()
        .ok_or_else(|| CoreError::Invalid("no shard results to merge".into()))?;
    let num_queries = first.len();
    for (s, shard) in per_shard.iter().enumerate() {
        if shard.len() != num_queries {
            return Err(CoreError::InconsistentShards(alloc::format!(
                "shard {s} has {} query results, expected {num_queries}",
                shard.len()
            )));
        }
    }
    let mut merged = Vec::with_capacity(num_queries);
    for q in 0..num_queries {
        let mut seen = BTreeSet::new();
        let mut hits = Vec::new();
        for shard in per_shard {
            for hit in &shard[q] {
                if !seen.insert(hit.docid.as_str()) {
                    return Err(CoreError::DuplicateDocid(hit.docid.clone()));
                }
                hits.push(hit.clone());
            }
        }
        hits.sort_by(rank_cmp);
        hits.truncate(depth);
        merged.push(hits);
    }
    Ok(merged)
}
