//! Contiguous corpus partitioning for sharded encoding.

use crate::{CoreError, Result};

/// Half-open row range `[start, end)` of shard `s` out of `n` over a corpus.
///
/// Shards are contiguous and sizes differ by at most one: the first
/// `corpus_size mod n` shards carry the extra row, so shard `s` holds
/// `ceil((corpus_size − s)/n)` rows.
pub fn shard_range(corpus_size: usize, n: usize, s: usize) -> Result<(usize, usize)> {
    if n == 0 {
        return Err(CoreError::Invalid("num_shards must be >= 1".into()));
    }
    if s >= n {
        return Err(CoreError::Invalid(alloc::format!(
            "shard index {s} out of range for {n} shards"
        )));
    }
    let base = corpus_size / n;
    let extra = corpus_size % n;
    let start = s * base + s.min(extra);
    let size = base + usize::from(s < extra);
    Ok((start, start + size))
}
