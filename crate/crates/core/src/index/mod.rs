//! Inner-product retrieval indices: exact flat search, HNSW and PQ
//! approximations, a factory spec string to choose among them, and exact
//! cross-shard top-k merging.
//!
//! Every index orders hits by score descending with ties broken by docid
//! ascending, and scores f32 stored vectors with f64 accumulation — the two
//! conventions that make the exact/approximate/sharded paths comparable.

mod flat;
mod hnsw;
mod merge;
mod pq;

pub use flat::FlatIndex;
pub use hnsw::HnswIndex;
pub use merge::merge_shard_results;
pub use pq::PqIndex;

use alloc::collections::BinaryHeap;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::embed::EmbeddingShard;
use crate::{CoreError, Result};

pub const DEFAULT_DEPTH: usize = 100;
/// Search batch size: −1 submits all queries in one call.
pub const DEFAULT_BATCH_SIZE: i64 = -1;
pub const DEFAULT_EF_SEARCH: usize = 128;
pub const DEFAULT_EF_CONSTRUCTION: usize = 200;
pub const DEFAULT_PQ_NBITS: u32 = 8;

/// One ranked hit.
#[derive(Debug, Clone, PartialEq)]
pub struct Hit {
    pub docid: String,
    pub score: f64,
}

/// Ranked hits for one query, best first, length ≤ depth.
pub type SearchResult = Vec<Hit>;

/// Rank order: score descending, ties by docid ascending. Scores must be
/// finite (search errors on non-finite scores before ranking).
pub fn rank_cmp(a: &Hit, b: &Hit) -> Ordering {
    match b.score.partial_cmp(&a.score) {
        Some(Ordering::Equal) | None => a.docid.cmp(&b.docid),
        Some(o) => o,
    }
}

/// Bounded best-`depth` accumulator under `rank_cmp`.
pub(crate) struct TopAccumulator<'a> {
    depth: usize,
    heap: BinaryHeap<Entry<'a>>,
}

/// Heap entry ordered so the WORST-ranked hit is the maximum.
struct Entry<'a> {
    score: f64,
    docid: &'a str,
}

impl Entry<'_> {
    fn rank(&self, other: &Self) -> Ordering {
        match other.score.partial_cmp(&self.score) {
            Some(Ordering::Equal) | None => self.docid.cmp(other.docid),
            Some(o) => o,
        }
    }
}

impl PartialEq for Entry<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.rank(other) == Ordering::Equal
    }
}
impl Eq for Entry<'_> {}
impl PartialOrd for Entry<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Entry<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.rank(other)
    }
}

impl<'a> TopAccumulator<'a> {
    pub(crate) fn new(depth: usize) -> Self {
        TopAccumulator {
            depth,
            heap: BinaryHeap::with_capacity(depth + 1),
        }
    }

    pub(crate) fn push(&mut self, score: f64, docid: &'a str) {
        let entry = Entry { score, docid };
        if self.heap.len() < self.depth {
            self.heap.push(entry);
        } else if let Some(worst) = self.heap.peek() {
            if entry.rank(worst) == Ordering::Less {
                self.heap.pop();
                self.heap.push(entry);
            }
        }
    }

    pub(crate) fn into_hits(self) -> SearchResult {
        self.heap
            .into_sorted_vec()
            .into_iter()
            .map(|e| Hit {
                docid: String::from(e.docid),
                score: e.score,
            })
            .collect()
    }
}

/// Parsed index factory string: `Flat` | `HNSW<M>[,ef=<efSearch>]` |
/// `PQ<m>[x<nbits>]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexSpec {
    Flat,
    Hnsw { m: usize, ef_search: usize },
    Pq { m: usize, nbits: u32 },
}

impl IndexSpec {
    pub fn parse(s: &str) -> Result<IndexSpec> {
        let bad = |msg: &str| CoreError::BadIndexSpec(alloc::format!("{s:?}: {msg}"));
        if s == "Flat" {
            return Ok(IndexSpec::Flat);
        }
        if let Some(rest) = s.strip_prefix("HNSW") {
            let (m_str, ef_str) = match rest.split_once(",ef=") {
                Some((m, ef)) => (m, Some(ef)),
                None => (rest, None),
            };
            let m: usize = m_str.parse().map_err(|_| bad("expected HNSW<M>"))?;
            if m < 2 {
                return Err(bad("HNSW M must be >= 2"));
            }
            let ef_search = match ef_str {
                Some(e) => {
                    let ef: usize = e.parse().map_err(|_| bad("expected ef=<integer>"))?;
                    if ef == 0 {
                        return Err(bad("ef must be >= 1"));
                    }
                    ef
                }
                None => DEFAULT_EF_SEARCH,
            };
            return Ok(IndexSpec::Hnsw { m, ef_search });
        }
        if let Some(rest) = s.strip_prefix("PQ") {
            let (m_str, nbits_str) = match rest.split_once('x') {
                Some((m, b)) => (m, Some(b)),
                None => (rest, None),
            };
            let m: usize = m_str.parse().map_err(|_| bad("expected PQ<m>"))?;
            if m == 0 {
                return Err(bad("PQ m must be >= 1"));
            }
            let nbits = match nbits_str {
                Some(b) => {
                    let nbits: u32 = b.parse().map_err(|_| bad("expected x<nbits>"))?;
                    if !(1..=16).contains(&nbits) {
                        return Err(bad("PQ nbits must be in 1..=16"));
                    }
                    nbits
                }
                None => DEFAULT_PQ_NBITS,
            };
            return Ok(IndexSpec::Pq { m, nbits });
        }
        Err(bad("expected Flat, HNSW<M>[,ef=<ef>], or PQ<m>[x<nbits>]"))
    }
}

/// Concatenate shards row-wise, enforcing consistent width and globally
/// unique docids.
pub(crate) fn concat_shards(shards: &[EmbeddingShard]) -> Result<(Vec<String>, Vec<f32>, usize)> {
    let first = shards
        .first()
        .ok_or_else(|| CoreError::Invalid("no embedding shards".into()))?;
    let d = first.d_out;
    let mut ids = Vec::new();
    let mut matrix = Vec::new();
    for shard in shards {
        shard.validate()?;
        if shard.d_out != d {
            return Err(CoreError::InconsistentShards(alloc::format!(
                "shard width {} differs from {}",
                shard.d_out,
                d
            )));
        }
        ids.extend(shard.ids.iter().cloned());
        matrix.extend_from_slice(&shard.matrix);
    }
    let mut seen = alloc::collections::BTreeSet::new();
    for id in &ids {
        if !seen.insert(id.as_str()) {
            return Err(CoreError::DuplicateDocid(id.clone()));
        }
    }
    Ok((ids, matrix, d))
}

/// A built retrieval index of any supported kind.
#[derive(Debug, Clone)]
pub enum Index {
    Flat(FlatIndex),
    Hnsw(HnswIndex),
    Pq(PqIndex),
}

impl Index {
    /// Build from embedding shards in shard order. `seed` drives HNSW level
    /// draws and PQ k-means; Flat ignores it.
    pub fn build(spec: IndexSpec, shards: &[EmbeddingShard], seed: u64) -> Result<Index> {
        let (ids, matrix, d) = concat_shards(shards)?;
        Ok(match spec {
            IndexSpec::Flat => Index::Flat(FlatIndex::new(ids, matrix, d)),
            IndexSpec::Hnsw { m, ef_search } => Index::Hnsw(HnswIndex::build(
                ids,
                matrix,
                d,
                m,
                DEFAULT_EF_CONSTRUCTION,
                ef_search,
                seed,
            )?),
            IndexSpec::Pq { m, nbits } => {
                Index::Pq(PqIndex::build(ids, matrix, d, m, nbits, seed)?)
            }
        })
    }

    pub fn len(&self) -> usize {
        match self {
            Index::Flat(i) => i.len(),
            Index::Hnsw(i) => i.len(),
            Index::Pq(i) => i.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        match self {
            Index::Flat(i) => i.dim(),
            Index::Hnsw(i) => i.dim(),
            Index::Pq(i) => i.dim(),
        }
    }

    /// Search all queries at `depth`. `batch_size` −1 submits everything in
    /// one call; any positive value chunks the query list without changing
    /// results (per-query work is independent).
    pub fn search(
        &self,
        queries: &[Vec<f32>],
        depth: usize,
        batch_size: i64,
    ) -> Result<Vec<SearchResult>> {
        if depth == 0 {
            return Err(CoreError::Invalid("depth must be >= 1".into()));
        }
        let chunk = match batch_size {
            -1 => queries.len().max(1),
            b if b >= 1 => b as usize,
            b => {
                return Err(CoreError::Invalid(alloc::format!(
                    "batch_size must be -1 or >= 1, got {b}"
                )))
            }
        };
        let mut out = Vec::with_capacity(queries.len());
        for batch in queries.chunks(chunk) {
            for q in batch {
                if q.len() != self.dim() {
                    return Err(CoreError::DimMismatch {
                        left: q.len(),
                        right: self.dim(),
                    });
                }
                out.push(match self {
                    Index::Flat(i) => i.search_one(q, depth)?,
                    Index::Hnsw(i) => i.search_one(q, depth)?,
                    Index::Pq(i) => i.search_one(q, depth)?,
                });
            }
        }
        Ok(out)
    }
}
