//! Hierarchical navigable small-world graph searched directly under inner
//! product (no MIPS-to-L2 reduction): insertion and search both rank
//! neighbors by raw dot product. Works well when stored norms are roughly
//! comparable (our encoders produce such corpora); a caveat for corpora
//! with wildly skewed norms.

use alloc::collections::BinaryHeap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::{Ordering, Reverse};

use rand::Rng;

use crate::mat::dot_f32;
use crate::rng::{stream_rng, Stream};
use crate::{CoreError, Result};

use super::{rank_cmp, Hit, SearchResult};

/// Cap on drawn levels; the geometric draw reaches this with probability
/// ~M^-24, far beyond any desk-scale corpus.
const MAX_LEVEL: usize = 24;

/// Similarity-ordered node for the search heaps: greater = higher score,
/// ties prefer the lower node index so heap order is total.
#[derive(Debug, Clone, Copy, PartialEq)]
struct ScoredNode {
    score: f64,
    node: u32,
}

impl Eq for ScoredNode {}

impl PartialOrd for ScoredNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ScoredNode {
    fn cmp(&self, other: &Self) -> Ordering {
        match self.score.partial_cmp(&other.score) {
            Some(Ordering::Equal) | None => other.node.cmp(&self.node),
            Some(o) => o,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HnswIndex {
    d: usize,
    ids: Vec<String>,
    matrix: Vec<f32>,
    m: usize,
    ef_search: usize,
    /// neighbors[node][level] — adjacency at each level the node occupies.
    neighbors: Vec<Vec<Vec<u32>>>,
    entry: u32,
    max_level: usize,
}

impl HnswIndex {
    pub(crate) fn build(
        ids: Vec<String>,
        matrix: Vec<f32>,
        d: usize,
        m: usize,
        ef_construction: usize,
        ef_search: usize,
        seed: u64,
    ) -> Result<Self> {
        debug_assert!(m >= 2);
        let n = ids.len();
        let mut index = HnswIndex {
            d,
            ids,
            matrix,
            m,
            ef_search,
            neighbors: Vec::with_capacity(n),
            entry: 0,
            max_level: 0,
        };
        // Draw all levels up front in node order so insertion order and
        // level assignment are both pure functions of (data, seed).
        let mut rng = stream_rng(seed, Stream::IndexBuild);
        let inv_ln_m = 1.0 / libm::log(m as f64);
        let levels: Vec<usize> = (0..n)
            .map(|_| {
                let u = 1.0 - rng.gen::<f64>();
                ((-libm::log(u) * inv_ln_m) as usize).min(MAX_LEVEL)
            })
            .collect();
        for (i, &level) in levels.iter().enumerate() {
            index.insert(i as u32, level, ef_construction)?;
        }
        Ok(index)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    fn row(&self, node: u32) -> &[f32] {
        let r = node as usize;
        &self.matrix[r * self.d..(r + 1) * self.d]
    }

    fn sim(&self, query: &[f32], node: u32) -> Result<f64> {
        let s = dot_f32(query, self.row(node));
        if s.is_finite() {
            Ok(s)
        } else {
            Err(CoreError::NonFiniteScore)
        }
    }

    fn degree_cap(&self, level: usize) -> usize {
        if level == 0 {
            2 * self.m
        } else {
            self.m
        }
    }

    /// Beam search within one level: best `ef` nodes found from the entry
    /// points, returned best-first.
    fn search_layer(
        &self,
        query: &[f32],
        entries: &[u32],
        level: usize,
        ef: usize,
    ) -> Result<Vec<ScoredNode>> {
        let mut visited = vec![false; self.len()];
        let mut candidates = BinaryHeap::new();
        let mut results: BinaryHeap<Reverse<ScoredNode>> = BinaryHeap::new();
        for &ep in entries {
            if !visited[ep as usize] {
                visited[ep as usize] = true;
                let sn = ScoredNode { score: self.sim(query, ep)?, node: ep };
                candidates.push(sn);
                results.push(Reverse(sn));
                if results.len() > ef {
                    results.pop();
                }
            }
        }
        while let Some(best) = candidates.pop() {
            let worst = results.peek().expect("results nonempty").0;
            if results.len() >= ef && best.score < worst.score {
                break;
            }
            for &nb in &self.neighbors[best.node as usize][level] {
                if visited[nb as usize] {
                    continue;
                }
                visited[nb as usize] = true;
                let sn = ScoredNode { score: self.sim(query, nb)?, node: nb };
                let worst = results.peek().expect("results nonempty").0;
                if results.len() < ef || sn.score > worst.score {
                    candidates.push(sn);
                    results.push(Reverse(sn));
                    if results.len() > ef {
                        results.pop();
                    }
                }
            }
        }
        Ok(results.into_sorted_vec().into_iter().map(|r| r.0).collect())
    }

    /// Diversity-pruned neighbor selection: walk candidates best-first
    /// (already sorted by similarity to the anchor) and keep each one only
    /// if it is closer to the anchor than to every neighbor kept so far,
    /// then refill with the best skipped ones up to `cap`. The diversity
    /// rule is what keeps the graph connected: plain top-cap selection
    /// funnels every edge into the densest region and strands outliers.
    fn select_diverse(
        &self,
        candidates: &[ScoredNode],
        cap: usize,
    ) -> Result<Vec<u32>> {
        let mut kept: Vec<ScoredNode> = Vec::with_capacity(cap);
        let mut skipped: Vec<u32> = Vec::new();
        for &c in candidates {
            if kept.len() == cap {
                break;
            }
            let c_vec = self.row(c.node);
            let mut diverse = true;
            for r in &kept {
                let s = dot_f32(c_vec, self.row(r.node));
                if !s.is_finite() {
                    return Err(CoreError::NonFiniteScore);
                }
                if s > c.score {
                    diverse = false;
                    break;
                }
            }
            if diverse {
                kept.push(c);
            } else {
                skipped.push(c.node);
            }
        }
        let mut out: Vec<u32> = kept.into_iter().map(|s| s.node).collect();
        for nb in skipped {
            if out.len() == cap {
                break;
            }
            out.push(nb);
        }
        Ok(out)
    }

    /// Re-select `node`'s links at `level` if they overflow the degree cap.
    fn prune(&mut self, node: u32, level: usize) -> Result<()> {
        let cap = self.degree_cap(level);
        if self.neighbors[node as usize][level].len() <= cap {
            return Ok(());
        }
        let vec_n = self.row(node);
        let mut scored: Vec<ScoredNode> = self.neighbors[node as usize][level]
            .iter()
            .map(|&nb| {
                let s = dot_f32(vec_n, self.row(nb));
                if s.is_finite() {
                    Ok(ScoredNode { score: s, node: nb })
                } else {
                    Err(CoreError::NonFiniteScore)
                }
            })
            .collect::<Result<_>>()?;
        scored.sort_by(|a, b| b.cmp(a));
        self.neighbors[node as usize][level] = self.select_diverse(&scored, cap)?;
        Ok(())
    }

    fn insert(&mut self, node: u32, level: usize, ef_construction: usize) -> Result<()> {
        self.neighbors.push(vec![Vec::new(); level + 1]);
        if node == 0 {
            self.entry = 0;
            self.max_level = level;
            return Ok(());
        }
        let query = self.row(node).to_vec();

        // Greedy descent through levels above the node's own.
        let mut entries = vec![self.entry];
        let top = self.max_level;
        for l in ((level + 1)..=top).rev() {
            let best = self.search_layer(&query, &entries, l, 1)?;
            entries = best.into_iter().take(1).map(|s| s.node).collect();
        }
        // Connect at every level the node occupies.
        for l in (0..=level.min(top)).rev() {
            let found = self.search_layer(&query, &entries, l, ef_construction)?;
            let selected = self.select_diverse(&found, self.m)?;
            self.neighbors[node as usize][l] = selected.clone();
            for nb in selected {
                self.neighbors[nb as usize][l].push(node);
                self.prune(nb, l)?;
            }
            entries = found.into_iter().map(|s| s.node).collect();
        }
        if level > self.max_level {
            self.entry = node;
            self.max_level = level;
        }
        Ok(())
    }

    /// Approximate top-`depth`: greedy descent to layer 0, then a beam of
    /// width max(ef_search, depth).
    pub fn search_one(&self, query: &[f32], depth: usize) -> Result<SearchResult> {
        if self.is_empty() {
            return Ok(Vec::new());
        }
        let ef = self.ef_search.max(depth);
        let mut entries = vec![self.entry];
        for l in (1..=self.max_level).rev() {
            let best = self.search_layer(query, &entries, l, 1)?;
            entries = best.into_iter().take(1).map(|s| s.node).collect();
        }
        let found = self.search_layer(query, &entries, 0, ef)?;
        let mut hits: Vec<Hit> = found
            .into_iter()
            .map(|s| Hit {
                docid: self.ids[s.node as usize].clone(),
                score: s.score,
            })
            .collect();
        hits.sort_by(rank_cmp);
        hits.truncate(depth);
        Ok(hits)
    }

    /// Nodes reachable from the entry point along stored edges at `level`.
    /// Test hook for the connectivity property.
    pub fn reachable_from_entry(&self, level: usize) -> usize {
        if self.is_empty() {
            return 0;
        }
        let mut seen = vec![false; self.len()];
        let mut stack = vec![self.entry];
        seen[self.entry as usize] = true;
        let mut count = 0;
        while let Some(node) = stack.pop() {
            let node_levels = &self.neighbors[node as usize];
            if level >= node_levels.len() {
                continue;
            }
            count += 1;
            for &nb in &node_levels[level] {
                if !seen[nb as usize] {
                    seen[nb as usize] = true;
                    stack.push(nb);
                }
            }
        }
        count
    }
}
