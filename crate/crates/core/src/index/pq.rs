//! Product quantization with asymmetric distance computation.
//!
//! Vectors are split into `m` contiguous subspaces; each subspace gets its
//! own k-means codebook (seeded k-means++ init, capped Lloyd iterations,
//! empty clusters repaired by splitting the largest). Search builds one
//! query·centroid lookup table per subspace and scores a row as the sum of
//! its code's table entries. Centroids live in f64: that keeps ADC exactly
//! equal to flat search in the degenerate m == d case with enough
//! centroids, which the tests rely on.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::rng::{stream_rng, Stream};
use crate::{CoreError, Result};

use super::{SearchResult, TopAccumulator};

const KMEANS_MAX_ITERS: usize = 25;

#[derive(Debug, Clone)]
pub struct PqIndex {
    d: usize,
    m: usize,
    dsub: usize,
    k: usize,
    ids: Vec<String>,
    /// Codebooks, `m × k × dsub` row-major by (subspace, centroid, dim).
    codebooks: Vec<f64>,
    /// Codes, `rows × m` row-major.
    codes: Vec<u32>,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let diff = x - y;
        acc += diff * diff;
    }
    acc
}

/// Index of the nearest centroid; ties go to the lowest index.
fn nearest(centroids: &[Vec<f64>], point: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, centroid) in centroids.iter().enumerate() {
        let d = dist2(point, centroid);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

/// Seeded k-means++ initialization. When every point is already covered
/// (zero total D²) the remaining centroids duplicate the first one; ties in
/// assignment go to the lowest index, so duplicates stay empty.
fn kmeans_pp_init(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    let first = rng.gen_range(0..points.len());
    centroids.push(points[first].clone());
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            centroids.push(centroids[0].clone());
            continue;
        }
        let mut r = rng.gen::<f64>() * total;
        let mut chosen = points.len() - 1;
        for (i, &w) in d2.iter().enumerate() {
            if r < w {
                chosen = i;
                break;
            }
            r -= w;
        }
        centroids.push(points[chosen].clone());
        for (i, p) in points.iter().enumerate() {
            let d = dist2(p, centroids.last().expect("just pushed"));
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    centroids
}

/// Lloyd's algorithm with a fixed iteration cap and early stop on stable
/// assignments. Returns the centroids.
fn kmeans(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let dsub = points[0].len();
    let mut centroids = kmeans_pp_init(points, k, rng);
    let mut assign: Vec<usize> = vec![usize::MAX; points.len()];
    for _ in 0..KMEANS_MAX_ITERS {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let c = nearest(&centroids, p);
            if assign[i] != c {
                assign[i] = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        // Means in f64; a cluster of identical f32-derived values recovers
        // the value exactly.
        let mut sums = vec![vec![0.0; dsub]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(&assign) {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(p) {
                *s += *v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for (ct, s) in centroids[c].iter_mut().zip(&sums[c]) {
                    *ct = s / counts[c] as f64;
                }
            } else {
                // Split the largest cluster: move this centroid onto that
                // cluster's point farthest from its mean.
                let largest = (0..k).max_by_key(|&c2| counts[c2]).expect("k >= 1");
                let mut far_i = 0;
                let mut far_d = -1.0;
                for (i, p) in points.iter().enumerate() {
                    if assign[i] == largest {
                        let d = dist2(p, &centroids[largest]);
                        if d > far_d {
                            far_d = d;
                            far_i = i;
                        }
                    }
                }
                centroids[c] = points[far_i].clone();
            }
        }
    }
    centroids
}

impl PqIndex {
    pub(crate) fn build(
        ids: Vec<String>,
        matrix: Vec<f32>,
        d: usize,
        m: usize,
        nbits: u32,
        seed: u64,
    ) -> Result<Self> {
        if m == 0 || !d.is_multiple_of(m) {
            return Err(CoreError::PqSubspace { d, m });
        }
        let rows = ids.len();
        let k = 1usize << nbits;
        if k > rows {
            return Err(CoreError::PqTooFewPoints {
                centroids: k,
                points: rows,
            });
        }
        let dsub = d / m;
        let mut rng = stream_rng(seed, Stream::IndexBuild);
        let mut codebooks = Vec::with_capacity(m * k * dsub);
        let mut per_sub_centroids: Vec<Vec<Vec<f64>>> = Vec::with_capacity(m);
        for s in 0..m {
            let points: Vec<Vec<f64>> = (0..rows)
                .map(|r| {
                    let start = r * d + s * dsub;
                    matrix[start..start + dsub]
                        .iter()
                        .map(|&v| f64::from(v))
                        .collect()
                })
                .collect();
            let centroids = kmeans(&points, k, &mut rng);
            for c in &centroids {
                codebooks.extend_from_slice(c);
            }
            per_sub_centroids.push(centroids);
        }
        let mut codes = Vec::with_capacity(rows * m);
        for r in 0..rows {
            for (s, centroids) in per_sub_centroids.iter().enumerate() {
                let start = r * d + s * dsub;
                let point: Vec<f64> = matrix[start..start + dsub]
                    .iter()
                    .map(|&v| f64::from(v))
                    .collect();
                codes.push(nearest(centroids, &point) as u32);
            }
        }
        Ok(PqIndex {
            d,
            m,
            dsub,
            k,
            ids,
            codebooks,
            codes,
        })
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

    pub fn num_subspaces(&self) -> usize {
        self.m
    }

    pub fn num_centroids(&self) -> usize {
        self.k
    }

    fn centroid(&self, s: usize, c: usize) -> &[f64] {
        let start = (s * self.k + c) * self.dsub;
        &self.codebooks[start..start + self.dsub]
    }

    /// Reconstruction of row `r` from its codes. Test hook for
    /// quantization-error measurements.
    pub fn decode(&self, r: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.d);
        for s in 0..self.m {
            let code = self.codes[r * self.m + s] as usize;
            out.extend_from_slice(self.centroid(s, code));
        }
        out
    }

    /// ADC top-`depth`: per-subspace query·centroid tables, row score =
    /// sum of the row's code entries, subspaces in ascending order.
    pub fn search_one(&self, query: &[f32], depth: usize) -> Result<SearchResult> {
        let mut lut = vec![0.0f64; self.m * self.k];
        for s in 0..self.m {
            let qsub = &query[s * self.dsub..(s + 1) * self.dsub];
            for c in 0..self.k {
                let centroid = self.centroid(s, c);
                let mut acc = 0.0;
                for (&qv, &cv) in qsub.iter().zip(centroid) {
                    acc += f64::from(qv) * cv;
                }
                if !acc.is_finite() {
                    return Err(CoreError::NonFiniteScore);
                }
                lut[s * self.k + c] = acc;
            }
        }
        let mut acc = TopAccumulator::new(depth);
        for (r, id) in self.ids.iter().enumerate() {
            let mut score = 0.0;
            for s in 0..self.m {
                let code = self.codes[r * self.m + s] as usize;
                score += lut[s * self.k + code];
            }
            if !score.is_finite() {
                return Err(CoreError::NonFiniteScore);
            }
            acc.push(score, id);
        }
        Ok(acc.into_hits())
    }
}
