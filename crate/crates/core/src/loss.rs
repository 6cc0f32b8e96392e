//! Contrastive loss with in-batch negatives, and its exact gradients.
//!
//! For a batch of B queries and B·n passages (group i holds query i's
//! passages, with the positive at slot i·n), every query is scored against
//! ALL B·n passages and the loss is the mean cross-entropy
//!
//!   loss = −(1/B)·Σ_i log[ exp(s(q_i, p_{i·n})/τ) / Σ_j exp(s(q_i, p_j)/τ) ]
//!
//! All softmaxes go through max-subtraction; a non-finite score or loss is
//! an error, never a silent NaN.  The helpers here are deliberately split —
//! encode, score→loss, embedding-gradient backprop — because gradient
//! caching and negative sharing reuse the pieces on different slicings of
//! the same batch.

use alloc::vec;
use alloc::vec::Vec;

use crate::mat::{dot, Mat};
use crate::model::{self, EncoderParams, Grads, Side};
use crate::{CoreError, Result};

pub const DEFAULT_TEMPERATURE: f64 = 1.0;

/// One training batch. `passages` is laid out in groups of `n` per query;
/// slot `i·n` is query i's positive, the rest of the group its negatives.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub queries: Vec<Vec<u32>>,
    pub passages: Vec<Vec<u32>>,
    pub n: usize,
}

impl Batch {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(CoreError::Invalid("n_passages must be >= 1".into()));
        }
        if self.queries.is_empty() {
            return Err(CoreError::Invalid("empty batch".into()));
        }
        if self.passages.len() != self.queries.len() * self.n {
            return Err(CoreError::Invalid(alloc::format!(
                "expected {} passages for {} queries (n={}), got {}",
                self.queries.len() * self.n,
                self.queries.len(),
                self.n,
                self.passages.len()
            )));
        }
        Ok(())
    }
}

/// Encode a slice of sequences with one tower, in order.
pub fn encode_all(params: &EncoderParams, seqs: &[Vec<u32>], side: Side) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(seqs.len());
    for s in seqs {
        out.push(model::encode(params, s, side)?);
    }
    Ok(out)
}

/// Score matrix S[i][j] = q_i · p_j. Errors on any non-finite entry.
pub fn score_matrix(q_emb: &[Vec<f64>], p_emb: &[Vec<f64>]) -> Result<Mat> {
    let mut s = Mat::zeros(q_emb.len(), p_emb.len());
    for (i, q) in q_emb.iter().enumerate() {
        let row = s.row_mut(i);
        for (j, p) in p_emb.iter().enumerate() {
            let v = dot(q, p);
            if !v.is_finite() {
                return Err(CoreError::NonFiniteScore);
            }
            row[j] = v;
        }
    }
    Ok(s)
}

/// Softmax cross-entropy over a score matrix: loss plus ∂loss/∂S.
///
/// `targets[i]` is the positive column for row i; each row contributes
/// `inv_norm · (logsumexp_i − z_{i,target})` with z = S/τ, so the caller
/// controls the batch normalization (1/B locally, 1/(W·B) when the batch is
/// a shard of a larger logical one).
pub fn loss_from_scores(
    scores: &Mat,
    targets: &[usize],
    tau: f64,
    inv_norm: f64,
) -> Result<(f64, Mat)> {
    if tau <= 0.0 || !tau.is_finite() {
        return Err(CoreError::Invalid("temperature must be positive".into()));
    }
    debug_assert_eq!(targets.len(), scores.rows());
    let cols = scores.cols();
    let mut d_scores = Mat::zeros(scores.rows(), cols);
    let mut loss = 0.0;
    for (i, &t) in targets.iter().enumerate() {
        debug_assert!(t < cols);
        let row = scores.row(i);
        let mut zmax = f64::NEG_INFINITY;
        for &s in row {
            let z = s / tau;
            if z > zmax {
                zmax = z;
            }
        }
        let mut denom = 0.0;
        for &s in row {
            denom += libm::exp(s / tau - zmax);
        }
        let lse = zmax + libm::log(denom);
        loss += inv_norm * (lse - row[t] / tau);

        let drow = d_scores.row_mut(i);
        for (j, &s) in row.iter().enumerate() {
            let softmax = libm::exp(s / tau - zmax) / denom;
            let indicator = if j == t { 1.0 } else { 0.0 };
            drow[j] = inv_norm * (softmax - indicator) / tau;
        }
    }
    if !loss.is_finite() {
        return Err(CoreError::NonFiniteLoss);
    }
    Ok((loss, d_scores))
}

/// Loss and per-embedding gradients for cached-embedding workflows.
#[derive(Debug, Clone)]
pub struct EmbeddingGrads {
    pub loss: f64,
    /// ∂loss/∂q_i, one row per query embedding.
    pub d_q: Vec<Vec<f64>>,
    /// ∂loss/∂p_j, one row per passage embedding.
    pub d_p: Vec<Vec<f64>>,
}

/// Loss plus gradients w.r.t. every query and passage embedding.
pub fn embedding_grads(
    q_emb: &[Vec<f64>],
    p_emb: &[Vec<f64>],
    targets: &[usize],
    tau: f64,
    inv_norm: f64,
) -> Result<EmbeddingGrads> {
    let scores = score_matrix(q_emb, p_emb)?;
    let (loss, d_scores) = loss_from_scores(&scores, targets, tau, inv_norm)?;
    let d = q_emb.first().map_or(0, Vec::len);

    // d_q[i] = Σ_j dS[i][j]·p_j and d_p[j] = Σ_i dS[i][j]·q_i, both
    // accumulated in ascending index order.
    let mut d_q = vec![vec![0.0; d]; q_emb.len()];
    for (i, dq) in d_q.iter_mut().enumerate() {
        let drow = d_scores.row(i);
        for (j, p) in p_emb.iter().enumerate() {
            let g = drow[j];
            for (a, &pv) in dq.iter_mut().zip(p) {
                *a += g * pv;
            }
        }
    }
    let mut d_p = vec![vec![0.0; d]; p_emb.len()];
    for (j, dp) in d_p.iter_mut().enumerate() {
        for (i, q) in q_emb.iter().enumerate() {
            let g = d_scores.at(i, j);
            for (a, &qv) in dp.iter_mut().zip(q) {
                *a += g * qv;
            }
        }
    }
    Ok(EmbeddingGrads { loss, d_q, d_p })
}

/// Push embedding gradients back through the encoder: queries in order,
/// then passages in order. The fixed order makes sub-batched replays
/// reproduce the monolithic pass exactly when they cover the same ranges.
pub fn backprop_embeddings(
    params: &EncoderParams,
    queries: &[Vec<u32>],
    passages: &[Vec<u32>],
    d_q: &[Vec<f64>],
    d_p: &[Vec<f64>],
    grads: &mut Grads,
) -> Result<()> {
    debug_assert_eq!(queries.len(), d_q.len());
    debug_assert_eq!(passages.len(), d_p.len());
    for (seq, g) in queries.iter().zip(d_q) {
        model::encode_backward(params, seq, Side::Query, g, grads)?;
    }
    for (seq, g) in passages.iter().zip(d_p) {
        model::encode_backward(params, seq, Side::Passage, g, grads)?;
    }
    Ok(())
}

/// In-batch-negative targets: query i's positive sits at column i·n.
pub fn in_batch_targets(b: usize, n: usize) -> Vec<usize> {
    (0..b).map(|i| i * n).collect()
}

/// Full-batch contrastive loss and parameter gradients.
pub fn contrastive_loss(params: &EncoderParams, batch: &Batch, tau: f64) -> Result<(f64, Grads)> {
    batch.validate()?;
    let b = batch.queries.len();
    let q_emb = encode_all(params, &batch.queries, Side::Query)?;
    let p_emb = encode_all(params, &batch.passages, Side::Passage)?;
    let eg = embedding_grads(
        &q_emb,
        &p_emb,
        &in_batch_targets(b, batch.n),
        tau,
        1.0 / b as f64,
    )?;
    let mut grads = Grads::zeros_like(params);
    backprop_embeddings(params, &batch.queries, &batch.passages, &eg.d_q, &eg.d_p, &mut grads)?;
    Ok((eg.loss, grads))
}
