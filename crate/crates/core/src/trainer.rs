//! Training loop: epoch shuffling, batch assembly with deterministic
//! negative filling, optimizer steps, gradient caching, and simulated
//! multi-worker negative sharing.
//!
//! Everything downstream of `(seed, data, config)` is deterministic: the
//! per-epoch shuffle, the with-replacement negative resampling, and the
//! cross-example positive padding all draw from seed-derived streams, so a
//! rerun reproduces the checkpoint bit for bit.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::data::TrainExample;
use crate::loss::{
    self, backprop_embeddings, contrastive_loss, embedding_grads, encode_all, in_batch_targets,
    Batch,
};
use crate::model::{EncoderParams, Grads, Side};
use crate::optim::{Optimizer, OptimizerKind};
use crate::rng::{stream_rng, Stream};
use crate::{CoreError, Result};

pub const DEFAULT_BATCH_SIZE: usize = 8;
pub const DEFAULT_N_PASSAGES: usize = 2;
pub const DEFAULT_EPOCHS: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub n_passages: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub temperature: f64,
    pub grad_cache: bool,
    pub sub_batch_size: usize,
    pub num_workers: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: DEFAULT_BATCH_SIZE,
            n_passages: DEFAULT_N_PASSAGES,
            epochs: DEFAULT_EPOCHS,
            learning_rate: crate::optim::DEFAULT_LEARNING_RATE,
            optimizer: OptimizerKind::adam_default(),
            temperature: loss::DEFAULT_TEMPERATURE,
            grad_cache: false,
            sub_batch_size: DEFAULT_BATCH_SIZE,
            num_workers: 1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(CoreError::Invalid("batch_size must be >= 1".into()));
        }
        if self.n_passages == 0 {
            return Err(CoreError::Invalid("n_passages must be >= 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(CoreError::Invalid("learning_rate must be finite and >= 0".into()));
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(CoreError::Invalid("temperature must be positive".into()));
        }
        if self.grad_cache
            && (self.sub_batch_size == 0
                || !self.batch_size.is_multiple_of(self.sub_batch_size))
        {
            return Err(CoreError::Invalid(alloc::format!(
                "sub_batch_size {} must divide batch_size {}",
                self.sub_batch_size,
                self.batch_size
            )));
        }
        if self.num_workers == 0 {
            return Err(CoreError::Invalid("num_workers must be >= 1".into()));
        }
        if self.num_workers > 1 {
            if !self.batch_size.is_multiple_of(self.num_workers) {
                return Err(CoreError::Invalid(alloc::format!(
                    "num_workers {} must divide batch_size {}",
                    self.num_workers,
                    self.batch_size
                )));
            }
            if self.grad_cache {
                return Err(CoreError::Invalid(
                    "grad_cache with num_workers > 1 is not supported".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Random-access provider of training examples. Implementations must return
/// the example at `index` regardless of any prefetch schedule, because batch
/// assembly occasionally fetches out of order (positive padding below).
pub trait ExampleSource {
    fn len(&self) -> usize;
    fn fetch(&mut self, index: usize) -> Result<TrainExample>;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl ExampleSource for Vec<TrainExample> {
    fn len(&self) -> usize {
        Vec::len(self)
    }

    fn fetch(&mut self, index: usize) -> Result<TrainExample> {
        self.get(index).cloned().ok_or(CoreError::IndexOutOfRange {
            index,
            len: Vec::len(self),
        })
    }
}

/// Visit order of example indices for one epoch: a seed-and-epoch-keyed
/// Fisher–Yates shuffle. Pure, so data loaders can precompute it.
pub fn epoch_schedule(seed: u64, epoch: u64, len: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(&mut stream_rng(seed, Stream::Shuffle { epoch }));
    order
}

/// Build query + n-passage group for one example.
///
/// Slot 0 is the example's first positive. Slots 1..n come from the
/// example's negatives in order; a shortfall is filled by resampling the
/// example's own negatives with replacement, and an example with zero
/// negatives is padded with positives of other examples. Both draws are
/// keyed by (seed, example index) only, so the group is stable across
/// epochs and independent of batch composition.
fn assemble_group(
    src: &mut dyn ExampleSource,
    index: usize,
    n: usize,
    seed: u64,
) -> Result<(Vec<u32>, Vec<Vec<u32>>)> {
    let ex = src.fetch(index)?;
    let positive = ex
        .positives
        .first()
        .ok_or_else(|| CoreError::Invalid(alloc::format!("example {index} has no positive")))?;
    let mut group = Vec::with_capacity(n);
    group.push(positive.1.clone());
    let needed = n - 1;
    if needed == 0 {
        return Ok((ex.query, group));
    }
    if ex.negatives.is_empty() {
        if src.len() < 2 {
            return Err(CoreError::Invalid(
                "cannot pad a zero-negative example from a single-example store".into(),
            ));
        }
        let mut rng = stream_rng(seed, Stream::NegativeFill { example: index as u64 });
        for _ in 0..needed {
            let mut j = rng.gen_range(0..src.len() - 1);
            if j >= index {
                j += 1;
            }
            let other = src.fetch(j)?;
            let p = other.positives.first().ok_or_else(|| {
                CoreError::Invalid(alloc::format!("example {j} has no positive"))
            })?;
            group.push(p.1.clone());
        }
    } else {
        for neg in ex.negatives.iter().take(needed) {
            group.push(neg.1.clone());
        }
        if group.len() < 1 + needed {
            let mut rng = stream_rng(seed, Stream::NegativeFill { example: index as u64 });
            while group.len() < 1 + needed {
                let j = rng.gen_range(0..ex.negatives.len());
                group.push(ex.negatives[j].1.clone());
            }
        }
    }
    Ok((ex.query, group))
}

/// Assemble the queries and grouped passages for one batch of indices.
pub fn assemble_batch(
    src: &mut dyn ExampleSource,
    indices: &[usize],
    n: usize,
    seed: u64,
) -> Result<Batch> {
    let mut queries = Vec::with_capacity(indices.len());
    let mut passages = Vec::with_capacity(indices.len() * n);
    for &i in indices {
        let (q, group) = assemble_group(src, i, n, seed)?;
        queries.push(q);
        passages.extend(group);
    }
    Ok(Batch { queries, passages, n })
}

/// One full-batch optimizer update. Returns the batch loss.
pub fn step_full(
    params: &mut EncoderParams,
    opt: &mut Optimizer,
    batch: &Batch,
    cfg: &TrainConfig,
) -> Result<f64> {
    let (loss, grads) = contrastive_loss(params, batch, cfg.temperature)?;
    opt.step(params, &grads, cfg.learning_rate)?;
    Ok(loss)
}

/// Embedding-activation accounting for the gradient-cache step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GradCacheStats {
    /// Rows held in the embedding cache (B + B·n).
    pub cache_rows: usize,
    /// Re-encoded rows live at once during round 2 (sub + sub·n).
    pub sub_rows: usize,
    /// Peak live rows observed across both rounds.
    pub peak_live_rows: usize,
}

struct ActivationMeter {
    live: usize,
    peak: usize,
}

impl ActivationMeter {
    fn new() -> Self {
        ActivationMeter { live: 0, peak: 0 }
    }

    fn alloc(&mut self, rows: usize) {
        self.live += rows;
        if self.live > self.peak {
            self.peak = self.live;
        }
    }

    fn free(&mut self, rows: usize) {
        debug_assert!(rows <= self.live);
        self.live -= rows;
    }
}

/// Two-round gradient-cached loss/gradient computation.
///
/// Round 1 encodes sub-batch by sub-batch into an embedding cache and
/// computes the loss and per-embedding gradients over the full batch.
/// Round 2 re-encodes each sub-batch and backpropagates its cached
/// embedding gradients into the parameter gradients. With
/// `sub_batch_size == batch` the arithmetic sequence is identical to
/// `contrastive_loss`; any divisor reproduces it to ~1e-10 relative error,
/// while only cache + one sub-batch of activations is ever live.
pub fn gradcache_loss_and_grads(
    params: &EncoderParams,
    batch: &Batch,
    tau: f64,
    sub_batch_size: usize,
) -> Result<(f64, Grads, GradCacheStats)> {
    batch.validate()?;
    let b = batch.queries.len();
    let n = batch.n;
    if sub_batch_size == 0 || !b.is_multiple_of(sub_batch_size) {
        return Err(CoreError::Invalid(alloc::format!(
            "sub_batch_size {sub_batch_size} must divide batch size {b}"
        )));
    }
    let mut meter = ActivationMeter::new();

    // Round 1: fill the cache chunk by chunk; cache rows stay live to the end.
    let mut q_cache: Vec<Vec<f64>> = Vec::with_capacity(b);
    let mut p_cache: Vec<Vec<f64>> = Vec::with_capacity(b * n);
    for chunk_start in (0..b).step_by(sub_batch_size) {
        let q_range = chunk_start..chunk_start + sub_batch_size;
        let p_range = chunk_start * n..(chunk_start + sub_batch_size) * n;
        meter.alloc(q_range.len() + p_range.len());
        q_cache.extend(encode_all(params, &batch.queries[q_range], Side::Query)?);
        p_cache.extend(encode_all(params, &batch.passages[p_range], Side::Passage)?);
    }
    let eg = embedding_grads(
        &q_cache,
        &p_cache,
        &in_batch_targets(b, n),
        tau,
        1.0 / b as f64,
    )?;

    // Round 2: re-encode one sub-batch at a time and push its cached
    // embedding gradients into the parameter gradients.
    let mut grads = Grads::zeros_like(params);
    for chunk_start in (0..b).step_by(sub_batch_size) {
        let q_range = chunk_start..chunk_start + sub_batch_size;
        let p_range = chunk_start * n..(chunk_start + sub_batch_size) * n;
        let rows = q_range.len() + p_range.len();
        meter.alloc(rows);
        backprop_embeddings(
            params,
            &batch.queries[q_range.clone()],
            &batch.passages[p_range.clone()],
            &eg.d_q[q_range],
            &eg.d_p[p_range],
            &mut grads,
        )?;
        meter.free(rows);
    }
    let stats = GradCacheStats {
        cache_rows: b + b * n,
        sub_rows: sub_batch_size + sub_batch_size * n,
        peak_live_rows: meter.peak,
    };
    Ok((eg.loss, grads, stats))
}

/// One gradient-cached optimizer update.
pub fn step_gradcache(
    params: &mut EncoderParams,
    opt: &mut Optimizer,
    batch: &Batch,
    cfg: &TrainConfig,
) -> Result<(f64, GradCacheStats)> {
    let (loss, grads, stats) =
        gradcache_loss_and_grads(params, batch, cfg.temperature, cfg.sub_batch_size)?;
    opt.step(params, &grads, cfg.learning_rate)?;
    Ok((loss, stats))
}

/// Loss and gradients for W workers sharing in-batch negatives.
///
/// Simulates an all-gather: worker w scores its own queries against the
/// concatenation of every worker's passages, normalizes its loss by the
/// global query count W·B_w, and owns the backprop of its own rows after
/// the per-passage embedding gradients are reduced across workers. Both
/// reductions (loss and embedding gradients) run pairwise left to right in
/// worker order, so the result is a deterministic function of the batches.
pub fn shared_negatives_loss_and_grads(
    params: &EncoderParams,
    worker_batches: &[Batch],
    tau: f64,
) -> Result<(f64, Grads)> {
    let w = worker_batches.len();
    if w == 0 {
        return Err(CoreError::Invalid("no worker batches".into()));
    }
    let first = &worker_batches[0];
    first.validate()?;
    let (b_w, n) = (first.queries.len(), first.n);
    for batch in worker_batches.iter().skip(1) {
        batch.validate()?;
        if batch.queries.len() != b_w || batch.n != n {
            return Err(CoreError::Invalid(
                "worker batches must have identical shapes".into(),
            ));
        }
    }

    // Encode every worker's rows, then gather all passages.
    let mut q_embs = Vec::with_capacity(w);
    let mut p_embs = Vec::with_capacity(w);
    for batch in worker_batches {
        q_embs.push(encode_all(params, &batch.queries, Side::Query)?);
        p_embs.push(encode_all(params, &batch.passages, Side::Passage)?);
    }
    let gathered: Vec<Vec<f64>> = p_embs.iter().flatten().cloned().collect();

    let inv_norm = 1.0 / (w * b_w) as f64;
    let mut loss = 0.0;
    let mut d_p_reduced: Vec<Vec<f64>> = vec![vec![0.0; params.cfg.d_out]; gathered.len()];
    let mut d_qs = Vec::with_capacity(w);
    for (wi, q_emb) in q_embs.iter().enumerate() {
        // Worker wi's positives sit at global columns (wi·B_w + i)·n.
        let targets: Vec<usize> = (0..b_w).map(|i| (wi * b_w + i) * n).collect();
        let eg = embedding_grads(q_emb, &gathered, &targets, tau, inv_norm)?;
        loss += eg.loss;
        for (acc, row) in d_p_reduced.iter_mut().zip(&eg.d_p) {
            for (a, v) in acc.iter_mut().zip(row) {
                *a += *v;
            }
        }
        d_qs.push(eg.d_q);
    }
    if !loss.is_finite() {
        return Err(CoreError::NonFiniteLoss);
    }

    // Each worker backprops its own rows: queries, then its slice of the
    // reduced passage gradients.
    let mut grads = Grads::zeros_like(params);
    for (wi, batch) in worker_batches.iter().enumerate() {
        let p_range = wi * b_w * n..(wi + 1) * b_w * n;
        backprop_embeddings(
            params,
            &batch.queries,
            &batch.passages,
            &d_qs[wi],
            &d_p_reduced[p_range],
            &mut grads,
        )?;
    }
    Ok((loss, grads))
}

/// One negative-sharing optimizer update across simulated workers.
pub fn step_shared_negatives(
    params: &mut EncoderParams,
    opt: &mut Optimizer,
    worker_batches: &[Batch],
    cfg: &TrainConfig,
) -> Result<f64> {
    let (loss, grads) = shared_negatives_loss_and_grads(params, worker_batches, cfg.temperature)?;
    opt.step(params, &grads, cfg.learning_rate)?;
    Ok(loss)
}

/// One `epoch,step,loss` record of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossEntry {
    pub epoch: usize,
    pub step: usize,
    pub loss: f64,
}

/// Train in place for `cfg.epochs` epochs; returns the per-step loss log.
/// A trailing partial batch (fewer than B examples) is dropped.
pub fn train(
    params: &mut EncoderParams,
    src: &mut dyn ExampleSource,
    cfg: &TrainConfig,
) -> Result<Vec<LossEntry>> {
    cfg.validate()?;
    if src.is_empty() {
        return Err(CoreError::Invalid("training store is empty".into()));
    }
    if cfg.batch_size > src.len() {
        return Err(CoreError::Invalid(alloc::format!(
            "batch_size {} exceeds store size {}",
            cfg.batch_size,
            src.len()
        )));
    }
    let mut opt = Optimizer::new(cfg.optimizer, params);
    let mut log = Vec::new();
    for epoch in 0..cfg.epochs {
        let order = epoch_schedule(cfg.seed, epoch as u64, src.len());
        for (step, chunk) in order.chunks_exact(cfg.batch_size).enumerate() {
            let loss = if cfg.num_workers > 1 {
                let b_w = cfg.batch_size / cfg.num_workers;
                let mut worker_batches = Vec::with_capacity(cfg.num_workers);
                for piece in chunk.chunks_exact(b_w) {
                    worker_batches.push(assemble_batch(src, piece, cfg.n_passages, cfg.seed)?);
                }
                step_shared_negatives(params, &mut opt, &worker_batches, cfg)?
            } else {
                let batch = assemble_batch(src, chunk, cfg.n_passages, cfg.seed)?;
                if cfg.grad_cache {
                    step_gradcache(params, &mut opt, &batch, cfg)?.0
                } else {
                    step_full(params, &mut opt, &batch, cfg)?
                }
            };
            log.push(LossEntry { epoch, step, loss });
        }
    }
    Ok(log)
}

/// Mean loss per epoch, in epoch order.
pub fn epoch_means(log: &[LossEntry]) -> Vec<f64> {
    let mut sums: Vec<(f64, usize)> = Vec::new();
    for e in log {
        if e.epoch >= sums.len() {
            sums.resize(e.epoch + 1, (0.0, 0));
        }
        sums[e.epoch].0 += e.loss;
        sums[e.epoch].1 += 1;
    }
    sums.iter().map(|&(s, c)| s / c.max(1) as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EncoderConfig, Mode, Pooler};

    fn params(seed: u64) -> EncoderParams {
        EncoderParams::init(
            EncoderConfig {
                mode: Mode::Dual,
                pooler: Pooler::Mean,
                vocab_size: 29,
                d_embed: 6,
                d_out: 5,
            },
            seed,
        )
    }

    fn example(seed: u64, negatives: usize) -> TrainExample {
        let mut rng = stream_rng(seed, Stream::Synth);
        let mut seq = |len: usize| -> Vec<u32> {
            (0..len).map(|_| rng.gen_range(0..29u32)).collect()
        };
        TrainExample {
            query: seq(3),
            positives: alloc::vec![(alloc::format!("p{seed}"), seq(5))],
            negatives: (0..negatives)
                .map(|k| (alloc::format!("n{seed}-{k}"), seq(5)))
                .collect(),
        }
    }

    fn source(count: usize, negatives: usize) -> Vec<TrainExample> {
        (0..count).map(|i| example(i as u64, negatives)).collect()
    }

    fn cfg(b: usize) -> TrainConfig {
        TrainConfig {
            batch_size: b,
            epochs: 2,
            learning_rate: 1e-2,
            seed: 7,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn schedule_is_a_permutation_and_seed_stable() {
        let a = epoch_schedule(1, 0, 10);
        let b = epoch_schedule(1, 0, 10);
        assert_eq!(a, b);
        let mut sorted = a.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..10).collect::<Vec<_>>());
        assert_ne!(epoch_schedule(1, 1, 10), a);
    }

    #[test]
    fn zero_lr_leaves_params_bitwise_unchanged() {
        let mut p = params(1);
        let before = p.clone();
        let mut src = source(8, 2);
        let mut c = cfg(4);
        c.learning_rate = 0.0;
        c.epochs = 1;
        train(&mut p, &mut src, &c).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn same_seed_same_loss_log() {
        let mut src = source(10, 2);
        let mut p1 = params(2);
        let log1 = train(&mut p1, &mut src, &cfg(5)).unwrap();
        let mut p2 = params(2);
        let log2 = train(&mut p2, &mut src, &cfg(5)).unwrap();
        assert_eq!(log1, log2);
        assert_eq!(p1, p2);
    }

    #[test]
    fn empty_and_oversized_batches_rejected() {
        let mut p = params(3);
        let mut empty: Vec<TrainExample> = Vec::new();
        assert!(train(&mut p, &mut empty, &cfg(2)).is_err());
        let mut src = source(3, 1);
        assert!(train(&mut p, &mut src, &cfg(4)).is_err());
    }

    #[test]
    fn partial_final_batch_is_dropped() {
        let mut p = params(4);
        let mut src = source(7, 1);
        let mut c = cfg(3);
        c.epochs = 1;
        let log = train(&mut p, &mut src, &c).unwrap();
        // 7 examples, B=3 → 2 full batches, 1 example dropped.
        assert_eq!(log.len(), 2);
    }

    #[test]
    fn negative_shortfall_resamples_own_negatives() {
        let mut src = source(4, 1);
        let batch = assemble_batch(&mut src, &[2], 4, 99).unwrap();
        let ex = src[2].clone();
        assert_eq!(batch.passages[0], ex.positives[0].1);
        assert_eq!(batch.passages[1], ex.negatives[0].1);
        // Only one negative exists, so the fill repeats it.
        assert_eq!(batch.passages[2], ex.negatives[0].1);
        assert_eq!(batch.passages[3], ex.negatives[0].1);
    }

    #[test]
    fn zero_negative_example_padded_with_other_positives() {
        let mut src = source(4, 0);
        let batch = assemble_batch(&mut src, &[1], 3, 99).unwrap();
        assert_eq!(batch.passages[0], src[1].positives[0].1);
        let own = &src[1].positives[0].1;
        for p in &batch.passages[1..] {
            assert_ne!(p, own);
            assert!(src.iter().any(|e| &e.positives[0].1 == p));
        }
    }

    #[test]
    fn group_assembly_ignores_epoch_and_batch_position() {
        let mut src = source(6, 0);
        let a = assemble_batch(&mut src, &[3], 3, 5).unwrap();
        let b = assemble_batch(&mut src, &[0, 3], 3, 5).unwrap();
        assert_eq!(a.passages, b.passages[3..6].to_vec());
    }

    #[test]
    fn gradcache_degenerate_split_is_bitwise_full_batch() {
        let p = params(5);
        let mut src = source(6, 2);
        let batch = assemble_batch(&mut src, &[0, 1, 2, 3], 2, 1).unwrap();
        let (l_full, g_full) = contrastive_loss(&p, &batch, 1.0).unwrap();
        let (l_gc, g_gc, stats) = gradcache_loss_and_grads(&p, &batch, 1.0, 4).unwrap();
        assert_eq!(l_full, l_gc);
        assert_eq!(g_full, g_gc);
        assert_eq!(stats.cache_rows, 4 + 8);
    }

    #[test]
    fn gradcache_split_matches_full_batch_to_1e10() {
        let p = params(6);
        let mut src = source(8, 2);
        let batch = assemble_batch(&mut src, &[0, 1, 2, 3, 4, 5, 6, 7], 2, 1).unwrap();
        let (l_full, g_full) = contrastive_loss(&p, &batch, 1.0).unwrap();
        for sub in [1usize, 2, 4] {
            let (l_gc, g_gc, _) = gradcache_loss_and_grads(&p, &batch, 1.0, sub).unwrap();
            assert!((l_full - l_gc).abs() <= 1e-12 * l_full.abs().max(1.0));
            for (a, b) in g_full.tensors().iter().zip(g_gc.tensors()) {
                for (x, y) in a.iter().zip(b.iter()) {
                    let rel = (x - y).abs() / (x.abs() + 1e-12);
                    assert!(rel < 1e-10, "sub={sub}: {x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn gradcache_peak_bounded_by_cache_plus_sub_batch() {
        let p = params(7);
        let mut src = source(8, 2);
        let batch = assemble_batch(&mut src, &[0, 1, 2, 3, 4, 5, 6, 7], 2, 1).unwrap();
        let (_, _, stats) = gradcache_loss_and_grads(&p, &batch, 1.0, 2).unwrap();
        assert_eq!(stats.cache_rows, 8 + 16);
        assert_eq!(stats.sub_rows, 2 + 4);
        assert!(stats.peak_live_rows <= stats.cache_rows + stats.sub_rows);
    }

    #[test]
    fn shared_negatives_single_worker_is_bitwise_full_batch() {
        let p = params(8);
        let mut src = source(4, 2);
        let batch = assemble_batch(&mut src, &[0, 1, 2, 3], 2, 1).unwrap();
        let (l_full, g_full) = contrastive_loss(&p, &batch, 1.0).unwrap();
        let (l_sh, g_sh) =
            shared_negatives_loss_and_grads(&p, core::slice::from_ref(&batch), 1.0).unwrap();
        assert_eq!(l_full, l_sh);
        assert_eq!(g_full, g_sh);
    }

    #[test]
    fn shared_negatives_matches_concatenated_full_batch() {
        let p = params(9);
        let mut src = source(4, 2);
        let full = assemble_batch(&mut src, &[0, 1, 2, 3], 2, 1).unwrap();
        let w0 = assemble_batch(&mut src, &[0, 1], 2, 1).unwrap();
        let w1 = assemble_batch(&mut src, &[2, 3], 2, 1).unwrap();
        let (l_full, g_full) = contrastive_loss(&p, &full, 1.0).unwrap();
        let (l_sh, g_sh) = shared_negatives_loss_and_grads(&p, &[w0, w1], 1.0).unwrap();
        assert!((l_full - l_sh).abs() < 1e-12, "{l_full} vs {l_sh}");
        for (a, b) in g_full.tensors().iter().zip(g_sh.tensors()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert!((x - y).abs() / (x.abs() + 1e-12) < 1e-9);
            }
        }
    }

    #[test]
    fn permuting_worker_order_keeps_loss() {
        let p = params(10);
        let mut src = source(4, 2);
        let w0 = assemble_batch(&mut src, &[0, 1], 2, 1).unwrap();
        let w1 = assemble_batch(&mut src, &[2, 3], 2, 1).unwrap();
        let (l_a, _) = shared_negatives_loss_and_grads(&p, &[w0.clone(), w1.clone()], 1.0).unwrap();
        let (l_b, _) = shared_negatives_loss_and_grads(&p, &[w1, w0], 1.0).unwrap();
        assert!((l_a - l_b).abs() < 1e-12);
    }

    #[test]
    fn mismatched_worker_shapes_rejected() {
        let p = params(11);
        let mut src = source(4, 2);
        let w0 = assemble_batch(&mut src, &[0, 1], 2, 1).unwrap();
        let w1 = assemble_batch(&mut src, &[2], 2, 1).unwrap();
        assert!(shared_negatives_loss_and_grads(&p, &[w0, w1], 1.0).is_err());
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad = |f: fn(&mut TrainConfig)| {
            let mut c = TrainConfig::default();
            f(&mut c);
            c.validate().is_err()
        };
        assert!(bad(|c| c.batch_size = 0));
        assert!(bad(|c| c.n_passages = 0));
        assert!(bad(|c| {
            c.grad_cache = true;
            c.sub_batch_size = 3;
        }));
        assert!(bad(|c| c.num_workers = 3));
        assert!(bad(|c| {
            c.num_workers = 2;
            c.grad_cache = true;
        }));
        assert!(TrainConfig::default().validate().is_ok());
    }

    #[test]
    fn epoch_means_shape() {
        let log = alloc::vec![
            LossEntry { epoch: 0, step: 0, loss: 2.0 },
            LossEntry { epoch: 0, step: 1, loss: 4.0 },
            LossEntry { epoch: 1, step: 0, loss: 1.0 },
        ];
        assert_eq!(epoch_means(&log), alloc::vec![3.0, 1.0]);
    }
}
