//! Bi-encoder parameters and the forward/backward encoder pass.
//!
//! The encoder is deliberately small and closed-form: embedding lookup,
//! pooling (mean or first token), then an affine projection.  Similarity is
//! the raw inner product of the two output vectors — outputs are never
//! L2-normalized.  `encode` is the extension point for richer encoders.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::mat::{dot, Mat};
use crate::rng::{stream_rng, Stream};
use crate::{CoreError, Result};

/// Whether query and passage sides share one embedding table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Mode {
    /// One table serves both sides; a gradient step moves both identically.
    Tied,
    /// Independent query and passage tables.
    Dual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Pooler {
    Mean,
    FirstToken,
}

/// Which tower a sequence is encoded with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Query,
    Passage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct EncoderConfig {
    pub mode: Mode,
    pub pooler: Pooler,
    pub vocab_size: u32,
    pub d_embed: usize,
    pub d_out: usize,
}

pub const DEFAULT_D_EMBED: usize = 64;
pub const DEFAULT_D_OUT: usize = 64;

impl EncoderConfig {
    pub fn default_with(mode: Mode, vocab_size: u32) -> Self {
        EncoderConfig {
            mode,
            pooler: Pooler::Mean,
            vocab_size,
            d_embed: DEFAULT_D_EMBED,
            d_out: DEFAULT_D_OUT,
        }
    }
}

/// All trainable tensors. In tied mode `embed_p` is `None` and `embed_q`
/// serves both sides, so sharing is structural rather than kept in sync.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub cfg: EncoderConfig,
    pub embed_q: Mat,
    pub embed_p: Option<Mat>,
    pub proj: Mat,
    pub bias: Vec<f64>,
}

impl EncoderParams {
    /// Fresh parameters: embeddings uniform in ±0.5/d_embed, projection
    /// uniform in ±1/√d_embed, bias zero. Draw order (embed_q, embed_p,
    /// proj) is fixed so a given seed always produces the same model.
    pub fn init(cfg: EncoderConfig, seed: u64) -> Self {
        let mut rng = stream_rng(seed, Stream::ParamInit);
        let embed_scale = 0.5 / cfg.d_embed as f64;
        let proj_scale = 1.0 / libm::sqrt(cfg.d_embed as f64);
        let mut uniform = |scale: f64| (rng.gen::<f64>() * 2.0 - 1.0) * scale;
        let vocab = cfg.vocab_size as usize;
        let embed_q = Mat::from_fn(vocab, cfg.d_embed, |_, _| uniform(embed_scale));
        let embed_p = match cfg.mode {
            Mode::Tied => None,
            Mode::Dual => Some(Mat::from_fn(vocab, cfg.d_embed, |_, _| uniform(embed_scale))),
        };
        let proj = Mat::from_fn(cfg.d_embed, cfg.d_out, |_, _| uniform(proj_scale));
        EncoderParams {
            cfg,
            embed_q,
            embed_p,
            proj,
            bias: vec![0.0; cfg.d_out],
        }
    }

    pub fn embed_for(&self, side: Side) -> &Mat {
        match (side, &self.embed_p) {
            (Side::Passage, Some(p)) => p,
            _ => &self.embed_q,
        }
    }

    /// Trainable tensors in checkpoint/optimizer order.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut t = vec![self.embed_q.as_slice()];
        if let Some(p) = &self.embed_p {
            t.push(p.as_slice());
        }
        t.push(self.proj.as_slice());
        t.push(&self.bias);
        t
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = vec![self.embed_q.as_mut_slice()];
        if let Some(p) = &mut self.embed_p {
            t.push(p.as_mut_slice());
        }
        t.push(self.proj.as_mut_slice());
        t.push(&mut self.bias);
        t
    }

    pub fn assert_finite(&self) -> Result<()> {
        for t in self.tensors() {
            if t.iter().any(|v| !v.is_finite()) {
                return Err(CoreError::Invalid("non-finite parameter value".into()));
            }
        }
        Ok(())
    }
}

/// Gradient accumulator shaped like `EncoderParams`. Tied mode has a single
/// embedding gradient receiving both sides' contributions.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub embed_q: Mat,
    pub embed_p: Option<Mat>,
    pub proj: Mat,
    pub bias: Vec<f64>,
}

impl Grads {
    pub fn zeros_like(params: &EncoderParams) -> Self {
        let cfg = params.cfg;
        Grads {
            embed_q: Mat::zeros(cfg.vocab_size as usize, cfg.d_embed),
            embed_p: params
                .embed_p
                .as_ref()
                .map(|_| Mat::zeros(cfg.vocab_size as usize, cfg.d_embed)),
            proj: Mat::zeros(cfg.d_embed, cfg.d_out),
            bias: vec![0.0; cfg.d_out],
        }
    }

    fn embed_for_mut(&mut self, side: Side) -> &mut Mat {
        match (side, &mut self.embed_p) {
            (Side::Passage, Some(p)) => p,
            _ => &mut self.embed_q,
        }
    }

    /// Tensors in the same order as `EncoderParams::tensors`.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut t = vec![self.embed_q.as_slice()];
        if let Some(p) = &self.embed_p {
            t.push(p.as_slice());
        }
        t.push(self.proj.as_slice());
        t.push(&self.bias);
        t
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = vec![self.embed_q.as_mut_slice()];
        if let Some(p) = &mut self.embed_p {
            t.push(p.as_mut_slice());
        }
        t.push(self.proj.as_mut_slice());
        t.push(&mut self.bias);
        t
    }

    /// `self += other`, elementwise. Shapes must match.
    pub fn add_assign(&mut self, other: &Grads) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            debug_assert_eq!(a.len(), b.len());
            for (x, y) in a.iter_mut().zip(b.iter()) {
                *x += *y;
            }
        }
    }

    pub fn scale(&mut self, k: f64) {
        for t in self.tensors_mut() {
            for x in t.iter_mut() {
                *x *= k;
            }
        }
    }
}

fn check_ids(seq: &[u32], vocab_size: u32) -> Result<()> {
    for &id in seq {
        if id >= vocab_size {
            return Err(CoreError::TokenOutOfRange { id, vocab_size });
        }
    }
    if seq.is_empty() {
        return Err(CoreError::Invalid("empty token sequence".into()));
    }
    Ok(())
}

fn pooled(params: &EncoderParams, seq: &[u32], side: Side) -> Vec<f64> {
    let table = params.embed_for(side);
    let d = params.cfg.d_embed;
    let mut acc = vec![0.0; d];
    match params.cfg.pooler {
        Pooler::FirstToken => {
            acc.copy_from_slice(table.row(seq[0] as usize));
        }
        Pooler::Mean => {
            for &id in seq {
                for (a, v) in acc.iter_mut().zip(table.row(id as usize)) {
                    *a += *v;
                }
            }
            let inv = 1.0 / seq.len() as f64;
            for a in acc.iter_mut() {
                *a *= inv;
            }
        }
    }
    acc
}

/// Forward pass: pooled token embeddings through the affine projection.
pub fn encode(params: &EncoderParams, seq: &[u32], side: Side) -> Result<Vec<f64>> {
    check_ids(seq, params.cfg.vocab_size)?;
    let h = pooled(params, seq, side);
    let mut out = params.bias.clone();
    for (k, &hk) in h.iter().enumerate() {
        let prow = params.proj.row(k);
        for (o, &w) in out.iter_mut().zip(prow) {
            *o += hk * w;
        }
    }
    Ok(out)
}

/// Backward pass companion to `encode`: given ∂loss/∂output for one encoded
/// sequence, accumulate parameter gradients into `grads`.
pub fn encode_backward(
    params: &EncoderParams,
    seq: &[u32],
    side: Side,
    d_out: &[f64],
    grads: &mut Grads,
) -> Result<()> {
    check_ids(seq, params.cfg.vocab_size)?;
    debug_assert_eq!(d_out.len(), params.cfg.d_out);
    let h = pooled(params, seq, side);

    for (gb, g) in grads.bias.iter_mut().zip(d_out) {
        *gb += *g;
    }
    let mut d_h = vec![0.0; params.cfg.d_embed];
    for (k, &hk) in h.iter().enumerate() {
        let prow = params.proj.row(k);
        let grow = grads.proj.row_mut(k);
        let mut acc = 0.0;
        for ((gp, &w), &g) in grow.iter_mut().zip(prow).zip(d_out) {
            *gp += hk * g;
            acc += w * g;
        }
        d_h[k] = acc;
    }

    let table = grads.embed_for_mut(side);
    match params.cfg.pooler {
        Pooler::FirstToken => {
            for (g, &dh) in table.row_mut(seq[0] as usize).iter_mut().zip(&d_h) {
                *g += dh;
            }
        }
        Pooler::Mean => {
            let inv = 1.0 / seq.len() as f64;
            for &id in seq {
                for (g, &dh) in table.row_mut(id as usize).iter_mut().zip(&d_h) {
                    *g += dh * inv;
                }
            }
        }
    }
    Ok(())
}

/// Inner-product similarity of two embeddings.
pub fn score(q: &[f64], p: &[f64]) -> Result<f64> {
    if q.len() != p.len() {
        return Err(CoreError::DimMismatch {
            left: q.len(),
            right: p.len(),
        });
    }
    Ok(dot(q, p))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg(mode: Mode, pooler: Pooler) -> EncoderConfig {
        EncoderConfig {
            mode,
            pooler,
            vocab_size: 11,
            d_embed: 4,
            d_out: 3,
        }
    }

    #[test]
    fn zero_embeddings_encode_to_bias() {
        let mut p = EncoderParams::init(small_cfg(Mode::Tied, Pooler::Mean), 1);
        p.embed_q.fill(0.0);
        p.bias = alloc::vec![0.5, -1.0, 2.0];
        let out = encode(&p, &[1, 4, 9], Side::Query).unwrap();
        assert_eq!(out, alloc::vec![0.5, -1.0, 2.0]);
    }

    #[test]
    fn mean_pooling_ignores_repetition_of_one_token() {
        let p = EncoderParams::init(small_cfg(Mode::Tied, Pooler::Mean), 2);
        let a = encode(&p, &[7], Side::Query).unwrap();
        let b = encode(&p, &[7, 7], Side::Query).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn first_token_pooling_ignores_tail() {
        let p = EncoderParams::init(small_cfg(Mode::Dual, Pooler::FirstToken), 3);
        let a = encode(&p, &[5, 1, 2], Side::Passage).unwrap();
        let b = encode(&p, &[5, 9], Side::Passage).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tied_mode_encodes_both_sides_identically() {
        let p = EncoderParams::init(small_cfg(Mode::Tied, Pooler::Mean), 4);
        let q = encode(&p, &[2, 3], Side::Query).unwrap();
        let d = encode(&p, &[2, 3], Side::Passage).unwrap();
        assert_eq!(q, d);
    }

    #[test]
    fn dual_mode_sides_differ() {
        let p = EncoderParams::init(small_cfg(Mode::Dual, Pooler::Mean), 5);
        let q = encode(&p, &[2, 3], Side::Query).unwrap();
        let d = encode(&p, &[2, 3], Side::Passage).unwrap();
        assert_ne!(q, d);
    }

    #[test]
    fn out_of_vocab_id_is_an_error() {
        let p = EncoderParams::init(small_cfg(Mode::Tied, Pooler::Mean), 6);
        assert!(matches!(
            encode(&p, &[11], Side::Query),
            Err(CoreError::TokenOutOfRange { id: 11, vocab_size: 11 })
        ));
    }

    // Straight-line recomputation with independently written loops; guards
    // the layout conventions (row-major proj, mean divisor, bias add).
    #[test]
    fn encode_matches_straight_line_recomputation() {
        let p = EncoderParams::init(small_cfg(Mode::Dual, Pooler::Mean), 7);
        let seq = [3u32, 3, 8, 0];
        let got = encode(&p, &seq, Side::Passage).unwrap();

        let table = p.embed_p.as_ref().unwrap();
        let mut expect = alloc::vec![0.0; p.cfg.d_out];
        for (j, slot) in expect.iter_mut().enumerate() {
            let mut h_dot_w = 0.0;
            for k in 0..p.cfg.d_embed {
                let mut mean_k = 0.0;
                for &id in &seq {
                    mean_k += table.at(id as usize, k);
                }
                mean_k /= seq.len() as f64;
                h_dot_w += mean_k * p.proj.at(k, j);
            }
            *slot = p.bias[j] + h_dot_w;
        }
        for (g, e) in got.iter().zip(&expect) {
            assert!((g - e).abs() < 1e-12, "got {g} expect {e}");
        }
    }

    #[test]
    fn score_examples() {
        assert_eq!(score(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(score(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), 11.0);
        let q = [0.3, -1.2, 4.0];
        let p = [2.0, 0.5, -0.25];
        assert_eq!(score(&q, &p).unwrap(), score(&p, &q).unwrap());
        assert!(score(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn init_is_seed_deterministic() {
        let a = EncoderParams::init(small_cfg(Mode::Dual, Pooler::Mean), 42);
        let b = EncoderParams::init(small_cfg(Mode::Dual, Pooler::Mean), 42);
        let c = EncoderParams::init(small_cfg(Mode::Dual, Pooler::Mean), 43);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn init_ranges_and_zero_bias() {
        let cfg = small_cfg(Mode::Tied, Pooler::Mean);
        let p = EncoderParams::init(cfg, 9);
        let eb = 0.5 / cfg.d_embed as f64;
        assert!(p.embed_q.iter().all(|v| v.abs() <= eb));
        let pb = 1.0 / libm::sqrt(cfg.d_embed as f64);
        assert!(p.proj.iter().all(|v| v.abs() <= pb));
        assert!(p.bias.iter().all(|&v| v == 0.0));
    }
}
