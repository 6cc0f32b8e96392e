//! Encoder parameter checkpoints.
//!
//! Layout, little-endian: magic "DKMODEL1" | u8 mode (0 tied, 1 dual) |
//! u8 pooler (0 mean, 1 first-token) | u32 vocab_size | u64 d_embed |
//! u64 d_out | tensors as f64 row-major in parameter order (query table,
//! passage table when dual, projection, bias). Round trips are bit-exact.

use std::io::{BufWriter, Read, Write};
use std::path::Path;

use deskret_core::mat::Mat;
use deskret_core::model::{EncoderConfig, EncoderParams, Mode, Pooler};

use crate::error::{create_file, open_file, Error, Result};

pub const MODEL_MAGIC: &[u8; 8] = b"DKMODEL1";

fn mode_tag(mode: Mode) -> u8 {
    match mode {
        Mode::Tied => 0,
        Mode::Dual => 1,
    }
}

fn pooler_tag(pooler: Pooler) -> u8 {
    match pooler {
        Pooler::Mean => 0,
        Pooler::FirstToken => 1,
    }
}

pub fn save_checkpoint(params: &EncoderParams, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(create_file(path)?);
    out.write_all(MODEL_MAGIC)?;
    out.write_all(&[mode_tag(params.cfg.mode), pooler_tag(params.cfg.pooler)])?;
    out.write_all(&params.cfg.vocab_size.to_le_bytes())?;
    out.write_all(&(params.cfg.d_embed as u64).to_le_bytes())?;
    out.write_all(&(params.cfg.d_out as u64).to_le_bytes())?;
    for tensor in params.tensors() {
        for &v in tensor {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<EncoderParams> {
    let mut file = open_file(path)?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes)?;
    if bytes.len() < 8 + 2 + 4 + 8 + 8 {
        return Err(Error::Format("file shorter than checkpoint header".into()));
    }
    if &bytes[0..8] != MODEL_MAGIC {
        return Err(Error::Format("bad checkpoint magic".into()));
    }
    let mode = match bytes[8] {
        0 => Mode::Tied,
        1 => Mode::Dual,
        t => return Err(Error::Format(format!("unknown mode tag {t}"))),
    };
    let pooler = match bytes[9] {
        0 => Pooler::Mean,
        1 => Pooler::FirstToken,
        t => return Err(Error::Format(format!("unknown pooler tag {t}"))),
    };
    let vocab_size = u32::from_le_bytes(bytes[10..14].try_into().unwrap());
    let d_embed = u64::from_le_bytes(bytes[14..22].try_into().unwrap()) as usize;
    let d_out = u64::from_le_bytes(bytes[22..30].try_into().unwrap()) as usize;
    let cfg = EncoderConfig { mode, pooler, vocab_size, d_embed, d_out };

    let vocab = vocab_size as usize;
    let table_len = vocab * d_embed;
    let proj_len = d_embed * d_out;
    let tables = if mode == Mode::Dual { 2 } else { 1 };
    let expect_values = tables * table_len + proj_len + d_out;
    let payload = &bytes[30..];
    if payload.len() != expect_values * 8 {
        return Err(Error::Format(format!(
            "checkpoint payload is {} bytes, expected {}",
            payload.len(),
            expect_values * 8
        )));
    }
    let mut values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let mut take = |n: usize| -> Vec<f64> { values.by_ref().take(n).collect() };
    let embed_q = Mat::from_vec(vocab, d_embed, take(table_len));
    let embed_p = if mode == Mode::Dual {
        Some(Mat::from_vec(vocab, d_embed, take(table_len)))
    } else {
        None
    };
    let proj = Mat::from_vec(d_embed, d_out, take(proj_len));
    let bias = take(d_out);
    let params = EncoderParams { cfg, embed_q, embed_p, proj, bias };
    params.assert_finite()?;
    Ok(params)
}
