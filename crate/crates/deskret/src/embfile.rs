//! Embedding shard files.
//!
//! Layout, little-endian: magic "DKEMB001" | u32 d_out | u64 rows |
//! ids block (u32 length + UTF-8, one per row) | f32 matrix row-major.
//! Round trips are bit-exact on the stored f32 values.

use std::io::{BufWriter, Read, Write};
use std::path::Path;

use deskret_core::embed::EmbeddingShard;

use crate::error::{create_file, open_file, Error, Result};

pub const EMB_MAGIC: &[u8; 8] = b"DKEMB001";

pub fn write_shard(shard: &EmbeddingShard, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(create_file(path)?);
    out.write_all(EMB_MAGIC)?;
    out.write_all(&(shard.d_out as u32).to_le_bytes())?;
    out.write_all(&(shard.rows() as u64).to_le_bytes())?;
    for id in &shard.ids {
        out.write_all(&(id.len() as u32).to_le_bytes())?;
        out.write_all(id.as_bytes())?;
    }
    for &v in &shard.matrix {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_shard(path: &Path) -> Result<EmbeddingShard> {
    let mut file = open_file(path)?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes)?;
    if bytes.len() < 8 + 4 + 8 {
        return Err(Error::Format("file shorter than shard header".into()));
    }
    if &bytes[0..8] != EMB_MAGIC {
        return Err(Error::Format("bad shard magic".into()));
    }
    let d_out = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let rows = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    let mut pos = 20usize;
    let mut ids = Vec::with_capacity(rows);
    for _ in 0..rows {
        if pos + 4 > bytes.len() {
            return Err(Error::Format("ids block truncated".into()));
        }
        let len = u32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap()) as usize;
        pos += 4;
        if pos + len > bytes.len() {
            return Err(Error::Format("ids block truncated".into()));
        }
        let id = String::from_utf8(bytes[pos..pos + len].to_vec())
            .map_err(|_| Error::Format("invalid UTF-8 in shard id".into()))?;
        pos += len;
        ids.push(id);
    }
    let want = rows
        .checked_mul(d_out)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Format("shard dimensions overflow".into()))?;
    if bytes.len() - pos != want {
        return Err(Error::Format(format!(
            "matrix block is {} bytes, expected {want}",
            bytes.len() - pos
        )));
    }
    let matrix: Vec<f32> = bytes[pos..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let shard = EmbeddingShard { d_out, ids, matrix };
    shard.validate()?;
    Ok(shard)
}
