//! Minimal filename globbing for shard arguments ("corpus_emb_*.shard"):
//! `*` and `?` wildcards in the final path component only, results sorted
//! by file name so multi-shard loads are order-deterministic.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Match `name` against `pat` where `*` spans any run (possibly empty) and
/// `?` exactly one character.
pub fn matches(pat: &str, name: &str) -> bool {
    let p: Vec<char> = pat.chars().collect();
    let n: Vec<char> = name.chars().collect();
    let (mut pi, mut ni) = (0usize, 0usize);
    let (mut star, mut star_ni) = (None::<usize>, 0usize);
    while ni < n.len() {
        if pi < p.len() && (p[pi] == '?' || p[pi] == n[ni]) {
            pi += 1;
            ni += 1;
        } else if pi < p.len() && p[pi] == '*' {
            star = Some(pi);
            star_ni = ni;
            pi += 1;
        } else if let Some(s) = star {
            // Backtrack: let the last `*` swallow one more character.
            pi = s + 1;
            star_ni += 1;
            ni = star_ni;
        } else {
            return false;
        }
    }
    while pi < p.len() && p[pi] == '*' {
        pi += 1;
    }
    pi == p.len()
}

/// Expand a pattern to matching paths. Without wildcards the path itself is
/// returned (it must exist); with wildcards, matches are sorted by name.
pub fn expand(pattern: &str) -> Result<Vec<PathBuf>> {
    let path = Path::new(pattern);
    let base = path
        .file_name()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::Format(format!("bad pattern {pattern:?}")))?;
    if !base.contains(['*', '?']) {
        if !path.exists() {
            return Err(Error::Format(format!("no such file: {pattern}")));
        }
        return Ok(vec![path.to_path_buf()]);
    }
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut out: Vec<PathBuf> = Vec::new();
    for entry in std::fs::read_dir(&dir)? {
        let entry = entry?;
        if let Some(name) = entry.file_name().to_str() {
            if matches(base, name) {
                out.push(dir.join(name));
            }
        }
    }
    if out.is_empty() {
        return Err(Error::Format(format!("no files match pattern {pattern:?}")));
    }
    out.sort();
    Ok(out)
}
