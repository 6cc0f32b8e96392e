//! Deterministic hashing tokenizer.
//!
//! Normalization lowercases and splits on non-alphanumeric characters; each
//! surviving word is hashed (FNV-1a, 64-bit) into a fixed vocabulary.  Ids
//! 0..=2 are reserved (PAD, UNK, SEP), so hashed words land in
//! `RESERVED..vocab_size`.  The tokenizer is a pure function of
//! `(text, config)` and never fails; empty input yields `[UNK]`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const SEP_ID: u32 = 2;
const RESERVED: u32 = 3;

pub const DEFAULT_VOCAB_SIZE: u32 = 30_000;
pub const DEFAULT_QUERY_MAX_LEN: usize = 32;
pub const DEFAULT_PASSAGE_MAX_LEN: usize = 156;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenizerConfig {
    pub vocab_size: u32,
    pub max_len: usize,
}

impl TokenizerConfig {
    pub fn query_default() -> Self {
        TokenizerConfig {
            vocab_size: DEFAULT_VOCAB_SIZE,
            max_len: DEFAULT_QUERY_MAX_LEN,
        }
    }

    pub fn passage_default() -> Self {
        TokenizerConfig {
            vocab_size: DEFAULT_VOCAB_SIZE,
            max_len: DEFAULT_PASSAGE_MAX_LEN,
        }
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

fn word_id(word: &str, vocab_size: u32) -> u32 {
    debug_assert!(vocab_size > RESERVED);
    let slots = u64::from(vocab_size - RESERVED);
    RESERVED + (fnv1a(word.as_bytes()) % slots) as u32
}

/// Lowercased alphanumeric words of `text`, in order. Splitting happens on
/// every non-alphanumeric character, so punctuation never reaches the hash.
fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| w.to_lowercase())
}

/// Token ids of the normalized words, without the empty-input rule or
/// truncation applied. Building block for `tokenize` and `tokenize_passage`.
fn raw_ids(text: &str, vocab_size: u32) -> Vec<u32> {
    words(text).map(|w| word_id(&w, vocab_size)).collect()
}

/// Tokenize one field. Empty (after normalization) input yields `[UNK]`;
/// output length is clamped to `cfg.max_len`.
pub fn tokenize(text: &str, cfg: TokenizerConfig) -> Vec<u32> {
    let mut ids = raw_ids(text, cfg.vocab_size);
    if ids.is_empty() {
        ids = vec![UNK_ID];
    }
    ids.truncate(cfg.max_len);
    ids
}

/// Tokenize a passage as `title SEP text`. A title with no surviving words
/// contributes nothing (no leading SEP); an entirely empty passage yields
/// `[UNK]`. Truncation applies to the joined sequence.
pub fn tokenize_passage(title: &str, text: &str, cfg: TokenizerConfig) -> Vec<u32> {
    let mut ids = raw_ids(title, cfg.vocab_size);
    if !ids.is_empty() {
        ids.push(SEP_ID);
    }
    ids.extend(raw_ids(text, cfg.vocab_size));
    if ids.is_empty() {
        ids = vec![UNK_ID];
    }
    ids.truncate(cfg.max_len);
    ids
}

/// Display text of a passage: `title` and `text` joined by one space, or
/// just `text` when the title is empty. Used for answer matching in QA
/// evaluation, where the raw passage string must survive alongside tokens.
pub fn passage_raw_text(title: &str, text: &str) -> String {
    if title.is_empty() {
        String::from(text)
    } else {
        let mut s = String::with_capacity(title.len() + 1 + text.len());
        s.push_str(title);
        s.push(' ');
        s.push_str(text);
        s
    }
}
