//! Offset-indexed tokenized record store with memory-mapped random access.
//!
//! Layout, all little-endian:
//!   magic "DKSTORE1" | u32 version | u64 record_count | u32 vocab_size
//!   u64 × record_count    absolute byte offset of each record
//!   records               u32 length prefix + tagged body, back to back
//!
//! Record bodies carry a kind tag (0 train, 1 corpus, 2 query); a store is
//! homogeneous. Strings are u32-length-prefixed UTF-8; token sequences are
//! a u32 count followed by u32 ids. A built store is immutable, so `get`
//! is safe under unlimited concurrent readers.

use std::collections::BTreeSet;
use std::io::{BufWriter, Write};
use std::path::Path;

use memmap2::Mmap;

use deskret_core::data::{CorpusRecord, QueryRecord, TrainExample};
use deskret_core::trainer::ExampleSource;
use deskret_core::CoreError;

use crate::error::{create_file, open_file, Error, Result};

pub const STORE_MAGIC: &[u8; 8] = b"DKSTORE1";
pub const STORE_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 8 + 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StoreKind {
    Train,
    Corpus,
    Query,
}

impl StoreKind {
    fn tag(self) -> u8 {
        match self {
            StoreKind::Train => 0,
            StoreKind::Corpus => 1,
            StoreKind::Query => 2,
        }
    }

    fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(StoreKind::Train),
            1 => Ok(StoreKind::Corpus),
            2 => Ok(StoreKind::Query),
            other => Err(Error::Format(format!("unknown record tag {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StoreRecord {
    Train(TrainExample),
    Corpus(CorpusRecord),
    Query(QueryRecord),
}

impl StoreRecord {
    pub fn kind(&self) -> StoreKind {
        match self {
            StoreRecord::Train(_) => StoreKind::Train,
            StoreRecord::Corpus(_) => StoreKind::Corpus,
            StoreRecord::Query(_) => StoreKind::Query,
        }
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

fn put_tokens(out: &mut Vec<u8>, ids: &[u32], vocab_size: u32) -> Result<()> {
    out.extend_from_slice(&(ids.len() as u32).to_le_bytes());
    for &id in ids {
        if id >= vocab_size {
            return Err(Error::Core(CoreError::TokenOutOfRange { id, vocab_size }));
        }
        out.extend_from_slice(&id.to_le_bytes());
    }
    Ok(())
}

fn encode_record(rec: &StoreRecord, vocab_size: u32) -> Result<Vec<u8>> {
    let mut body = vec![rec.kind().tag()];
    match rec {
        StoreRecord::Train(ex) => {
            put_tokens(&mut body, &ex.query, vocab_size)?;
            for group in [&ex.positives, &ex.negatives] {
                body.extend_from_slice(&(group.len() as u32).to_le_bytes());
                for (docid, tokens) in group.iter() {
                    put_str(&mut body, docid);
                    put_tokens(&mut body, tokens, vocab_size)?;
                }
            }
        }
        StoreRecord::Corpus(c) => {
            put_str(&mut body, &c.docid);
            put_tokens(&mut body, &c.tokens, vocab_size)?;
            put_str(&mut body, &c.raw_text);
        }
        StoreRecord::Query(q) => {
            put_str(&mut body, &q.query_id);
            put_tokens(&mut body, &q.tokens, vocab_size)?;
        }
    }
    Ok(body)
}

/// Serialize records to `path`. Records must be homogeneous; corpus docids
/// must be unique.
pub fn write_store<I>(records: I, vocab_size: u32, path: &Path) -> Result<()>
where
    I: IntoIterator<Item = StoreRecord>,
{
    let mut bodies: Vec<Vec<u8>> = Vec::new();
    let mut kind: Option<StoreKind> = None;
    let mut seen_docids: BTreeSet<String> = BTreeSet::new();
    for rec in records {
        match kind {
            None => kind = Some(rec.kind()),
            Some(k) if k == rec.kind() => {}
            Some(k) => {
                return Err(Error::Format(format!(
                    "mixed record kinds in one store: {:?} then {:?}",
                    k,
                    rec.kind()
                )))
            }
        }
        if let StoreRecord::Corpus(c) = &rec {
            if !seen_docids.insert(c.docid.clone()) {
                return Err(Error::Core(CoreError::DuplicateDocid(c.docid.clone())));
            }
        }
        bodies.push(encode_record(&rec, vocab_size)?);
    }

    let mut out = BufWriter::new(create_file(path)?);
    out.write_all(STORE_MAGIC)?;
    out.write_all(&STORE_VERSION.to_le_bytes())?;
    out.write_all(&(bodies.len() as u64).to_le_bytes())?;
    out.write_all(&vocab_size.to_le_bytes())?;
    let mut offset = (HEADER_LEN + bodies.len() * 8) as u64;
    for body in &bodies {
        out.write_all(&offset.to_le_bytes())?;
        offset += 4 + body.len() as u64;
    }
    for body in &bodies {
        out.write_all(&(body.len() as u32).to_le_bytes())?;
        out.write_all(body)?;
    }
    out.flush()?;
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Format("record truncated".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| Error::Format("invalid UTF-8 in stored string".into()))
    }

    fn tokens(&mut self) -> Result<Vec<u32>> {
        let count = self.u32()? as usize;
        let raw = self.take(count * 4)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn done(&self) -> bool {
        self.pos == self.buf.len()
    }
}

fn decode_record(body: &[u8]) -> Result<StoreRecord> {
    let mut r = Reader { buf: body, pos: 0 };
    let kind = StoreKind::from_tag(r.u8()?)?;
    let rec = match kind {
        StoreKind::Train => {
            let query = r.tokens()?;
            let mut groups = [Vec::new(), Vec::new()];
            for group in groups.iter_mut() {
                let count = r.u32()? as usize;
                for _ in 0..count {
                    let docid = r.string()?;
                    let tokens = r.tokens()?;
                    group.push((docid, tokens));
                }
            }
            let [positives, negatives] = groups;
            StoreRecord::Train(TrainExample { query, positives, negatives })
        }
        StoreKind::Corpus => {
            let docid = r.string()?;
            let tokens = r.tokens()?;
            let raw_text = r.string()?;
            StoreRecord::Corpus(CorpusRecord { docid, tokens, raw_text })
        }
        StoreKind::Query => {
            let query_id = r.string()?;
            let tokens = r.tokens()?;
            StoreRecord::Query(QueryRecord { query_id, tokens })
        }
    };
    if !r.done() {
        return Err(Error::Format("trailing bytes in record".into()));
    }
    Ok(rec)
}

/// Read-only memory-mapped store.
pub struct TokenStore {
    mmap: Mmap,
    record_count: usize,
    vocab_size: u32,
}

impl TokenStore {
    pub fn open(path: &Path) -> Result<Self> {
        let file = open_file(path)?;
        // Safety: the store contract makes built files immutable.
        let mmap = unsafe { Mmap::map(&file)? };
        if mmap.len() < HEADER_LEN {
            return Err(Error::Format("file shorter than store header".into()));
        }
        if &mmap[0..8] != STORE_MAGIC {
            return Err(Error::Format("bad store magic".into()));
        }
        let version = u32::from_le_bytes(mmap[8..12].try_into().unwrap());
        if version != STORE_VERSION {
            return Err(Error::Format(format!("unsupported store version {version}")));
        }
        let record_count = u64::from_le_bytes(mmap[12..20].try_into().unwrap()) as usize;
        let vocab_size = u32::from_le_bytes(mmap[20..24].try_into().unwrap());
        let payload_start = HEADER_LEN
            .checked_add(record_count.checked_mul(8).ok_or_else(|| {
                Error::Format("record count overflows offset table".into())
            })?)
            .ok_or_else(|| Error::Format("record count overflows offset table".into()))?;
        if mmap.len() < payload_start {
            return Err(Error::Format("offset table truncated".into()));
        }
        let store = TokenStore { mmap, record_count, vocab_size };
        // Validate the whole offset table up front: strictly increasing,
        // in bounds, and consistent with each record's length prefix.
        let mut prev_end = payload_start as u64;
        for i in 0..record_count {
            let off = store.offset(i);
            if off != prev_end {
                return Err(Error::Format(format!(
                    "offset {i} is {off}, expected {prev_end}"
                )));
            }
            let len = store.record_len(off)? as u64;
            prev_end = off + 4 + len;
        }
        if prev_end != store.mmap.len() as u64 {
            return Err(Error::Format("payload length mismatch".into()));
        }
        Ok(store)
    }

    fn offset(&self, i: usize) -> u64 {
        let at = HEADER_LEN + i * 8;
        u64::from_le_bytes(self.mmap[at..at + 8].try_into().unwrap())
    }

    fn record_len(&self, off: u64) -> Result<u32> {
        let off = off as usize;
        if off + 4 > self.mmap.len() {
            return Err(Error::Format("record offset out of bounds".into()));
        }
        let len = u32::from_le_bytes(self.mmap[off..off + 4].try_into().unwrap());
        if off + 4 + len as usize > self.mmap.len() {
            return Err(Error::Format("record extends past end of file".into()));
        }
        Ok(len)
    }

    pub fn len(&self) -> usize {
        self.record_count
    }

    pub fn is_empty(&self) -> bool {
        self.record_count == 0
    }

    pub fn vocab_size(&self) -> u32 {
        self.vocab_size
    }

    /// Decode record `i`, touching only that record's bytes.
    pub fn get(&self, i: usize) -> Result<StoreRecord> {
        if i >= self.record_count {
            return Err(Error::Core(CoreError::IndexOutOfRange {
                index: i,
                len: self.record_count,
            }));
        }
        let off = self.offset(i);
        let len = self.record_len(off)? as usize;
        let start = off as usize + 4;
        decode_record(&self.mmap[start..start + len])
    }

    /// Kind of the records in this store; None when empty.
    pub fn kind(&self) -> Result<Option<StoreKind>> {
        if self.record_count == 0 {
            return Ok(None);
        }
        Ok(Some(self.get(0)?.kind()))
    }

    pub fn iter(&self) -> impl Iterator<Item = Result<StoreRecord>> + '_ {
        (0..self.record_count).map(move |i| self.get(i))
    }

    /// Decode every record, requiring the given kind.
    pub fn decode_all_corpus(&self) -> Result<Vec<CorpusRecord>> {
        self.iter()
            .map(|r| match r? {
                StoreRecord::Corpus(c) => Ok(c),
                other => Err(Error::Format(format!(
                    "expected corpus records, found {:?}",
                    other.kind()
                ))),
            })
            .collect()
    }

    pub fn decode_all_queries(&self) -> Result<Vec<QueryRecord>> {
        self.iter()
            .map(|r| match r? {
                StoreRecord::Query(q) => Ok(q),
                other => Err(Error::Format(format!(
                    "expected query records, found {:?}",
                    other.kind()
                ))),
            })
            .collect()
    }
}

/// Train-store adapter for the trainer: decodes examples straight off the
/// map on every fetch.
pub struct StoreSource<'a> {
    store: &'a TokenStore,
}

impl<'a> StoreSource<'a> {
    pub fn new(store: &'a TokenStore) -> Self {
        StoreSource { store }
    }
}

/// Decode record `index` as a training example, mapping store errors into
/// core errors so `ExampleSource` implementations stay interchangeable.
pub fn fetch_train(store: &TokenStore, index: usize) -> std::result::Result<TrainExample, CoreError> {
    match store.get(index) {
        Ok(StoreRecord::Train(ex)) => Ok(ex),
        Ok(other) => Err(CoreError::Invalid(format!(
            "record {index} is a {:?} record, not a training example",
            other.kind()
        ))),
        Err(Error::Core(e)) => Err(e),
        Err(e) => Err(CoreError::Invalid(e.to_string())),
    }
}

impl ExampleSource for StoreSource<'_> {
    fn len(&self) -> usize {
        self.store.len()
    }

    fn fetch(&mut self, index: usize) -> std::result::Result<TrainExample, CoreError> {
        fetch_train(self.store, index)
    }
}
