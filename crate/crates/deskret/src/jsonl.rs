//! JSONL readers/writers for the raw input templates. Every parse or
//! validation failure is reported with its 1-based line number; unknown
//! fields are ignored; record order is preserved.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use deskret_core::data::{RawCorpusRecord, RawQueryRecord, RawTrainRecord, Schema};

use crate::error::{create_file, open_file, Error, Result};

fn read_records<T, F>(path: &Path, mut check: F) -> Result<Vec<T>>
where
    T: serde::de::DeserializeOwned,
    F: FnMut(&T) -> std::result::Result<(), String>,
{
    let display = path.display().to_string();
    let reader = BufReader::new(open_file(path)?);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: T = serde_json::from_str(&line).map_err(|e| Error::Line {
            path: display.clone(),
            line: lineno,
            message: e.to_string(),
        })?;
        check(&rec).map_err(|message| Error::Line {
            path: display.clone(),
            line: lineno,
            message,
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn read_train_records(path: &Path, schema: Schema) -> Result<Vec<RawTrainRecord>> {
    read_records(path, |rec: &RawTrainRecord| {
        rec.validate(schema).map_err(|e| e.to_string())
    })
}

pub fn read_corpus_records(path: &Path) -> Result<Vec<RawCorpusRecord>> {
    read_records(path, |rec: &RawCorpusRecord| {
        if rec.docid.is_empty() {
            return Err("empty docid".into());
        }
        if rec.text.is_empty() {
            return Err(format!("passage {:?} has empty text", rec.docid));
        }
        Ok(())
    })
}

pub fn read_query_records(path: &Path) -> Result<Vec<RawQueryRecord>> {
    read_records(path, |rec: &RawQueryRecord| {
        if rec.query_id.is_empty() {
            return Err("empty query_id".into());
        }
        if rec.query.is_empty() {
            return Err(format!("query {:?} has empty text", rec.query_id));
        }
        Ok(())
    })
}

pub fn write_train_records(records: &[RawTrainRecord], path: &Path) -> Result<()> {
    let mut out = BufWriter::new(create_file(path)?);
    for rec in records {
        let line = serde_json::to_string(rec)
            .map_err(|e| Error::Format(format!("serializing record: {e}")))?;
        out.write_all(line.as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}
