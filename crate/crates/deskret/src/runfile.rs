//! Ranking run files: one line per hit, `query_id passage_id score`, score
//! printed with 6 decimal places, queries in input order, hits in rank
//! order. Ids must be whitespace-free (ours are); the parser enforces the
//! three-field shape and the per-query rank invariants with line numbers.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use deskret_core::index::Hit;
use deskret_core::metrics::Run;

use crate::error::{create_file, open_file, Error, Result};

pub fn write_run(run: &Run, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(create_file(path)?);
    for (qid, hits) in run {
        for hit in hits {
            writeln!(out, "{qid} {} {:.6}", hit.docid, hit.score)?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_run(path: &Path) -> Result<Run> {
    let display = path.display().to_string();
    let line_err = |line: usize, message: String| Error::Line {
        path: display.clone(),
        line,
        message,
    };
    let reader = BufReader::new(open_file(path)?);
    let mut run: Run = Vec::new();
    let mut finished: std::collections::BTreeSet<String> = std::collections::BTreeSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [qid, docid, score_s] = fields.as_slice() else {
            return Err(line_err(
                lineno,
                format!("expected `query_id passage_id score`, got {} fields", fields.len()),
            ));
        };
        let score: f64 = score_s
            .parse()
            .map_err(|_| line_err(lineno, format!("bad score {score_s:?}")))?;
        if !score.is_finite() {
            return Err(line_err(lineno, format!("non-finite score {score_s:?}")));
        }
        let hit = Hit { docid: (*docid).to_string(), score };
        match run.last_mut() {
            Some((current, hits)) if current == qid => {
                if score > hits.last().expect("nonempty").score {
                    return Err(line_err(
                        lineno,
                        format!("scores increase within query {qid:?}"),
                    ));
                }
                if hits.iter().any(|h| h.docid == hit.docid) {
                    return Err(line_err(
                        lineno,
                        format!("duplicate docid {docid:?} for query {qid:?}"),
                    ));
                }
                hits.push(hit);
            }
            _ => {
                if !finished.insert((*qid).to_string()) {
                    return Err(line_err(
                        lineno,
                        format!("query {qid:?} appears in two separate blocks"),
                    ));
                }
                run.push(((*qid).to_string(), vec![hit]));
            }
        }
    }
    Ok(run)
}
