//! Retrieval metrics: top-k accuracy (IR docid membership or QA answer
//! matching), MRR@cutoff, and Recall@k.
//!
//! A "run" is the parsed ranking output: per query, hits in rank order.
//! Relevance comes from a qrel set — docid sets for IR, answer strings for
//! QA, where a passage is relevant when any normalized answer occurs as a
//! substring of its normalized text. Denominators always count the queries
//! in the run; a run query absent from the qrels is an error, not a zero.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::index::Hit;
use crate::{CoreError, Result};

/// Per-query relevance judgments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QrelSet {
    /// query_id → relevant docids.
    Ir(BTreeMap<String, BTreeSet<String>>),
    /// query_id → acceptable answer strings.
    Qa(BTreeMap<String, Vec<String>>),
}

impl QrelSet {
    pub fn is_qa(&self) -> bool {
        matches!(self, QrelSet::Qa(_))
    }

    pub fn len(&self) -> usize {
        match self {
            QrelSet::Ir(m) => m.len(),
            QrelSet::Qa(m) => m.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Ranked hits per query, in query input order.
pub type Run = Vec<(String, Vec<Hit>)>;

/// Check the run invariant: within each query, scores non-increasing.
pub fn validate_run(run: &Run) -> Result<()> {
    for (qid, hits) in run {
        for pair in hits.windows(2) {
            if pair[1].score > pair[0].score {
                return Err(CoreError::Invalid(alloc::format!(
                    "run for query {qid:?} has increasing scores"
                )));
            }
        }
    }
    Ok(())
}

/// Answer-match normalization: lowercase, punctuation to spaces, collapsed
/// whitespace. The QA relevance rule is `normalized answer occurs as a
/// substring of normalized passage text`; kept in one place on purpose.
pub fn normalize_answer(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut pending_space = false;
    for c in s.chars() {
        if c.is_alphanumeric() {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            for lc in c.to_lowercase() {
                out.push(lc);
            }
        } else {
            pending_space = true;
        }
    }
    out
}

/// Does `text` contain any of the answers, under the normalization rule?
/// Answers that normalize to nothing never match.
pub fn answer_matches(answers: &[String], text: &str) -> bool {
    let norm_text = normalize_answer(text);
    answers.iter().any(|a| {
        let norm = normalize_answer(a);
        !norm.is_empty() && norm_text.contains(norm.as_str())
    })
}

/// Raw passage text by docid, needed for QA relevance.
pub type CorpusTextMap = BTreeMap<String, String>;

fn relevance_checker<'a>(
    qrels: &'a QrelSet,
    corpus_text: Option<&'a CorpusTextMap>,
    qid: &str,
) -> Result<impl Fn(&Hit) -> Result<bool> + 'a> {
    enum Checker<'a> {
        Ir(&'a BTreeSet<String>),
        Qa(&'a [String], &'a CorpusTextMap),
    }
    let checker = match qrels {
        QrelSet::Ir(map) => Checker::Ir(
            map.get(qid)
                .ok_or_else(|| CoreError::MissingQrel(String::from(qid)))?,
        ),
        QrelSet::Qa(map) => {
            let answers = map
                .get(qid)
                .ok_or_else(|| CoreError::MissingQrel(String::from(qid)))?;
            let corpus = corpus_text.ok_or_else(|| {
                CoreError::Invalid("QA metrics need corpus text for answer matching".into())
            })?;
            Checker::Qa(answers, corpus)
        }
    };
    Ok(move |hit: &Hit| match &checker {
        Checker::Ir(docids) => Ok(docids.contains(&hit.docid)),
        Checker::Qa(answers, corpus) => {
            let text = corpus
                .get(&hit.docid)
                .ok_or_else(|| CoreError::MissingCorpusText(hit.docid.clone()))?;
            Ok(answer_matches(answers, text))
        }
    })
}

/// 1-based rank of the first relevant hit, if any.
fn first_relevant_rank(
    qrels: &QrelSet,
    corpus_text: Option<&CorpusTextMap>,
    qid: &str,
    hits: &[Hit],
) -> Result<Option<usize>> {
    let relevant = relevance_checker(qrels, corpus_text, qid)?;
    for (i, hit) in hits.iter().enumerate() {
        if relevant(hit)? {
            return Ok(Some(i + 1));
        }
    }
    Ok(None)
}

/// Fraction of queries whose top-k contains a relevant hit, for each k.
pub fn topk_accuracy(
    run: &Run,
    qrels: &QrelSet,
    corpus_text: Option<&CorpusTextMap>,
    ks: &[usize],
) -> Result<BTreeMap<usize, f64>> {
    if run.is_empty() {
        return Err(CoreError::Invalid("empty run".into()));
    }
    let mut counts: BTreeMap<usize, usize> = ks.iter().map(|&k| (k, 0)).collect();
    for (qid, hits) in run {
        if let Some(rank) = first_relevant_rank(qrels, corpus_text, qid, hits)? {
            for (&k, count) in counts.iter_mut() {
                if rank <= k {
                    *count += 1;
                }
            }
        }
    }
    Ok(counts
        .into_iter()
        .map(|(k, c)| (k, c as f64 / run.len() as f64))
        .collect())
}

/// Mean reciprocal rank of the first relevant hit, zero past the cutoff.
pub fn mrr_at(
    run: &Run,
    qrels: &QrelSet,
    corpus_text: Option<&CorpusTextMap>,
    cutoff: usize,
) -> Result<f64> {
    if run.is_empty() {
        return Err(CoreError::Invalid("empty run".into()));
    }
    let mut total = 0.0;
    for (qid, hits) in run {
        if let Some(rank) = first_relevant_rank(qrels, corpus_text, qid, hits)? {
            if rank <= cutoff {
                total += 1.0 / rank as f64;
            }
        }
    }
    Ok(total / run.len() as f64)
}

/// Mean over queries of |top-k ∩ relevant| / |relevant|. IR only: QA qrels
/// have no relevant-set denominator.
pub fn recall_at(run: &Run, qrels: &QrelSet, k: usize) -> Result<f64> {
    if run.is_empty() {
        return Err(CoreError::Invalid("empty run".into()));
    }
    let map = match qrels {
        QrelSet::Ir(map) => map,
        QrelSet::Qa(_) => {
            return Err(CoreError::Invalid(
                "recall needs IR qrels (QA has no relevant-set denominator)".into(),
            ))
        }
    };
    let mut total = 0.0;
    for (qid, hits) in run {
        let relevant = map
            .get(qid)
            .ok_or_else(|| CoreError::MissingQrel(qid.clone()))?;
        if relevant.is_empty() {
            return Err(CoreError::Invalid(alloc::format!(
                "query {qid:?} has no relevant docids"
            )));
        }
        let found = hits
            .iter()
            .take(k)
            .filter(|h| relevant.contains(&h.docid))
            .count();
        total += found as f64 / relevant.len() as f64;
    }
    Ok(total / run.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn hit(docid: &str, score: f64) -> Hit {
        Hit { docid: docid.to_string(), score }
    }

    /// Run where query i's relevant doc sits at the given 1-based rank;
    /// filler docids are never relevant.
    fn run_with_ranks(ranks: &[usize]) -> (Run, QrelSet) {
        let mut run = Run::new();
        let mut qrels = BTreeMap::new();
        for (q, &rank) in ranks.iter().enumerate() {
            let qid = alloc::format!("q{q}");
            let rel = alloc::format!("rel{q}");
            let depth = rank.max(5) + 2;
            let mut hits = Vec::new();
            for r in 1..=depth {
                let docid = if r == rank {
                    rel.clone()
                } else {
                    alloc::format!("filler{q}-{r}")
                };
                hits.push(hit(&docid, -(r as f64)));
            }
            run.push((qid.clone(), hits));
            qrels.insert(qid, BTreeSet::from([rel]));
        }
        (run, QrelSet::Ir(qrels))
    }

    #[test]
    fn topk_counts_ranks_against_cutoffs() {
        let (run, qrels) = run_with_ranks(&[1, 3, 25, 101, 2]);
        let acc = topk_accuracy(&run, &qrels, None, &[20, 100]).unwrap();
        assert_eq!(acc[&20], 3.0 / 5.0);
        assert_eq!(acc[&100], 4.0 / 5.0);
    }

    #[test]
    fn rank_one_counts_for_every_k() {
        let (run, qrels) = run_with_ranks(&[1]);
        let acc = topk_accuracy(&run, &qrels, None, &[1, 5, 100]).unwrap();
        assert!(acc.values().all(|&v| v == 1.0));
    }

    #[test]
    fn mrr_examples() {
        let (run, qrels) = run_with_ranks(&[3]);
        assert!((mrr_at(&run, &qrels, None, 10).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        let (run, qrels) = run_with_ranks(&[11]);
        assert_eq!(mrr_at(&run, &qrels, None, 10).unwrap(), 0.0);
        let (run, qrels) = run_with_ranks(&[1, 4]);
        assert!((mrr_at(&run, &qrels, None, 10).unwrap() - 0.625).abs() < 1e-12);
    }

    #[test]
    fn mrr_cutoff_monotone() {
        let (run, qrels) = run_with_ranks(&[1, 4, 12, 30, 2]);
        let wide = mrr_at(&run, &qrels, None, usize::MAX).unwrap();
        let narrow = mrr_at(&run, &qrels, None, 10).unwrap();
        assert!(wide >= narrow);
    }

    #[test]
    fn recall_counts_found_fraction() {
        let run: Run = vec![(
            "q0".to_string(),
            vec![hit("a", 4.0), hit("x", 3.0), hit("b", 2.0), hit("y", 1.0)],
        )];
        let qrels = QrelSet::Ir(BTreeMap::from([(
            "q0".to_string(),
            BTreeSet::from(["a".to_string(), "b".to_string(), "c".to_string(), "d".to_string()]),
        )]));
        // Top-4 holds 2 of the 4 relevant docs.
        assert_eq!(recall_at(&run, &qrels, 4).unwrap(), 0.5);
        assert_eq!(recall_at(&run, &qrels, 1).unwrap(), 0.25);
        let all = QrelSet::Ir(BTreeMap::from([(
            "q0".to_string(),
            BTreeSet::from(["a".to_string(), "b".to_string()]),
        )]));
        assert_eq!(recall_at(&run, &all, 4).unwrap(), 1.0);
        let none = QrelSet::Ir(BTreeMap::from([(
            "q0".to_string(),
            BTreeSet::from(["z".to_string()]),
        )]));
        assert_eq!(recall_at(&run, &none, 4).unwrap(), 0.0);
    }

    #[test]
    fn recall_rejects_qa_qrels() {
        let run: Run = vec![("q0".to_string(), vec![hit("a", 1.0)])];
        let qa = QrelSet::Qa(BTreeMap::from([("q0".to_string(), vec!["x".to_string()])]));
        assert!(recall_at(&run, &qa, 5).is_err());
    }

    #[test]
    fn missing_query_in_qrels_is_an_error() {
        let run: Run = vec![("q-unknown".to_string(), vec![hit("a", 1.0)])];
        let qrels = QrelSet::Ir(BTreeMap::new());
        assert!(matches!(
            topk_accuracy(&run, &qrels, None, &[1]),
            Err(CoreError::MissingQrel(_))
        ));
    }

    #[test]
    fn normalization_rule() {
        assert_eq!(normalize_answer("  Hello,   World! "), "hello world");
        assert_eq!(normalize_answer("Jean-Luc"), "jean luc");
        assert_eq!(normalize_answer("!!!"), "");
    }

    #[test]
    fn qa_relevance_is_normalized_substring() {
        let run: Run = vec![("q0".to_string(), vec![hit("d1", 2.0), hit("d2", 1.0)])];
        let qrels = QrelSet::Qa(BTreeMap::from([(
            "q0".to_string(),
            vec!["Paris".to_string()],
        )]));
        let corpus = CorpusTextMap::from([
            ("d1".to_string(), "The Eiffel Tower is in PARIS, France.".to_string()),
            ("d2".to_string(), "Berlin is in Germany.".to_string()),
        ]);
        let acc = topk_accuracy(&run, &qrels, Some(&corpus), &[1]).unwrap();
        assert_eq!(acc[&1], 1.0);

        // Answer only in the second passage → MRR 1/2.
        let qrels2 = QrelSet::Qa(BTreeMap::from([(
            "q0".to_string(),
            vec!["Germany".to_string()],
        )]));
        assert_eq!(mrr_at(&run, &qrels2, Some(&corpus), 10).unwrap(), 0.5);
    }

    #[test]
    fn qa_without_corpus_text_errors() {
        let run: Run = vec![("q0".to_string(), vec![hit("d1", 1.0)])];
        let qrels = QrelSet::Qa(BTreeMap::from([("q0".to_string(), vec!["x".to_string()])]));
        assert!(topk_accuracy(&run, &qrels, None, &[1]).is_err());
    }

    #[test]
    fn shuffling_irrelevant_tail_changes_nothing() {
        let qid = "q0".to_string();
        let head = vec![hit("x1", 9.0), hit("rel", 8.0)];
        let tail_a = vec![hit("t1", 3.0), hit("t2", 2.0), hit("t3", 1.0)];
        let tail_b = vec![hit("t3", 3.0), hit("t1", 2.0), hit("t2", 1.0)];
        let qrels = QrelSet::Ir(BTreeMap::from([(
            qid.clone(),
            BTreeSet::from(["rel".to_string()]),
        )]));
        let mut run_a: Run = vec![(qid.clone(), head.clone())];
        run_a[0].1.extend(tail_a);
        let mut run_b: Run = vec![(qid.clone(), head)];
        run_b[0].1.extend(tail_b);
        for run in [&run_a, &run_b] {
            assert_eq!(topk_accuracy(run, &qrels, None, &[2]).unwrap()[&2], 1.0);
            assert_eq!(mrr_at(run, &qrels, None, 10).unwrap(), 0.5);
            assert_eq!(recall_at(run, &qrels, 5).unwrap(), 1.0);
        }
    }

    #[test]
    fn run_validation_rejects_increasing_scores() {
        let ok: Run = vec![("q".to_string(), vec![hit("a", 2.0), hit("b", 2.0), hit("c", 1.0)])];
        validate_run(&ok).unwrap();
        let bad: Run = vec![("q".to_string(), vec![hit("a", 1.0), hit("b", 2.0)])];
        assert!(validate_run(&bad).is_err());
    }
}
