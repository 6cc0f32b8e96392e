//! Synthetic clustered retrieval data for end-to-end smoke tests.
//!
//! Clusters get disjoint vocabularies, so a bag-of-tokens ranker separates
//! them perfectly by construction; a trained encoder has to rediscover the
//! same structure. Every document contains each of its cluster's words at
//! least once (before noise injection), which makes the token-overlap
//! oracle exact: with no noise, any same-cluster document beats every
//! other-cluster document for every query.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::data::{RawCorpusRecord, RawPassage, RawQueryRecord, RawTrainRecord};
use crate::metrics::QrelSet;
use crate::rng::{stream_rng, Stream};
use crate::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub num_clusters: usize,
    pub queries_per_cluster: usize,
    pub docs_per_cluster: usize,
    pub words_per_cluster: usize,
    pub query_len: usize,
    pub doc_len: usize,
    /// Per-token probability of replacing a document token with a word from
    /// the shared cross-cluster noise pool.
    pub noise: f64,
    pub noise_pool: usize,
    /// Cross-cluster negatives attached to each training record.
    pub train_negatives: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            num_clusters: 8,
            queries_per_cluster: 32,
            docs_per_cluster: 8,
            words_per_cluster: 8,
            query_len: 4,
            doc_len: 12,
            noise: 0.0,
            noise_pool: 32,
            train_negatives: 1,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_clusters < 2 {
            return Err(CoreError::Invalid(
                "synthetic data needs at least 2 clusters for cross-cluster negatives".into(),
            ));
        }
        if self.queries_per_cluster == 0
            || self.docs_per_cluster == 0
            || self.words_per_cluster == 0
            || self.query_len == 0
        {
            return Err(CoreError::Invalid("synthetic counts must be positive".into()));
        }
        if self.doc_len < self.words_per_cluster {
            // Full-coverage documents are what make cluster membership
            // unambiguous; shorter documents would break that guarantee.
            return Err(CoreError::Invalid(
                "doc_len must be at least words_per_cluster".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.noise) {
            return Err(CoreError::Invalid("noise must lie in [0, 1)".into()));
        }
        if self.noise > 0.0 && self.noise_pool == 0 {
            return Err(CoreError::Invalid("noise requires a non-empty noise pool".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub train: Vec<RawTrainRecord>,
    pub corpus: Vec<RawCorpusRecord>,
    pub queries: Vec<RawQueryRecord>,
    /// (query_id, docid) pairs; every same-cluster document is relevant.
    pub qrels: Vec<(String, String)>,
}

impl SynthData {
    pub fn qrel_set(&self) -> QrelSet {
        let mut map: alloc::collections::BTreeMap<String, alloc::collections::BTreeSet<String>> =
            alloc::collections::BTreeMap::new();
        for (qid, docid) in &self.qrels {
            map.entry(qid.clone()).or_default().insert(docid.clone());
        }
        QrelSet::Ir(map)
    }
}

fn cluster_word(c: usize, j: usize) -> String {
    format!("c{c}w{j}")
}

fn noise_word(j: usize) -> String {
    format!("z{j}")
}

fn doc_id(c: usize, j: usize) -> String {
    format!("d{c:02}-{j:03}")
}

fn query_id(c: usize, i: usize) -> String {
    format!("q{c:02}-{i:03}")
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthData> {
    cfg.validate()?;
    let mut rng = stream_rng(cfg.seed, Stream::Synth);
    let c_total = cfg.num_clusters;
    let d_per = cfg.docs_per_cluster;
    let w_per = cfg.words_per_cluster;

    // Documents first: each starts as a shuffled full pass over the cluster
    // vocabulary plus random refills, then noise substitution per token.
    let mut corpus = Vec::with_capacity(c_total * d_per);
    for c in 0..c_total {
        for j in 0..d_per {
            let mut word_ids: Vec<usize> = (0..w_per).collect();
            word_ids.shuffle(&mut rng);
            while word_ids.len() < cfg.doc_len {
                word_ids.push(rng.gen_range(0..w_per));
            }
            let mut tokens: Vec<String> =
                word_ids.iter().map(|&w| cluster_word(c, w)).collect();
            if cfg.noise > 0.0 {
                for tok in tokens.iter_mut() {
                    if rng.gen::<f64>() < cfg.noise {
                        *tok = noise_word(rng.gen_range(0..cfg.noise_pool));
                    }
                }
            }
            corpus.push(RawCorpusRecord {
                docid: doc_id(c, j),
                title: String::new(),
                text: tokens.join(" "),
            });
        }
    }

    // Queries: clean cluster words only.
    let mut queries = Vec::with_capacity(c_total * cfg.queries_per_cluster);
    for c in 0..c_total {
        for i in 0..cfg.queries_per_cluster {
            let text: Vec<String> = (0..cfg.query_len)
                .map(|_| cluster_word(c, rng.gen_range(0..w_per)))
                .collect();
            queries.push(RawQueryRecord { query_id: query_id(c, i), query: text.join(" ") });
        }
    }

    // Training records: positive cycles through the cluster's documents,
    // negatives drawn uniformly from other clusters.
    let passage_of = |c: usize, j: usize, corpus: &[RawCorpusRecord]| {
        let rec = &corpus[c * d_per + j];
        RawPassage { docid: rec.docid.clone(), title: String::new(), text: rec.text.clone() }
    };
    let mut train = Vec::with_capacity(queries.len());
    let mut qrels = Vec::new();
    for c in 0..c_total {
        for i in 0..cfg.queries_per_cluster {
            let q = &queries[c * cfg.queries_per_cluster + i];
            let mut negatives = Vec::with_capacity(cfg.train_negatives);
            for _ in 0..cfg.train_negatives {
                let pick = rng.gen_range(0..c_total - 1);
                let c2 = if pick >= c { pick + 1 } else { pick };
                let j2 = rng.gen_range(0..d_per);
                negatives.push(passage_of(c2, j2, &corpus));
            }
            train.push(RawTrainRecord {
                query_id: q.query_id.clone(),
                query: q.query.clone(),
                positive_passages: alloc::vec![passage_of(c, i % d_per, &corpus)],
                negative_passages: negatives,
                answers: None,
            });
            for j in 0..d_per {
                qrels.push((q.query_id.clone(), doc_id(c, j)));
            }
        }
    }

    Ok(SynthData { train, corpus, queries, qrels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenizer::{tokenize, TokenizerConfig};
    use alloc::collections::BTreeSet;

    fn small() -> SynthConfig {
        SynthConfig {
            num_clusters: 4,
            queries_per_cluster: 6,
            docs_per_cluster: 3,
            words_per_cluster: 5,
            query_len: 3,
            doc_len: 8,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn shapes_and_ids() {
        let data = generate(&small()).unwrap();
        assert_eq!(data.corpus.len(), 12);
        assert_eq!(data.queries.len(), 24);
        assert_eq!(data.train.len(), 24);
        assert_eq!(data.qrels.len(), 24 * 3);
        assert_eq!(data.corpus[0].docid, "d00-000");
        assert_eq!(data.queries.last().unwrap().query_id, "q03-005");
        for rec in &data.train {
            assert_eq!(rec.positive_passages.len(), 1);
            assert_eq!(rec.negative_passages.len(), 1);
            rec.validate(crate::data::Schema::Ir).unwrap();
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!(a.corpus[5].text, b.corpus[5].text);
        assert_eq!(a.train[7].negative_passages, b.train[7].negative_passages);
        let other = generate(&SynthConfig { seed: 99, ..small() }).unwrap();
        assert!(a.corpus.iter().zip(&other.corpus).any(|(x, y)| x.text != y.text));
    }

    #[test]
    fn negatives_come_from_other_clusters() {
        let data = generate(&SynthConfig { train_negatives: 3, ..small() }).unwrap();
        for rec in &data.train {
            let own = &rec.query_id[1..3];
            for neg in &rec.negative_passages {
                assert_ne!(&neg.docid[1..3], own);
            }
        }
    }

    #[test]
    fn clean_docs_cover_their_whole_cluster_vocabulary() {
        let cfg = small();
        let data = generate(&cfg).unwrap();
        for (idx, doc) in data.corpus.iter().enumerate() {
            let c = idx / cfg.docs_per_cluster;
            let have: BTreeSet<&str> = doc.text.split(' ').collect();
            for w in 0..cfg.words_per_cluster {
                assert!(have.contains(cluster_word(c, w).as_str()));
            }
        }
    }

    /// Cluster vocabularies are disjoint as strings; this checks they stay
    /// disjoint after hashing into the default vocab, so token-level models
    /// see the same separation the string-level oracle does.
    #[test]
    fn default_vocab_keeps_all_words_distinct() {
        let cfg = SynthConfig::default();
        let tok = TokenizerConfig::passage_default();
        let mut ids = BTreeSet::new();
        let mut words = 0usize;
        for c in 0..cfg.num_clusters {
            for w in 0..cfg.words_per_cluster {
                ids.extend(tokenize(&cluster_word(c, w), tok));
                words += 1;
            }
        }
        for z in 0..cfg.noise_pool {
            ids.extend(tokenize(&noise_word(z), tok));
            words += 1;
        }
        assert_eq!(ids.len(), words);
    }

    /// Token-overlap oracle: rank documents by count of query tokens they
    /// contain (ties by docid). With no noise this must retrieve a
    /// same-cluster document for every query.
    #[test]
    fn token_overlap_oracle_is_perfect_without_noise() {
        let data = generate(&small()).unwrap();
        for q in &data.queries {
            let qwords: BTreeSet<&str> = q.query.split(' ').collect();
            let best = data
                .corpus
                .iter()
                .map(|d| {
                    let overlap =
                        d.text.split(' ').filter(|t| qwords.contains(t)).count();
                    (core::cmp::Reverse(overlap), d.docid.as_str())
                })
                .min()
                .unwrap();
            assert!(best.0 .0 > 0);
            assert_eq!(&best.1[1..3], &q.query_id[1..3]);
        }
    }

    #[test]
    fn noise_injects_pool_words() {
        let cfg = SynthConfig { noise: 0.4, ..small() };
        let data = generate(&cfg).unwrap();
        let noisy = data
            .corpus
            .iter()
            .flat_map(|d| d.text.split(' '))
            .filter(|t| t.starts_with('z'))
            .count();
        assert!(noisy > 0);
    }

    #[test]
    fn validation_rejects_bad_configs() {
        assert!(generate(&SynthConfig { num_clusters: 1, ..small() }).is_err());
        assert!(generate(&SynthConfig { doc_len: 2, ..small() }).is_err());
        assert!(generate(&SynthConfig { noise: 1.0, ..small() }).is_err());
        assert!(generate(&SynthConfig { noise: -0.1, ..small() }).is_err());
    }
}
