//! End-to-end library pipeline on synthetic clustered data: generate,
//! tokenize, train briefly, encode, search, score, mine. Fast settings;
//! the full-strength statistical checks live in the companion crate's
//! acceptance suite.

use std::collections::BTreeMap;

use deskret_core::data::{
    tokenize_corpus_record, tokenize_query_record, tokenize_train_record,
};
use deskret_core::embed::{encode_corpus_shard, encode_query_shard};
use deskret_core::index::{Index, IndexSpec};
use deskret_core::metrics::{mrr_at, topk_accuracy, Run};
use deskret_core::mining::{mine_hard_negatives, CorpusMap};
use deskret_core::model::{EncoderConfig, EncoderParams, Mode, Pooler};
use deskret_core::synth::{generate, SynthConfig};
use deskret_core::tokenizer::TokenizerConfig;
use deskret_core::trainer::{train, TrainConfig};

fn encoder_cfg() -> EncoderConfig {
    EncoderConfig {
        mode: Mode::Tied,
        pooler: Pooler::Mean,
        vocab_size: 30_000,
        d_embed: 16,
        d_out: 16,
    }
}

fn run_pipeline(params: &EncoderParams, data: &deskret_core::synth::SynthData) -> Run {
    let pcfg = TokenizerConfig::passage_default();
    let qcfg = TokenizerConfig::query_default();
    let corpus: Vec<_> = data
        .corpus
        .iter()
        .map(|r| tokenize_corpus_record(r, pcfg))
        .collect();
    let queries: Vec<_> = data
        .queries
        .iter()
        .map(|r| tokenize_query_record(r, qcfg))
        .collect();
    let corpus_shard = encode_corpus_shard(params, corpus.iter()).unwrap();
    let query_shard = encode_query_shard(params, queries.iter()).unwrap();
    let index = Index::build(IndexSpec::Flat, std::slice::from_ref(&corpus_shard), 0).unwrap();
    let qvecs: Vec<Vec<f32>> = (0..query_shard.rows())
        .map(|r| query_shard.row(r).to_vec())
        .collect();
    let results = index.search(&qvecs, 10, -1).unwrap();
    queries
        .iter()
        .map(|q| q.query_id.clone())
        .zip(results)
        .collect()
}

#[test]
fn training_improves_retrieval_and_mining_stays_consistent() {
    let synth_cfg = SynthConfig {
        num_clusters: 4,
        queries_per_cluster: 8,
        docs_per_cluster: 4,
        words_per_cluster: 6,
        query_len: 3,
        doc_len: 8,
        seed: 11,
        ..SynthConfig::default()
    };
    let data = generate(&synth_cfg).unwrap();
    let qrels = data.qrel_set();

    let qcfg = TokenizerConfig::query_default();
    let pcfg = TokenizerConfig::passage_default();
    let mut examples: Vec<_> = data
        .train
        .iter()
        .map(|r| tokenize_train_record(r, qcfg, pcfg))
        .collect();

    let untrained = EncoderParams::init(encoder_cfg(), 5);
    let run_before = run_pipeline(&untrained, &data);
    let acc_before = topk_accuracy(&run_before, &qrels, None, &[1]).unwrap()[&1];

    let mut params = untrained.clone();
    let train_cfg = TrainConfig {
        batch_size: 8,
        epochs: 12,
        learning_rate: 5e-3,
        seed: 5,
        ..TrainConfig::default()
    };
    let log = train(&mut params, &mut examples, &train_cfg).unwrap();
    assert_eq!(log.len(), 12 * (32 / 8));
    let run_after = run_pipeline(&params, &data);
    let acc_after = topk_accuracy(&run_after, &qrels, None, &[1]).unwrap()[&1];
    assert!(
        acc_after > acc_before.max(0.5),
        "training did not help: before {acc_before}, after {acc_after}"
    );
    let mrr = mrr_at(&run_after, &qrels, None, 10).unwrap();
    assert!(mrr > 0.5, "mrr {mrr}");

    // Mine new negatives from the trained run and check the augmentation
    // contract: appended docids come from the run, never from the record's
    // own positives, and retraining on the result still runs.
    let corpus_map: CorpusMap = data
        .corpus
        .iter()
        .map(|r| (r.docid.clone(), (r.title.clone(), r.text.clone())))
        .collect();
    let (mined, missing) =
        mine_hard_negatives(&run_after, &data.train, &corpus_map, 10, 2).unwrap();
    assert_eq!(missing, 0);
    let run_map: BTreeMap<&str, Vec<&str>> = run_after
        .iter()
        .map(|(qid, hits)| {
            (qid.as_str(), hits.iter().map(|h| h.docid.as_str()).collect())
        })
        .collect();
    let mut grew = 0usize;
    for (old, new) in data.train.iter().zip(&mined) {
        let pos: Vec<&str> = new.positive_passages.iter().map(|p| p.docid.as_str()).collect();
        let added = &new.negative_passages[old.negative_passages.len()..];
        if !added.is_empty() {
            grew += 1;
        }
        for neg in added {
            assert!(!pos.contains(&neg.docid.as_str()));
            assert!(run_map[new.query_id.as_str()].contains(&neg.docid.as_str()));
        }
    }
    assert!(grew > 0);

    let mut mined_examples: Vec<_> = mined
        .iter()
        .map(|r| tokenize_train_record(r, qcfg, pcfg))
        .collect();
    let retrain_cfg = TrainConfig { epochs: 2, ..train_cfg };
    let mut retrained = params.clone();
    train(&mut retrained, &mut mined_examples, &retrain_cfg).unwrap();
    let run_final = run_pipeline(&retrained, &data);
    let acc_final = topk_accuracy(&run_final, &qrels, None, &[1]).unwrap()[&1];
    assert!(acc_final >= acc_after - 1e-9, "mining hurt: {acc_after} -> {acc_final}");
}

#[test]
fn sharded_encode_then_merge_equals_unsharded() {
    use deskret_core::index::merge_shard_results;
    use deskret_core::sharding::shard_range;

    let data = generate(&SynthConfig {
        num_clusters: 3,
        queries_per_cluster: 4,
        docs_per_cluster: 7,
        words_per_cluster: 5,
        query_len: 3,
        doc_len: 8,
        seed: 2,
        ..SynthConfig::default()
    })
    .unwrap();
    let pcfg = TokenizerConfig::passage_default();
    let corpus: Vec<_> = data
        .corpus
        .iter()
        .map(|r| tokenize_corpus_record(r, pcfg))
        .collect();
    let params = EncoderParams::init(encoder_cfg(), 1);

    let full_shard = encode_corpus_shard(&params, corpus.iter()).unwrap();
    let full_index = Index::build(IndexSpec::Flat, std::slice::from_ref(&full_shard), 0).unwrap();
    let queries: Vec<Vec<f32>> = (0..4)
        .map(|i| (0..16).map(|j| ((i * 16 + j) as f32).sin()).collect())
        .collect();
    let expect = full_index.search(&queries, 6, -1).unwrap();

    // Encode in 4 uneven shards, search each, merge.
    let mut per_shard = Vec::new();
    for s in 0..4 {
        let (lo, hi) = shard_range(corpus.len(), 4, s).unwrap();
        let shard = encode_corpus_shard(&params, corpus[lo..hi].iter()).unwrap();
        let index = Index::build(IndexSpec::Flat, std::slice::from_ref(&shard), 0).unwrap();
        per_shard.push(index.search(&queries, 6, -1).unwrap());
    }
    let merged = merge_shard_results(&per_shard, 6).unwrap();
    assert_eq!(expect, merged);
}
