#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use deskret_core::synth::SynthData;

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_deskret"))
}

pub fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn deskret");
    assert!(
        out.status.success(),
        "command failed with {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn run_expect(cmd: &mut Command, code: i32) -> Output {
    let out = cmd.output().expect("spawn deskret");
    assert_eq!(
        out.status.code(),
        Some(code),
        "expected exit {code}\nstdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn write_jsonl<T: serde::Serialize>(items: &[T], path: &Path) {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).unwrap());
        out.push('\n');
    }
    std::fs::write(path, out).unwrap();
}

pub struct SynthFiles {
    pub train: PathBuf,
    pub corpus: PathBuf,
    pub queries: PathBuf,
    pub qrels: PathBuf,
}

pub fn write_synth_files(data: &SynthData, dir: &Path) -> SynthFiles {
    let files = SynthFiles {
        train: dir.join("train.jsonl"),
        corpus: dir.join("corpus.jsonl"),
        queries: dir.join("queries.jsonl"),
        qrels: dir.join("qrels.tsv"),
    };
    write_jsonl(&data.train, &files.train);
    write_jsonl(&data.corpus, &files.corpus);
    write_jsonl(&data.queries, &files.queries);
    let mut tsv = String::new();
    for (qid, docid) in &data.qrels {
        tsv.push_str(&format!("{qid}\t{docid}\n"));
    }
    std::fs::write(&files.qrels, tsv).unwrap();
    files
}

pub fn read_bytes(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

pub fn assert_same_bytes(a: &Path, b: &Path) {
    assert_eq!(
        read_bytes(a),
        read_bytes(b),
        "files differ: {} vs {}",
        a.display(),
        b.display()
    );
}

/// Tokenize, train, and encode a synthetic dataset through the CLI,
/// returning paths to the stores, checkpoint, and embedding shards.
pub struct Pipeline {
    pub dir: PathBuf,
    pub train_store: PathBuf,
    pub corpus_store: PathBuf,
    pub query_store: PathBuf,
    pub model_dir: PathBuf,
    pub corpus_emb: PathBuf,
    pub query_emb: PathBuf,
}

pub fn run_pipeline(files: &SynthFiles, dir: &Path, train_flags: &[&str]) -> Pipeline {
    std::fs::create_dir_all(dir).unwrap();
    let p = Pipeline {
        dir: dir.to_path_buf(),
        train_store: dir.join("train.store"),
        corpus_store: dir.join("corpus.store"),
        query_store: dir.join("queries.store"),
        model_dir: dir.join("model"),
        corpus_emb: dir.join("corpus.shard"),
        query_emb: dir.join("queries.shard"),
    };
    for (input, kind, output) in [
        (&files.train, "train", &p.train_store),
        (&files.corpus, "corpus", &p.corpus_store),
        (&files.queries, "queries", &p.query_store),
    ] {
        run_ok(bin().args([
            "process",
            "--input",
            input.to_str().unwrap(),
            "--kind",
            kind,
            "--output",
            output.to_str().unwrap(),
        ]));
    }
    let mut cmd = bin();
    cmd.args([
        "train",
        "--store",
        p.train_store.to_str().unwrap(),
        "--output-dir",
        p.model_dir.to_str().unwrap(),
    ]);
    cmd.args(train_flags);
    run_ok(&mut cmd);
    let ckpt = p.model_dir.join("model.ckpt");
    for (store, output) in [(&p.corpus_store, &p.corpus_emb), (&p.query_store, &p.query_emb)] {
        run_ok(bin().args([
            "encode",
            "--checkpoint",
            ckpt.to_str().unwrap(),
            "--store",
            store.to_str().unwrap(),
            "--output",
            output.to_str().unwrap(),
        ]));
    }
    p
}
