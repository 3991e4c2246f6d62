//! Corpus ingestion: dependency treebanks, sentiment label files, the PEMB
//! embedding container, and gold tree distances/depths.

mod conllu;
mod pemb;
mod sentiment;
mod tree;

pub use conllu::{parse_conllu, parse_conllu_str, Treebank};
pub use pemb::{decode_pemb, encode_pemb, read_pemb, write_pemb, Pemb, PEMB_MAGIC, PEMB_VERSION};
pub use sentiment::{load_sentiment_tsv, parse_sentiment_tsv, Polarity, SentimentExample};
pub use tree::{linear_baseline, tree_metrics, PunctuationSet, SentenceRecord, TreeError, TreeGold};

use ndarray::Array2;
use std::path::PathBuf;
use thiserror::Error;

/// Default cap on sentence length; longer sentences are dropped at load.
pub const DEFAULT_MAX_LEN: usize = 60;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}: no parsable sentences")]
    NoSentences(String),
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("not a PEMB file (bad magic)")]
    BadMagic,
    #[error("unsupported PEMB version {0}")]
    Version(u32),
    #[error("PEMB payload truncated: needed {needed} more bytes")]
    Truncated { needed: usize },
    #[error("PEMB payload has {0} trailing bytes")]
    Trailing(usize),
    #[error("embedding file has {embeddings} sentences, text file has {text}")]
    SentenceCount { embeddings: usize, text: usize },
    #[error("sentence {index}: {embeddings} embedding rows for {tokens} tokens")]
    TokenCount {
        index: usize,
        embeddings: usize,
        tokens: usize,
    },
    #[error("line {line}: unknown label {label:?}")]
    UnknownLabel { line: usize, label: String },
}

pub type Result<T> = std::result::Result<T, DataError>;

pub(crate) fn read_to_string(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn check_alignment(pemb: &Pemb, counts: impl ExactSizeIterator<Item = usize>) -> Result<()> {
    if pemb.sentences.len() != counts.len() {
        return Err(DataError::SentenceCount {
            embeddings: pemb.sentences.len(),
            text: counts.len(),
        });
    }
    for (index, (m, tokens)) in pemb.sentences.iter().zip(counts).enumerate() {
        if m.nrows() != tokens {
            return Err(DataError::TokenCount {
                index,
                embeddings: m.nrows(),
                tokens,
            });
        }
    }
    Ok(())
}

fn promote(m: &Array2<f32>) -> Array2<f64> {
    m.mapv(f64::from)
}

/// Pairs treebank sentences with their embedding matrices, in file order.
pub fn attach_embeddings(records: &mut [SentenceRecord], pemb: &Pemb) -> Result<()> {
    check_alignment(pemb, records.iter().map(SentenceRecord::len))?;
    for (r, m) in records.iter_mut().zip(&pemb.sentences) {
        r.embedding = Some(promote(m));
    }
    Ok(())
}

/// Pairs sentiment examples with their embedding matrices, in file order.
pub fn attach_sentiment_embeddings(examples: &mut [SentimentExample], pemb: &Pemb) -> Result<()> {
    check_alignment(pemb, examples.iter().map(|e| e.tokens.len()))?;
    for (e, m) in examples.iter_mut().zip(&pemb.sentences) {
        e.embedding = Some(promote(m));
    }
    Ok(())
}

/// Drops sentences longer than `max_len`; returns how many were dropped.
pub fn cap_length<T>(items: &mut Vec<T>, max_len: usize, len: impl Fn(&T) -> usize) -> usize {
    let before = items.len();
    items.retain(|x| len(x) <= max_len);
    before - items.len()
}
