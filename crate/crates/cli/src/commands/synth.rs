use super::{create_dir, write_text};
use crate::args::SynthArgs;
use crate::error::{CliError, Result};
use crate::manifest::RunManifest;
use hyperprobe::data::{write_pemb, SentenceRecord, SentimentExample};
use hyperprobe::synthetic::{
    planted_sentiment, recoverable_syntax, to_conllu, to_pemb, to_sentiment_tsv, SentimentSynthConfig, SyntaxSynthConfig,
};
use ndarray::Array2;
use serde::Serialize;
use std::path::Path;

#[derive(Serialize)]
struct Resolved {
    seed: u64,
    sentences: usize,
    dev_sentences: usize,
    sentiment_sentences: usize,
    sentiment_dev_sentences: usize,
    dim: usize,
    rank: usize,
    curvature: f64,
    sentiment_dim: usize,
}

fn write(out: &Path, name: &str, text: &str, m: &mut RunManifest) -> Result<()> {
    let path = out.join(name);
    write_text(&path, text)?;
    m.output(name, &path)
}

fn write_emb<'a>(out: &Path, name: &str, mats: impl IntoIterator<Item = &'a Array2<f64>>, m: &mut RunManifest) -> Result<()> {
    let path = out.join(name);
    write_pemb(&path, &to_pemb(mats))?;
    m.output(name, &path)
}

fn record_emb(r: &SentenceRecord) -> &Array2<f64> {
    r.embedding.as_ref().expect("synthetic records carry embeddings")
}

fn example_emb(e: &SentimentExample) -> &Array2<f64> {
    e.embedding.as_ref().expect("synthetic examples carry embeddings")
}

pub fn run(a: &SynthArgs) -> Result<()> {
    if [a.sentences, a.dev_sentences, a.sentiment_sentences, a.sentiment_dev_sentences].contains(&0) {
        return Err(CliError::usage("every split needs at least one sentence"));
    }
    let syn_cfg = SyntaxSynthConfig {
        sentences: a.sentences + a.dev_sentences,
        seed: a.seed,
        ..Default::default()
    };
    let sent_cfg = SentimentSynthConfig {
        sentences: a.sentiment_sentences + a.sentiment_dev_sentences,
        seed: a.seed,
        ..Default::default()
    };
    let resolved = Resolved {
        seed: a.seed,
        sentences: a.sentences,
        dev_sentences: a.dev_sentences,
        sentiment_sentences: a.sentiment_sentences,
        sentiment_dev_sentences: a.sentiment_dev_sentences,
        dim: syn_cfg.dim,
        rank: syn_cfg.rank,
        curvature: syn_cfg.curvature,
        sentiment_dim: sent_cfg.dim,
    };
    let mut m = RunManifest::start("synth", Some(a.seed), &resolved);
    create_dir(&a.out)?;

    let syn = recoverable_syntax(&syn_cfg);
    let worst = syn.fit_loss.iter().cloned().fold(0.0, f64::max);
    log::info!("planted points fitted, worst distance loss {worst:.5}");
    let (train, dev) = syn.records.split_at(a.sentences);
    write(&a.out, "train.conllu", &to_conllu(train), &mut m)?;
    write_emb(&a.out, "train.pemb", train.iter().map(record_emb), &mut m)?;
    write(&a.out, "dev.conllu", &to_conllu(dev), &mut m)?;
    write_emb(&a.out, "dev.pemb", dev.iter().map(record_emb), &mut m)?;

    let (examples, _) = planted_sentiment(&sent_cfg);
    let (train, dev) = examples.split_at(a.sentiment_sentences);
    write(&a.out, "sentiment_train.tsv", &to_sentiment_tsv(train), &mut m)?;
    write_emb(&a.out, "sentiment_train.pemb", train.iter().map(example_emb), &mut m)?;
    write(&a.out, "sentiment_dev.tsv", &to_sentiment_tsv(dev), &mut m)?;
    write_emb(&a.out, "sentiment_dev.pemb", dev.iter().map(example_emb), &mut m)?;

    m.finish(&a.out)?;
    println!("wrote synthetic corpora to {}", a.out.display());
    Ok(())
}
