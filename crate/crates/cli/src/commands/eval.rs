use super::{create_dir, write_text, REPORT_FILE};
use crate::args::EvalArgs;
use crate::corpus::Corpus;
use crate::error::Result;
use crate::manifest::RunManifest;
use crate::settings::FileConfig;
use hyperprobe::eval::{EvalOptions, EvalReport};
use hyperprobe::probes::{rank_word_sentiment, read_checkpoint, Model};
use serde::Serialize;
use std::path::Path;

#[derive(Serialize)]
struct Resolved {
    include_punct: bool,
    macro_uuas: bool,
    layer: Option<usize>,
    max_len: usize,
    punctuation: Option<Vec<String>>,
}

/// Writes the report JSON and its TSV tables into `out`.
pub(super) fn write_report(report: &EvalReport, out: &Path, m: &mut RunManifest) -> Result<()> {
    create_dir(out)?;
    let path = out.join(REPORT_FILE);
    write_text(&path, &report.to_json())?;
    m.output("report", &path)?;
    let path = out.join("buckets.tsv");
    write_text(&path, &report.buckets_tsv())?;
    m.output("buckets", &path)?;
    if let Some(tsv) = report.edge_lengths_tsv() {
        let path = out.join("edge_lengths.tsv");
        write_text(&path, &tsv)?;
        m.output("edge_lengths", &path)?;
    }
    Ok(())
}

fn write_top_words(corpus: &Corpus, model: &Model, out: &Path, m: &mut RunManifest) -> Result<()> {
    let Corpus::Sentiment(examples) = corpus else { return Ok(()) };
    let Some(ranked) = rank_word_sentiment(examples, model) else { return Ok(()) };
    let mut tsv = String::from("word\tgap\toccurrences\n");
    for w in ranked {
        tsv += &format!("{}\t{}\t{}\n", w.word, w.gap, w.occurrences);
    }
    let path = out.join("top_words.tsv");
    write_text(&path, &tsv)?;
    m.output("top_words", &path)
}

pub fn run(a: &EvalArgs, file: &FileConfig) -> Result<()> {
    let resolved = Resolved {
        include_punct: file.include_punct(a.include_punct),
        macro_uuas: file.macro_uuas(a.macro_uuas),
        layer: a.layer,
        max_len: file.max_len(a.max_len),
        punctuation: file.punctuation.clone(),
    };
    let mut m = RunManifest::start("eval", None, &resolved);
    m.input("checkpoint", &a.checkpoint)?;
    let corpus_path = a.corpus.treebank.as_ref().or(a.corpus.labels.as_ref()).expect("clap enforces one corpus");
    m.input(if a.corpus.treebank.is_some() { "treebank" } else { "labels" }, corpus_path)?;
    m.input("emb", &a.emb)?;

    let ck = read_checkpoint(&a.checkpoint)?;
    let corpus = Corpus::load(a.corpus.treebank.as_deref(), a.corpus.labels.as_deref(), &a.emb, resolved.max_len)?;
    let opts = EvalOptions {
        punctuation: file.punctuation(),
        include_punct: resolved.include_punct,
        macro_uuas: resolved.macro_uuas,
        edge_analysis: true,
        layer: a.layer,
    };
    let report = corpus.evaluate(&ck.model, ck.task, &opts)?;
    write_report(&report, &a.out, &mut m)?;
    write_top_words(&corpus, &ck.model, &a.out, &mut m)?;
    for (k, v) in &report.metrics {
        println!("{k}\t{v:.4}");
    }
    m.finish(&a.out)?;
    Ok(())
}
