use super::{create_dir, write_text};
use crate::args::VizArgs;
use crate::corpus::Corpus;
use crate::error::{CliError, Result};
use crate::manifest::RunManifest;
use hyperprobe::eval::{mst_decode, predicted_sq_distances};
use hyperprobe::probes::read_checkpoint;
use hyperprobe::viz::{render_svg, scene_tsv, sentiment_scene, syntax_scene, RenderConfig};
use serde::Serialize;

#[derive(Serialize)]
struct Resolved {
    sentence: usize,
    significance: f64,
}

pub fn run(a: &VizArgs) -> Result<()> {
    if !(a.significance.is_finite() && a.significance >= 0.0) {
        return Err(CliError::usage("--significance must be nonnegative"));
    }
    let mut m = RunManifest::start("viz", None, &Resolved { sentence: a.sentence, significance: a.significance });
    m.input("checkpoint", &a.checkpoint)?;
    let corpus_path = a.corpus.treebank.as_ref().or(a.corpus.labels.as_ref()).expect("clap enforces one corpus");
    m.input(if a.corpus.treebank.is_some() { "treebank" } else { "labels" }, corpus_path)?;
    m.input("emb", &a.emb)?;

    let ck = read_checkpoint(&a.checkpoint)?;
    let corpus = Corpus::load(a.corpus.treebank.as_deref(), a.corpus.labels.as_deref(), &a.emb, usize::MAX)?;
    corpus.check_model(&ck.model, ck.task)?;
    if a.sentence >= corpus.len() {
        return Err(CliError::usage(format!(
            "--sentence {} is out of range: the corpus has {} sentences",
            a.sentence,
            corpus.len()
        )));
    }
    let model = &ck.model;
    let scene = match &corpus {
        Corpus::Syntax { records, .. } => {
            let r = &records[a.sentence];
            let emb = r.embedding.as_ref().expect("attached at load");
            let q = model.project_sentence(emb.view());
            let predicted = mst_decode(predicted_sq_distances(model, &q).view(), None);
            syntax_scene(model, &r.tokens, emb.view(), &r.gold_edges(None), &predicted)?
        }
        Corpus::Sentiment(examples) => {
            let e = &examples[a.sentence];
            let emb = e.embedding.as_ref().expect("attached at load");
            sentiment_scene(model, &e.tokens, emb.view(), a.significance)?
        }
    };

    create_dir(&a.out)?;
    let svg = a.out.join("scene.svg");
    write_text(&svg, &render_svg(&scene, &RenderConfig::default()))?;
    m.output("svg", &svg)?;
    let tsv = a.out.join("scene.tsv");
    write_text(&tsv, &scene_tsv(&scene))?;
    m.output("tsv", &tsv)?;
    m.finish(&a.out)?;
    println!("wrote {}", svg.display());
    Ok(())
}
