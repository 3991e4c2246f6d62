use super::{create_dir, write_text, CHECKPOINT_FILE, LOG_FILE};
use crate::args::{TrainSentimentArgs, TrainSyntaxArgs};
use crate::corpus::Corpus;
use crate::error::{CliError, Result};
use crate::manifest::RunManifest;
use crate::settings::FileConfig;
use hyperprobe::probes::{write_checkpoint, Task};
use hyperprobe::train::{StopReason, TrainConfig, TrainOutcome};
use serde::Serialize;
use std::path::Path;

#[derive(Serialize)]
pub(super) struct Resolved<'a> {
    #[serde(flatten)]
    pub train: &'a TrainConfig,
    pub max_len: usize,
}

/// Trains and writes the best checkpoint and the epoch log into `out`.
pub(super) fn fit(cfg: &TrainConfig, train: &Corpus, dev: &Corpus, out: &Path, manifest: &mut RunManifest) -> Result<TrainOutcome> {
    create_dir(out)?;
    let outcome = hyperprobe::train::train(cfg, &train.dataset()?, &dev.dataset()?)?;
    let ck = out.join(CHECKPOINT_FILE);
    write_checkpoint(&ck, &outcome.best)?;
    let log = out.join(LOG_FILE);
    write_text(&log, &outcome.log_text())?;
    manifest.output("checkpoint", &ck)?;
    manifest.output("log", &log)?;
    Ok(outcome)
}

pub(super) fn check_diverged(outcome: &TrainOutcome) -> Result<()> {
    match outcome.stop {
        StopReason::Diverged { epoch } => Err(CliError::numerical(format!(
            "training diverged in epoch {epoch}; the last finite checkpoint was kept"
        ))),
        _ => Ok(()),
    }
}

fn summarize(outcome: &TrainOutcome) {
    println!(
        "best dev loss {:.6} at epoch {} ({} epochs run, stop: {:?})",
        outcome.best_dev_loss,
        outcome.best.epoch,
        outcome.log.len(),
        outcome.stop
    );
}

pub fn run_syntax(a: &TrainSyntaxArgs, file: &FileConfig) -> Result<()> {
    let max_len = file.max_len(a.train.max_len);
    let cfg = file.train_config(&a.train, a.task, false)?;
    if cfg.task == Task::Sentiment {
        return Err(CliError::usage("use train-sentiment for the sentiment task"));
    }
    let mut m = RunManifest::start("train-syntax", Some(cfg.seed), &Resolved { train: &cfg, max_len });
    m.input("treebank", &a.treebank)?;
    m.input("emb", &a.emb)?;
    m.input("dev_treebank", &a.dev_treebank)?;
    m.input("dev_emb", &a.dev_emb)?;
    let train = Corpus::syntax(&a.treebank, &a.emb, max_len)?;
    let dev = Corpus::syntax(&a.dev_treebank, &a.dev_emb, max_len)?;
    let outcome = fit(&cfg, &train, &dev, &a.out, &mut m)?;
    summarize(&outcome);
    m.finish(&a.out)?;
    check_diverged(&outcome)
}

pub fn run_sentiment(a: &TrainSentimentArgs, file: &FileConfig) -> Result<()> {
    let max_len = file.max_len(a.train.max_len);
    let cfg = file.train_config(&a.train, Some(Task::Sentiment), a.fixed_heads)?;
    let mut m = RunManifest::start("train-sentiment", Some(cfg.seed), &Resolved { train: &cfg, max_len });
    m.input("labels", &a.labels)?;
    m.input("emb", &a.emb)?;
    m.input("dev_labels", &a.dev_labels)?;
    m.input("dev_emb", &a.dev_emb)?;
    let train = Corpus::sentiment(&a.labels, &a.emb, max_len)?;
    let dev = Corpus::sentiment(&a.dev_labels, &a.dev_emb, max_len)?;
    let outcome = fit(&cfg, &train, &dev, &a.out, &mut m)?;
    summarize(&outcome);
    m.finish(&a.out)?;
    check_diverged(&outcome)
}
