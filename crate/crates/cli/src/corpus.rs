use crate::error::{CliError, Result};
use hyperprobe::data::{cap_length, load_sentiment_tsv, parse_conllu, read_pemb, SentenceRecord, SentimentExample, TreeGold};
use hyperprobe::eval::{evaluate_sentiment, evaluate_syntax, EvalOptions, EvalReport};
use hyperprobe::probes::{Model, Task};
use hyperprobe::train::{gold_metrics, Dataset};
use std::path::Path;

/// A text corpus with its embeddings attached.
#[derive(Debug, Clone)]
pub enum Corpus {
    Syntax { records: Vec<SentenceRecord>, golds: Vec<TreeGold> },
    Sentiment(Vec<SentimentExample>),
}

impl Corpus {
    pub fn syntax(treebank: &Path, emb: &Path, max_len: usize) -> Result<Self> {
        let mut tb = parse_conllu(treebank)?;
        tb.attach(&read_pemb(emb)?)?;
        let mut records = tb.sentences;
        let dropped = cap_length(&mut records, max_len, SentenceRecord::len);
        if dropped > 0 {
            log::info!("{}: {dropped} sentences longer than {max_len} tokens left out", treebank.display());
        }
        let golds = gold_metrics(&records);
        Ok(Corpus::Syntax { records, golds })
    }

    pub fn sentiment(labels: &Path, emb: &Path, max_len: usize) -> Result<Self> {
        let mut examples = load_sentiment_tsv(labels)?;
        hyperprobe::data::attach_sentiment_embeddings(&mut examples, &read_pemb(emb)?)?;
        let dropped = cap_length(&mut examples, max_len, |e| e.tokens.len());
        if dropped > 0 {
            log::info!("{}: {dropped} sentences longer than {max_len} tokens left out", labels.display());
        }
        Ok(Corpus::Sentiment(examples))
    }

    /// Loads whichever of `treebank` and `labels` is given.
    pub fn load(treebank: Option<&Path>, labels: Option<&Path>, emb: &Path, max_len: usize) -> Result<Self> {
        match (treebank, labels) {
            (Some(t), None) => Self::syntax(t, emb, max_len),
            (None, Some(l)) => Self::sentiment(l, emb, max_len),
            _ => Err(CliError::usage("give exactly one of --treebank and --labels")),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Corpus::Syntax { records, .. } => records.len(),
            Corpus::Sentiment(e) => e.len(),
        }
    }

    pub fn is_syntax(&self) -> bool {
        matches!(self, Corpus::Syntax { .. })
    }

    pub fn dataset(&self) -> Result<Dataset<'_>> {
        Ok(match self {
            Corpus::Syntax { records, golds } => Dataset::syntax(records, golds)?,
            Corpus::Sentiment(e) => Dataset::sentiment(e)?,
        })
    }

    fn widths(&self) -> Vec<usize> {
        match self {
            Corpus::Syntax { records, .. } => records.iter().filter_map(|r| r.embedding.as_ref()).map(|m| m.ncols()).collect(),
            Corpus::Sentiment(e) => e.iter().filter_map(|x| x.embedding.as_ref()).map(|m| m.ncols()).collect(),
        }
    }

    /// Sentences whose length lies in `lo..=hi`.
    pub fn with_lengths(&self, lo: usize, hi: usize) -> Self {
        let keep = |t: usize| (lo..=hi).contains(&t);
        match self {
            Corpus::Syntax { records, golds } => {
                let (records, golds) = records
                    .iter()
                    .zip(golds)
                    .filter(|(r, _)| keep(r.len()))
                    .map(|(r, g)| (r.clone(), g.clone()))
                    .unzip();
                Corpus::Syntax { records, golds }
            }
            Corpus::Sentiment(e) => Corpus::Sentiment(e.iter().filter(|x| keep(x.tokens.len())).cloned().collect()),
        }
    }

    /// Checks that `model` can read this corpus under `task`.
    pub fn check_model(&self, model: &Model, task: Task) -> Result<()> {
        if (task == Task::Sentiment) == self.is_syntax() {
            let kind = if self.is_syntax() { "treebank" } else { "sentiment file" };
            return Err(CliError::usage(format!("a {task} checkpoint cannot be applied to a {kind}")));
        }
        let n = model.probe.input_dim();
        if let Some(w) = self.widths().into_iter().find(|&w| w != n) {
            return Err(CliError::data(format!("embeddings have width {w}, checkpoint expects {n}")));
        }
        Ok(())
    }

    pub fn evaluate(&self, model: &Model, task: Task, opts: &EvalOptions) -> Result<EvalReport> {
        self.check_model(model, task)?;
        Ok(match self {
            Corpus::Syntax { records, golds } => evaluate_syntax(model, task, records, golds, opts)?,
            Corpus::Sentiment(e) => evaluate_sentiment(model, e, opts.layer)?,
        })
    }
}
