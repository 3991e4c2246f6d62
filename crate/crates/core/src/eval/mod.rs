//! Metrics over trained probes and the report they are collected into.
//!
//! Reports serialize as pretty-printed JSON with sorted keys. Per-length and
//! per-edge tables can also be written as TSV for plotting.

pub mod metrics;
pub mod mst;
pub mod sweep;

pub use metrics::{
    average_ranks, corpus_uuas, edge_length_analysis, length_bucketed_mean, sentence_dspr, sentence_root_nspr,
    spearman, uuas, EdgeLengthReport, RelationRecall, SPEARMAN_MAX_LEN, SPEARMAN_MIN_LEN,
};
pub use mst::{mst_decode, Edge};
pub use sweep::{sweep, SweepAxis, SweepPoint, SweepReport};

use crate::data::{PunctuationSet, SentenceRecord, SentimentExample, TreeGold};
use crate::probes::{sentiment_loss, sentiment_predict, syntax_loss, Geometry, Model, SentimentItem, SyntaxItem, Task};
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use thiserror::Error;

pub const REPORT_FORMAT: &str = "hyperprobe-eval/1";
/// Width of the sentence-length buckets and the longest length covered.
pub const BUCKET_WIDTH: usize = 5;
pub const BUCKET_MAX: usize = 60;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("nothing to evaluate")]
    Empty,
    #[error("sentence {0} has no embedding attached")]
    MissingEmbedding(usize),
    #[error("metric {name} = {value} is outside its valid range")]
    OutOfRange { name: String, value: f64 },
    #[error("empty sweep grid")]
    EmptyGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub task: Task,
    pub geometry: Geometry,
    pub rank: usize,
    pub curvature: Option<f64>,
    pub layer: Option<usize>,
}

impl ConfigEcho {
    pub fn of(model: &Model, task: Task, layer: Option<usize>) -> Self {
        Self {
            task,
            geometry: model.probe.geometry(),
            rank: model.probe.rank(),
            curvature: model.probe.curvature().map(|c| c.get()),
            layer,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub punctuation: PunctuationSet,
    /// Keep punctuation tokens in every metric.
    pub include_punct: bool,
    /// Average UUAS per sentence instead of per edge.
    pub macro_uuas: bool,
    pub edge_analysis: bool,
    pub layer: Option<usize>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            punctuation: PunctuationSet::default(),
            include_punct: false,
            macro_uuas: false,
            edge_analysis: true,
            layer: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthBucket {
    pub lo: usize,
    pub hi: usize,
    pub sentences: usize,
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub format: String,
    pub config: ConfigEcho,
    /// Aggregation and tie rules the numbers were computed under.
    pub conventions: BTreeMap<String, String>,
    pub sentences: usize,
    pub metrics: BTreeMap<String, f64>,
    /// Sentences left out of a metric, by metric.
    pub skipped: BTreeMap<String, usize>,
    pub buckets: Vec<LengthBucket>,
    pub edge_lengths: Option<EdgeLengthReport>,
}

fn range_of(name: &str) -> (f64, f64) {
    let base = name.rsplit('.').next().unwrap_or(name);
    if base.contains("spr") {
        (-1.0, 1.0)
    } else if base.starts_with("loss") {
        (0.0, f64::INFINITY)
    } else {
        (0.0, 1.0)
    }
}

fn check(name: &str, value: f64) -> Result<(), EvalError> {
    let (lo, hi) = range_of(name);
    if value.is_nan() || value < lo || value > hi {
        return Err(EvalError::OutOfRange {
            name: name.to_string(),
            value,
        });
    }
    Ok(())
}

impl EvalReport {
    /// Checks every metric against its valid range: Spearman values in
    /// `[−1, 1]`, losses nonnegative, everything else in `[0, 1]`.
    pub fn validate(&self) -> Result<(), EvalError> {
        for (k, v) in &self.metrics {
            check(k, *v)?;
        }
        for b in &self.buckets {
            for (k, v) in &b.metrics {
                check(k, *v)?;
            }
        }
        if let Some(e) = &self.edge_lengths {
            for r in &e.relations {
                check("recall", r.recall)?;
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    /// Per-length table: `lo hi sentences <metric>…`; missing values are
    /// written as `NA`.
    pub fn buckets_tsv(&self) -> String {
        let names: BTreeSet<&String> = self.buckets.iter().flat_map(|b| b.metrics.keys()).collect();
        let mut out = String::from("lo\thi\tsentences");
        for n in &names {
            out.push('\t');
            out.push_str(n);
        }
        out.push('\n');
        for b in &self.buckets {
            let _ = write!(out, "{}\t{}\t{}", b.lo, b.hi, b.sentences);
            for n in &names {
                match b.metrics.get(*n) {
                    Some(v) => write!(out, "\t{v}").unwrap(),
                    None => out.push_str("\tNA"),
                }
            }
            out.push('\n');
        }
        out
    }

    /// Edge-length histogram (`kind length count`) followed by relation
    /// recall rows (`relation name mean_length gold recalled recall`).
    pub fn edge_lengths_tsv(&self) -> Option<String> {
        let e = self.edge_lengths.as_ref()?;
        let mut out = String::from("kind\tlength\tcount\n");
        for (kind, h) in [("gold", &e.gold_lengths), ("predicted", &e.predicted_lengths)] {
            for (len, n) in h {
                let _ = writeln!(out, "{kind}\t{len}\t{n}");
            }
        }
        out.push_str("\nrelation\tmean_gold_length\tgold\trecalled\trecall\n");
        for r in &e.relations {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                r.relation, r.mean_gold_length, r.gold, r.recalled, r.recall
            );
        }
        Some(out)
    }
}

fn bucket_bounds() -> Vec<(usize, usize)> {
    (1..=BUCKET_MAX).step_by(BUCKET_WIDTH).map(|lo| (lo, lo + BUCKET_WIDTH - 1)).collect()
}

/// Predicted squared distances between all token pairs of one sentence.
pub fn predicted_sq_distances(model: &Model, points: &[Vec<f64>]) -> Array2<f64> {
    let space = model.space();
    let t = points.len();
    let mut m = Array2::zeros((t, t));
    for i in 0..t {
        for j in i + 1..t {
            let d = space.sq_dist(&points[i], &points[j]);
            m[[i, j]] = d;
            m[[j, i]] = d;
        }
    }
    m
}

struct SentenceEval {
    len: usize,
    hits: usize,
    gold_edges: usize,
    predicted: BTreeSet<Edge>,
    dspr: Option<f64>,
    root: Option<bool>,
    nspr: Option<f64>,
}

fn conventions(opts: &EvalOptions) -> BTreeMap<String, String> {
    let mut c = BTreeMap::new();
    let mut put = |k: &str, v: String| {
        c.insert(k.to_string(), v);
    };
    put("uuas_average", if opts.macro_uuas { "macro (per sentence)" } else { "micro (per edge)" }.into());
    put(
        "spearman_average",
        format!("mean per sentence length, then mean over lengths {SPEARMAN_MIN_LEN}-{SPEARMAN_MAX_LEN}"),
    );
    put("punctuation", if opts.include_punct { "included" } else { "excluded" }.into());
    put("mst", "Prim over squared distances; ties by (min index, max index)".into());
    put("root", "argmin squared distance to origin; ties to the first index".into());
    put("buckets", format!("sentence length, width {BUCKET_WIDTH} over [1, {BUCKET_MAX}]"));
    c
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Distance and depth metrics for a syntax probe, plus the `task` loss.
pub fn evaluate_syntax(
    model: &Model,
    task: Task,
    records: &[SentenceRecord],
    golds: &[TreeGold],
    opts: &EvalOptions,
) -> Result<EvalReport, EvalError> {
    if records.is_empty() {
        return Err(EvalError::Empty);
    }
    let masks: Vec<Option<Vec<bool>>> = records
        .iter()
        .map(|r| (!opts.include_punct).then(|| r.punct_mask(&opts.punctuation)))
        .collect();
    let mut items = Vec::with_capacity(records.len());
    for (i, (r, g)) in records.iter().zip(golds).enumerate() {
        let emb = r.embedding.as_ref().ok_or(EvalError::MissingEmbedding(i))?;
        items.push(SyntaxItem { emb: emb.view(), gold: g });
    }
    let per: Vec<SentenceEval> = items
        .par_iter()
        .zip(records)
        .zip(&masks)
        .map(|((item, r), mask)| {
            let mask = mask.as_deref();
            let points = model.project_sentence(item.emb);
            let sq = predicted_sq_distances(model, &points);
            let depth: Vec<f64> = points.iter().map(|p| model.space().sq_norm(p)).collect();
            let predicted = mst_decode(sq.view(), mask);
            let gold = r.gold_edges(mask);
            let (root, nspr) = sentence_root_nspr(&depth, r, item.gold, mask);
            let any_kept = (0..r.len()).any(|i| !mask.is_some_and(|m| m[i]));
            SentenceEval {
                len: r.len(),
                hits: predicted.intersection(&gold).count(),
                gold_edges: gold.len(),
                predicted,
                dspr: sentence_dspr(sq.view(), item.gold, mask),
                root: any_kept.then_some(root),
                nspr,
            }
        })
        .collect();

    let mut metrics = BTreeMap::new();
    let mut skipped = BTreeMap::new();
    let counts: Vec<(usize, usize)> = per.iter().map(|s| (s.hits, s.gold_edges)).collect();
    if let Some(u) = corpus_uuas(&counts, opts.macro_uuas) {
        metrics.insert("uuas".to_string(), u);
    }
    for (name, vals) in [
        ("dspr", per.iter().map(|s| s.dspr.map(|v| (s.len, v))).collect::<Vec<_>>()),
        ("nspr", per.iter().map(|s| s.nspr.map(|v| (s.len, v))).collect()),
    ] {
        let present: Vec<(usize, f64)> = vals.iter().flatten().copied().collect();
        skipped.insert(name.to_string(), vals.len() - present.len());
        if let Some(v) = length_bucketed_mean(&present, SPEARMAN_MIN_LEN, SPEARMAN_MAX_LEN) {
            metrics.insert(name.to_string(), v);
        }
    }
    if let Some(r) = mean(per.iter().filter_map(|s| s.root).map(|h| f64::from(u8::from(h)))) {
        metrics.insert("root".to_string(), r);
    }
    if task != Task::Sentiment {
        metrics.insert(format!("loss_{task}"), syntax_loss(task, &items, model, false).loss);
    }

    let buckets = bucket_bounds()
        .into_iter()
        .map(|(lo, hi)| {
            let inb: Vec<&SentenceEval> = per.iter().filter(|s| (lo..=hi).contains(&s.len)).collect();
            let mut m = BTreeMap::new();
            let c: Vec<(usize, usize)> = inb.iter().map(|s| (s.hits, s.gold_edges)).collect();
            if let Some(u) = corpus_uuas(&c, opts.macro_uuas) {
                m.insert("uuas".to_string(), u);
            }
            if let Some(v) = mean(inb.iter().filter_map(|s| s.dspr)) {
                m.insert("dspr".to_string(), v);
            }
            if let Some(v) = mean(inb.iter().filter_map(|s| s.nspr)) {
                m.insert("nspr".to_string(), v);
            }
            if let Some(v) = mean(inb.iter().filter_map(|s| s.root).map(|h| f64::from(u8::from(h)))) {
                m.insert("root".to_string(), v);
            }
            LengthBucket { lo, hi, sentences: inb.len(), metrics: m }
        })
        .collect();

    let edge_lengths = opts.edge_analysis.then(|| {
        let predicted: Vec<BTreeSet<Edge>> = per.iter().map(|s| s.predicted.clone()).collect();
        edge_length_analysis(records, &predicted, &masks)
    });
    let report = EvalReport {
        format: REPORT_FORMAT.to_string(),
        config: ConfigEcho::of(model, task, opts.layer),
        conventions: conventions(opts),
        sentences: records.len(),
        metrics,
        skipped,
        buckets,
        edge_lengths,
    };
    report.validate()?;
    Ok(report)
}

/// Fraction of examples whose prediction matches the label; exact logit
/// ties predict negative.
pub fn sentiment_accuracy(model: &Model, examples: &[SentimentExample]) -> Result<f64, EvalError> {
    if examples.is_empty() {
        return Err(EvalError::Empty);
    }
    let correct: Vec<bool> = examples
        .par_iter()
        .enumerate()
        .map(|(i, e)| {
            let emb = e.embedding.as_ref().ok_or(EvalError::MissingEmbedding(i))?;
            Ok(sentiment_predict(emb.view(), model) == e.label)
        })
        .collect::<Result<_, EvalError>>()?;
    Ok(correct.iter().filter(|&&c| c).count() as f64 / examples.len() as f64)
}

pub fn evaluate_sentiment(model: &Model, examples: &[SentimentExample], layer: Option<usize>) -> Result<EvalReport, EvalError> {
    if examples.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut items = Vec::with_capacity(examples.len());
    for (i, e) in examples.iter().enumerate() {
        let emb = e.embedding.as_ref().ok_or(EvalError::MissingEmbedding(i))?;
        items.push(SentimentItem { emb: emb.view(), label: e.label });
    }
    let correct: Vec<bool> = items.par_iter().map(|it| sentiment_predict(it.emb, model) == it.label).collect();
    let mut metrics = BTreeMap::new();
    metrics.insert(
        "accuracy".to_string(),
        correct.iter().filter(|&&c| c).count() as f64 / correct.len() as f64,
    );
    metrics.insert("loss_sentiment".to_string(), sentiment_loss(&items, model, false).loss);
    let buckets = bucket_bounds()
        .into_iter()
        .map(|(lo, hi)| {
            let inb: Vec<bool> = items
                .iter()
                .zip(&correct)
                .filter(|(it, _)| (lo..=hi).contains(&it.emb.nrows()))
                .map(|(_, &c)| c)
                .collect();
            let mut m = BTreeMap::new();
            if let Some(a) = mean(inb.iter().map(|&c| f64::from(u8::from(c)))) {
                m.insert("accuracy".to_string(), a);
            }
            LengthBucket { lo, hi, sentences: inb.len(), metrics: m }
        })
        .collect();
    let mut conv = BTreeMap::new();
    conv.insert("tie".to_string(), "equal logits predict negative".to_string());
    conv.insert("buckets".to_string(), format!("sentence length, width {BUCKET_WIDTH} over [1, {BUCKET_MAX}]"));
    let report = EvalReport {
        format: REPORT_FORMAT.to_string(),
        config: ConfigEcho::of(model, Task::Sentiment, layer),
        conventions: conv,
        sentences: examples.len(),
        metrics,
        skipped: BTreeMap::new(),
        buckets,
        edge_lengths: None,
    };
    report.validate()?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{tree_metrics, Polarity};
    use crate::geometry::Curvature;
    use crate::probes::{EuclideanProbe, PoincareProbe, Probe, SentimentHeads, Space};
    use crate::synthetic::random_heads;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity_euclid(n: usize) -> Model {
        Model::new(Probe::Euclidean(EuclideanProbe { b1: Array2::eye(n), second: None }))
    }

    /// Embeddings whose squared Euclidean distances are the tree distances:
    /// one orthonormal axis per edge, summed along the root path.
    fn exact_tree(t: usize, rng: &mut ChaCha8Rng) -> SentenceRecord {
        let head = random_heads(rng, t);
        let mut r = SentenceRecord::from_heads(vec!["w".into(); t], head.clone());
        let mut emb = Array2::zeros((t, t));
        for i in 0..t {
            let mut node = i;
            while head[node] != 0 {
                emb[[i, node]] = 1.0;
                node = head[node] - 1;
            }
        }
        r.embedding = Some(emb);
        r
    }

    #[test]
    fn gold_geometry_scores_perfectly() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let records: Vec<_> = (0..30).map(|s| exact_tree(5 + s % 8, &mut rng)).collect();
        let golds: Vec<_> = records.iter().map(tree_metrics).collect();
        // pad every sentence to the same width
        let width = 12;
        let records: Vec<_> = records
            .into_iter()
            .map(|mut r| {
                let e = r.embedding.take().unwrap();
                let mut p = Array2::zeros((e.nrows(), width));
                p.slice_mut(ndarray::s![.., ..e.ncols()]).assign(&e);
                r.embedding = Some(p);
                r
            })
            .collect();
        let rep = evaluate_syntax(&identity_euclid(width), Task::Joint, &records, &golds, &EvalOptions::default()).unwrap();
        for m in ["uuas", "dspr", "root", "nspr"] {
            assert_eq!(rep.metrics[m], 1.0, "{m}");
        }
        assert_eq!(rep.metrics["loss_joint"], 0.0);
        assert!(rep.edge_lengths.as_ref().unwrap().relations.iter().all(|r| r.recall == 1.0));
        let back = EvalReport::from_json(&rep.to_json()).unwrap();
        assert_eq!(back, rep);
        assert!(rep.buckets_tsv().starts_with("lo\thi\tsentences\tdspr\tnspr\troot\tuuas\n"));
        assert_eq!(rep.buckets.len(), 12);
    }

    #[test]
    fn out_of_range_metric_fails_validation() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let r = exact_tree(6, &mut rng);
        let g = vec![tree_metrics(&r)];
        let mut rep = evaluate_syntax(&identity_euclid(6), Task::Distance, &[r], &g, &EvalOptions::default()).unwrap();
        rep.metrics.insert("uuas".into(), 1.5);
        assert!(rep.validate().is_err());
        rep.metrics.insert("uuas".into(), 1.0);
        rep.metrics.insert("dspr".into(), -0.5);
        assert!(rep.validate().is_ok());
    }

    #[test]
    fn include_punct_changes_the_edge_universe() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut r = exact_tree(6, &mut rng);
        r.upos[5] = "PUNCT".into();
        let g = vec![tree_metrics(&r)];
        let m = identity_euclid(6);
        let without = evaluate_syntax(&m, Task::Distance, std::slice::from_ref(&r), &g, &EvalOptions::default()).unwrap();
        let with = evaluate_syntax(&m, Task::Distance, &[r], &g, &EvalOptions { include_punct: true, ..Default::default() }).unwrap();
        let total = |rep: &EvalReport| rep.edge_lengths.as_ref().unwrap().gold_lengths.values().sum::<usize>();
        assert_eq!(total(&with), 5);
        assert!(total(&without) < 5);
    }

    #[test]
    fn sentiment_accuracy_counts_ties_as_negative() {
        let probe = Probe::Poincare(PoincareProbe {
            p: Array2::eye(2),
            q: Array2::eye(2),
            c: Curvature::new(1.0).unwrap(),
            use_q: false,
        });
        let m = Model::with_heads(probe, SentimentHeads::fixed_positions(2, Space::Poincare(1.0), false));
        let ex = |label| SentimentExample {
            tokens: vec!["x".into()],
            label,
            embedding: Some(Array2::zeros((1, 2))),
        };
        assert_eq!(sentiment_accuracy(&m, &[ex(Polarity::Negative)]).unwrap(), 1.0);
        let rep = evaluate_sentiment(&m, &[ex(Polarity::Negative), ex(Polarity::Positive)], Some(9)).unwrap();
        assert_eq!(rep.metrics["accuracy"], 0.5);
        assert_eq!(rep.config.layer, Some(9));
        assert!(sentiment_accuracy(&m, &[]).is_err());
    }
}
