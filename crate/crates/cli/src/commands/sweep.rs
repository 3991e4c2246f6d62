use super::eval::write_report;
use super::train::{check_diverged, fit};
use super::{create_dir, write_text};
use crate::args::{Axis, SweepArgs};
use crate::corpus::Corpus;
use crate::error::{CliError, Result};
use crate::manifest::RunManifest;
use crate::settings::FileConfig;
use hyperprobe::eval::{sweep, EvalOptions, EvalReport, SweepAxis};
use hyperprobe::probes::{Model, Task};
use hyperprobe::train::TrainConfig;
use serde_json::json;
use std::path::{Path, PathBuf};

const LAYER_SLOT: &str = "{layer}";

struct Inputs {
    text: PathBuf,
    dev_text: PathBuf,
    sentiment: bool,
    max_len: usize,
}

impl Inputs {
    fn load(&self, emb: &Path, dev_emb: &Path) -> Result<(Corpus, Corpus)> {
        if self.sentiment {
            Ok((Corpus::sentiment(&self.text, emb, self.max_len)?, Corpus::sentiment(&self.dev_text, dev_emb, self.max_len)?))
        } else {
            Ok((Corpus::syntax(&self.text, emb, self.max_len)?, Corpus::syntax(&self.dev_text, dev_emb, self.max_len)?))
        }
    }

    fn record(&self, m: &mut RunManifest, emb: &Path, dev_emb: &Path) -> Result<()> {
        m.input("text", &self.text)?;
        m.input("dev_text", &self.dev_text)?;
        m.input("emb", emb)?;
        m.input("dev_emb", dev_emb)
    }
}

fn grid(a: &SweepArgs) -> (SweepAxis, Vec<f64>, &'static str) {
    match a.axis {
        Axis::Rank => (SweepAxis::Rank, a.ranks.iter().map(|&v| v as f64).collect(), "--ranks"),
        Axis::Curvature => (SweepAxis::Curvature, a.curvatures.clone(), "--curvatures"),
        Axis::Layer => (SweepAxis::Layer, a.layers.iter().map(|&v| v as f64).collect(), "--layers"),
        Axis::SentenceLength => (SweepAxis::SentenceLength, a.lengths.iter().map(|&v| v as f64).collect(), "--lengths"),
    }
}

fn layer_path(template: &str, layer: f64) -> PathBuf {
    PathBuf::from(template.replace(LAYER_SLOT, &(layer as usize).to_string()))
}

pub fn run(a: &SweepArgs, file: &FileConfig) -> Result<()> {
    let (axis, values, flag) = grid(a);
    if values.is_empty() {
        return Err(CliError::usage(format!("empty sweep grid: give {flag} for the {} axis", axis.as_str())));
    }
    if axis == SweepAxis::SentenceLength && values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::usage("--lengths must be strictly increasing"));
    }
    let inputs = match (&a.treebank, &a.dev_treebank, &a.labels, &a.dev_labels) {
        (Some(t), Some(d), None, None) => Inputs { text: t.clone(), dev_text: d.clone(), sentiment: false, max_len: 0 },
        (None, None, Some(l), Some(d)) => Inputs { text: l.clone(), dev_text: d.clone(), sentiment: true, max_len: 0 },
        _ => return Err(CliError::usage("give --treebank and --dev-treebank, or --labels and --dev-labels")),
    };
    let inputs = Inputs { max_len: file.max_len(a.train.max_len), ..inputs };
    let task = if inputs.sentiment { Some(Task::Sentiment) } else { a.task.or(file.task) };
    if !inputs.sentiment && task == Some(Task::Sentiment) {
        return Err(CliError::usage("the sentiment task needs --labels"));
    }
    let base = file.train_config(&a.train, task, a.fixed_heads)?;
    let opts = EvalOptions {
        punctuation: file.punctuation(),
        include_punct: file.include_punct(a.include_punct),
        macro_uuas: file.macro_uuas(false),
        ..Default::default()
    };

    let embs = |value: f64| -> Result<(PathBuf, PathBuf)> {
        if axis == SweepAxis::Layer {
            match (&a.emb_template, &a.dev_emb_template) {
                (Some(t), Some(d)) if t.contains(LAYER_SLOT) && d.contains(LAYER_SLOT) => {
                    Ok((layer_path(t, value), layer_path(d, value)))
                }
                _ => Err(CliError::usage("layer sweeps need --emb-template and --dev-emb-template containing {layer}")),
            }
        } else {
            match (&a.emb, &a.dev_emb) {
                (Some(e), Some(d)) => Ok((e.clone(), d.clone())),
                _ => Err(CliError::usage("give --emb and --dev-emb")),
            }
        }
    };
    // fail fast on flag errors and, for fixed embeddings, on data errors
    let (emb0, dev_emb0) = embs(values[0])?;
    let fixed = if axis == SweepAxis::Layer { None } else { Some(inputs.load(&emb0, &dev_emb0)?) };
    create_dir(&a.out)?;

    let mut first_err: Option<CliError> = None;
    let mut length_model: Option<Model> = None;
    let mut point = |cfg: &TrainConfig, value: f64| -> Result<EvalReport> {
        let dir = a.out.join(format!("{}_{value}", axis.as_str()));
        let (emb, dev_emb) = embs(value)?;
        let echo = json!({ "axis": axis, "value": value, "train": cfg, "max_len": inputs.max_len });
        let mut m = RunManifest::start("sweep", Some(cfg.seed), &echo);
        inputs.record(&mut m, &emb, &dev_emb)?;
        let loaded;
        let (train, dev) = match &fixed {
            Some((t, d)) => (t, d),
            None => {
                loaded = inputs.load(&emb, &dev_emb)?;
                (&loaded.0, &loaded.1)
            }
        };
        let mut opts = opts.clone();
        let report = if axis == SweepAxis::SentenceLength {
            if length_model.is_none() {
                let shared = a.out.join("model");
                let mut mm = RunManifest::start("sweep", Some(cfg.seed), &json!({ "train": cfg, "max_len": inputs.max_len }));
                inputs.record(&mut mm, &emb, &dev_emb)?;
                let outcome = fit(cfg, train, dev, &shared, &mut mm)?;
                mm.finish(&shared)?;
                check_diverged(&outcome)?;
                length_model = Some(outcome.best.model);
            }
            let i = values.iter().position(|&v| v == value).expect("value comes from the grid");
            let lo = if i == 0 { 1 } else { values[i - 1] as usize + 1 };
            let subset = dev.with_lengths(lo, value as usize);
            create_dir(&dir)?;
            subset.evaluate(length_model.as_ref().expect("trained above"), cfg.task, &opts)?
        } else {
            if axis == SweepAxis::Layer {
                opts.layer = Some(value as usize);
            }
            let outcome = fit(cfg, train, dev, &dir, &mut m)?;
            check_diverged(&outcome)?;
            dev.evaluate(&outcome.best.model, cfg.task, &opts)?
        };
        write_report(&report, &dir, &mut m)?;
        m.finish(&dir)?;
        Ok(report)
    };
    let report = sweep(axis, &values, &base, |cfg, value| {
        point(cfg, value).map_err(|e| {
            let note = e.to_string();
            first_err.get_or_insert(e);
            note
        })
    })?;

    let mut m = RunManifest::start(
        "sweep",
        Some(base.seed),
        &json!({ "axis": axis, "grid": values, "base": base, "max_len": inputs.max_len }),
    );
    let json_path = a.out.join("sweep.json");
    write_text(&json_path, &report.to_json())?;
    m.output("sweep", &json_path)?;
    let tsv_path = a.out.join("sweep.tsv");
    let tsv = report.to_tsv();
    write_text(&tsv_path, &tsv)?;
    m.output("table", &tsv_path)?;
    m.finish(&a.out)?;
    print!("{tsv}");
    match first_err {
        Some(e) if report.points.iter().all(|p| p.report.is_none()) => Err(e),
        _ => Ok(()),
    }
}
