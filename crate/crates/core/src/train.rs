//! Mini-batch training with epoch-level learning-rate decay and dev-loss
//! model selection.
//!
//! Training log format: one line per epoch, tab-separated `key=value`
//! fields in a fixed order:
//!
//! ```text
//! epoch=3	train_loss=0.41	dev_loss=0.44	lr=0.001
//! ```
//!
//! Floats use the shortest representation that round-trips. Wall-clock time
//! is kept on [`EpochRecord`] and logged, but stays out of the text so the
//! log is reproducible.

use crate::data::{tree_metrics, SentenceRecord, SentimentExample, TreeGold};
use crate::geometry::Curvature;
use crate::optim::{adam_step, riemannian_adam_step_raw, AdamState, OptimError};
use crate::probes::{
    sentiment_loss, syntax_loss, Activation, Checkpoint, EuclideanProbe, Geometry, LossGrad, Model, ParamTag,
    PoincareProbe, Probe, SentimentHeads, SentimentItem, SyntaxItem, Task,
};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::time::Instant;
use thiserror::Error;

/// Learning rate below which training stops.
pub const MIN_LR: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("{0} corpus is empty")]
    EmptyCorpus(&'static str),
    #[error("sentence {0} has no embedding attached")]
    MissingEmbedding(usize),
    #[error("embedding width {found} differs from {expected}")]
    Width { expected: usize, found: usize },
    #[error(transparent)]
    Optim(#[from] OptimError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub task: Task,
    pub geometry: Geometry,
    pub rank: usize,
    pub curvature: f64,
    pub lr: f64,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub decay_factor: f64,
    pub patience: usize,
    /// Poincaré only: apply the Möbius matrix `Q` after the exponential map.
    /// Off by default: `Q ⊗ exp_0(u) = exp_0(Q·u)`, so `Q` only
    /// reparameterizes `P` and slows training from a small init.
    pub use_q: bool,
    /// Euclidean only: add a second `k × k` layer behind this activation.
    pub nonlinearity: Option<Activation>,
    /// Sentiment only: learn the meta-embeddings instead of fixing them.
    pub trainable_heads: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            task: Task::Distance,
            geometry: Geometry::Poincare,
            rank: 64,
            curvature: 1.0,
            lr: crate::optim::DEFAULT_LR,
            max_epochs: 40,
            batch_size: 20,
            seed: 0,
            decay_factor: 0.1,
            patience: 1,
            use_q: false,
            nonlinearity: None,
            trainable_heads: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if self.rank == 0 {
            return bad("rank must be positive");
        }
        if !(self.curvature.is_finite() && self.curvature > 0.0) {
            return bad("curvature must be positive");
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad("learning rate must be positive");
        }
        if self.max_epochs == 0 || self.batch_size == 0 || self.patience == 0 {
            return bad("epochs, batch size and patience must be positive");
        }
        if !(self.decay_factor > 0.0 && self.decay_factor < 1.0) {
            return bad("decay factor must lie in (0, 1)");
        }
        if self.geometry == Geometry::Poincare && self.nonlinearity.is_some() {
            return bad("nonlinearity applies to euclidean probes only");
        }
        Ok(())
    }

    /// Freshly initialized model for inputs of width `n`.
    pub fn init_model(&self, n: usize) -> Model {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let probe = match self.geometry {
            Geometry::Poincare => {
                let c = Curvature::new(self.curvature).expect("validated curvature");
                Probe::Poincare(PoincareProbe::init(n, self.rank, c, self.use_q, &mut rng))
            }
            Geometry::Euclidean => Probe::Euclidean(EuclideanProbe::init(n, self.rank, self.nonlinearity, &mut rng)),
        };
        if self.task == Task::Sentiment {
            let heads = SentimentHeads::fixed_positions(self.rank, probe.space(), self.trainable_heads);
            Model::with_heads(probe, heads)
        } else {
            Model::new(probe)
        }
    }
}

/// Sentences with their embeddings, ready for loss evaluation.
#[derive(Debug, Clone)]
pub enum Dataset<'a> {
    Syntax(Vec<SyntaxItem<'a>>),
    Sentiment(Vec<SentimentItem<'a>>),
}

fn check_width(width: &mut Option<usize>, found: usize) -> Result<(), TrainError> {
    match *width {
        Some(expected) if expected != found => Err(TrainError::Width { expected, found }),
        _ => {
            *width = Some(found);
            Ok(())
        }
    }
}

/// Gold tree metrics for every record, in order.
pub fn gold_metrics(records: &[SentenceRecord]) -> Vec<TreeGold> {
    records.iter().map(tree_metrics).collect()
}

impl<'a> Dataset<'a> {
    pub fn syntax(records: &'a [SentenceRecord], golds: &'a [TreeGold]) -> Result<Self, TrainError> {
        let mut width = None;
        let mut items = Vec::with_capacity(records.len());
        for (i, (r, g)) in records.iter().zip(golds).enumerate() {
            let emb = r.embedding.as_ref().ok_or(TrainError::MissingEmbedding(i))?;
            check_width(&mut width, emb.ncols())?;
            items.push(SyntaxItem { emb: emb.view(), gold: g });
        }
        Ok(Dataset::Syntax(items))
    }

    pub fn sentiment(examples: &'a [SentimentExample]) -> Result<Self, TrainError> {
        let mut width = None;
        let mut items = Vec::with_capacity(examples.len());
        for (i, e) in examples.iter().enumerate() {
            let emb = e.embedding.as_ref().ok_or(TrainError::MissingEmbedding(i))?;
            check_width(&mut width, emb.ncols())?;
            items.push(SentimentItem { emb: emb.view(), label: e.label });
        }
        Ok(Dataset::Sentiment(items))
    }

    pub fn len(&self) -> usize {
        match self {
            Dataset::Syntax(v) => v.len(),
            Dataset::Sentiment(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input_dim(&self) -> Option<usize> {
        match self {
            Dataset::Syntax(v) => v.first().map(|i| i.emb.ncols()),
            Dataset::Sentiment(v) => v.first().map(|i| i.emb.ncols()),
        }
    }

    /// Loss over the sentences at `indices` (all sentences when `None`).
    pub fn loss(&self, task: Task, indices: Option<&[usize]>, model: &Model, with_grad: bool) -> LossGrad {
        match self {
            Dataset::Syntax(v) => match indices {
                Some(ix) => syntax_loss(task, &ix.iter().map(|&i| v[i]).collect::<Vec<_>>(), model, with_grad),
                None => syntax_loss(task, v, model, with_grad),
            },
            Dataset::Sentiment(v) => match indices {
                Some(ix) => sentiment_loss(&ix.iter().map(|&i| v[i]).collect::<Vec<_>>(), model, with_grad),
                None => sentiment_loss(v, model, with_grad),
            },
        }
    }
}

/// Sentence indices `0..len` shuffled with a stream derived from
/// `(seed, epoch)` and cut into consecutive batches; the last may be short.
pub fn make_batches(len: usize, batch_size: usize, seed: u64, epoch: usize) -> Vec<Vec<usize>> {
    assert!(batch_size >= 1, "batch size must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64 + 1);
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(&mut rng);
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_loss: f64,
    pub lr: f64,
    pub wall_s: f64,
}

impl fmt::Display for EpochRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "epoch={}\ttrain_loss={}\tdev_loss={}\tlr={}",
            self.epoch, self.train_loss, self.dev_loss, self.lr
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxEpochs,
    LrFloor,
    /// A non-finite loss or parameter appeared during this epoch.
    Diverged { epoch: usize },
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Checkpoint with the lowest dev loss (or the last finite state when
    /// training diverged before any epoch finished).
    pub best: Checkpoint,
    pub best_dev_loss: f64,
    pub log: Vec<EpochRecord>,
    pub stop: StopReason,
}

impl TrainOutcome {
    pub fn log_text(&self) -> String {
        self.log.iter().map(|r| format!("{r}\n")).collect()
    }
}

fn step(model: &mut Model, grad: &Model, states: &mut [AdamState]) -> Result<(), OptimError> {
    let info = model.param_info();
    let c = model.probe.curvature().map(Curvature::get);
    for (((info, block), g), state) in info.iter().zip(model.blocks_mut()).zip(grad.blocks()).zip(states) {
        if !info.trainable {
            assert!(g.iter().all(|&v| v == 0.0), "frozen block {} received a nonzero gradient", info.name);
            continue;
        }
        match info.tag {
            ParamTag::Euclidean => adam_step(block, g, state)?,
            ParamTag::Ball => riemannian_adam_step_raw(block, c.expect("ball parameters need a curvature"), g, state)?,
        }
    }
    Ok(())
}

/// Trains a fresh probe on `train`, selecting the epoch with the lowest loss
/// on `dev`.
pub fn train(cfg: &TrainConfig, train: &Dataset<'_>, dev: &Dataset<'_>) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    let matches_task = matches!(
        (cfg.task, train),
        (Task::Sentiment, Dataset::Sentiment(_)) | (Task::Distance | Task::Depth | Task::Joint, Dataset::Syntax(_))
    );
    let same_kind = matches!(
        (train, dev),
        (Dataset::Syntax(_), Dataset::Syntax(_)) | (Dataset::Sentiment(_), Dataset::Sentiment(_))
    );
    if !matches_task || !same_kind {
        return Err(TrainError::Config(format!("corpus kind does not match task {}", cfg.task)));
    }
    let n = train.input_dim().ok_or(TrainError::EmptyCorpus("training"))?;
    let dn = dev.input_dim().ok_or(TrainError::EmptyCorpus("dev"))?;
    if dn != n {
        return Err(TrainError::Width { expected: n, found: dn });
    }

    let mut model = cfg.init_model(n);
    let mut states: Vec<AdamState> = model.blocks().iter().map(|b| AdamState::new(b.len(), cfg.lr)).collect();
    let mut lr = cfg.lr;
    let mut best: Option<(Checkpoint, f64)> = None;
    let mut log = Vec::new();
    let mut bad_epochs = 0;
    let mut stop = StopReason::MaxEpochs;
    let start = Instant::now();

    let snapshot = |model: &Model, states: &[AdamState], epoch: usize| Checkpoint {
        task: cfg.task,
        model: model.clone(),
        optimizer: states.to_vec(),
        epoch: epoch as u32,
    };

    'epochs: for epoch in 1..=cfg.max_epochs {
        let mut total = 0.0;
        let mut counted = 0;
        for batch in make_batches(train.len(), cfg.batch_size, cfg.seed, epoch) {
            let lg = train.loss(cfg.task, Some(&batch), &model, true);
            if lg.count == 0 {
                continue;
            }
            let before = model.clone();
            let ok = lg.loss.is_finite() && lg.grad.is_finite() && step(&mut model, &lg.grad, &mut states).is_ok();
            if !ok || !model.is_finite() {
                log::warn!("non-finite loss or update in epoch {epoch}; stopping");
                stop = StopReason::Diverged { epoch };
                if best.is_none() {
                    best = Some((snapshot(&before, &states, epoch - 1), f64::NAN));
                }
                break 'epochs;
            }
            total += lg.loss * lg.count as f64;
            counted += lg.count;
        }
        let dev_loss = dev.loss(cfg.task, None, &model, false).loss;
        let record = EpochRecord {
            epoch,
            train_loss: if counted > 0 { total / counted as f64 } else { 0.0 },
            dev_loss,
            lr,
            wall_s: start.elapsed().as_secs_f64(),
        };
        log::info!("{record}\twall_s={:.3}", record.wall_s);
        log.push(record);
        if !dev_loss.is_finite() {
            stop = StopReason::Diverged { epoch };
            if best.is_none() {
                best = Some((snapshot(&model, &states, epoch), f64::NAN));
            }
            break;
        }
        if best.as_ref().is_none_or(|(_, b)| dev_loss < *b) {
            best = Some((snapshot(&model, &states, epoch), dev_loss));
            bad_epochs = 0;
        } else {
            bad_epochs += 1;
            if bad_epochs >= cfg.patience {
                lr *= cfg.decay_factor;
                states.iter_mut().for_each(|s| s.lr = lr);
                bad_epochs = 0;
                if lr < MIN_LR {
                    stop = StopReason::LrFloor;
                    break;
                }
            }
        }
    }
    let (best, best_dev_loss) = best.expect("at least one epoch or snapshot");
    Ok(TrainOutcome {
        best,
        best_dev_loss,
        log,
        stop,
    })
}
