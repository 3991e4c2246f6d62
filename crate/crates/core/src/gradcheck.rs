//! Finite-difference verification of every loss variant on random
//! micro-sentences.

use crate::data::{tree_metrics, Polarity, SentenceRecord, TreeGold};
use crate::geometry::raw;
use crate::optim::{finite_difference_check, DEFAULT_FD_STEP};
use crate::probes::{sentiment_loss, syntax_loss, Activation, Geometry, Model, SentimentItem, Space, SyntaxItem, Task};
use crate::synthetic::random_heads;
use crate::train::TrainConfig;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

pub const DEFAULT_TOL: f64 = 1e-4;
const INPUT_DIM: usize = 5;
const RANK: usize = 3;
const SENTENCES: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Variant {
    pub task: Task,
    pub geometry: Geometry,
    /// Euclidean second layer, if any.
    pub nonlinearity: Option<Activation>,
    pub curvature: f64,
    pub use_q: bool,
    pub trainable_heads: bool,
}

impl Variant {
    pub fn label(&self) -> String {
        let mut s = format!("{}/{}", self.task, self.geometry);
        match self.geometry {
            Geometry::Poincare => {
                s += &format!("/c={}", self.curvature);
                if self.use_q {
                    s += "/Q";
                }
            }
            Geometry::Euclidean => {
                s += &match self.nonlinearity {
                    Some(a) => format!("/2-layer-{a}"),
                    None => "/linear".to_string(),
                };
            }
        }
        if self.task == Task::Sentiment {
            s += if self.trainable_heads { "/trainable-heads" } else { "/fixed-heads" };
        }
        s
    }
}

/// Every task × geometry × nonlinearity × curvature combination, with and
/// without `Q`, and trainable and fixed heads for sentiment.
pub fn all_variants() -> Vec<Variant> {
    let mut shapes = Vec::new();
    for c in [0.1, 1.0] {
        for use_q in [false, true] {
            shapes.push((Geometry::Poincare, None, c, use_q));
        }
    }
    shapes.push((Geometry::Euclidean, None, 1.0, false));
    for &a in Activation::ALL {
        shapes.push((Geometry::Euclidean, Some(a), 1.0, false));
    }
    let mut out = Vec::new();
    for &task in Task::ALL {
        let heads: &[bool] = if task == Task::Sentiment { &[true, false] } else { &[false] };
        for &(geometry, nonlinearity, curvature, use_q) in &shapes {
            for &trainable_heads in heads {
                out.push(Variant {
                    task,
                    geometry,
                    nonlinearity,
                    curvature,
                    use_q,
                    trainable_heads,
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct GradResult {
    pub variant: String,
    pub max_rel_error: f64,
    pub coordinates: usize,
    /// Fixed meta-embeddings received an exactly zero gradient (always true
    /// when heads are trainable or absent).
    pub frozen_heads_zero: bool,
    pub passed: bool,
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize, std: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || {
        let z: f64 = StandardNormal.sample(rng);
        std * z
    })
}

fn random_model(v: &Variant, rng: &mut ChaCha8Rng) -> Model {
    let cfg = TrainConfig {
        task: v.task,
        geometry: v.geometry,
        rank: RANK,
        curvature: v.curvature,
        use_q: v.use_q,
        nonlinearity: v.nonlinearity,
        trainable_heads: v.trainable_heads,
        seed: rng.random(),
        ..Default::default()
    };
    let mut model = cfg.init_model(INPUT_DIM);
    // move away from the small init so every nonlinearity is exercised
    for b in model.blocks_mut().into_iter().take(2) {
        b.iter_mut().for_each(|x| *x = rng.random_range(-0.6..0.6));
    }
    let space = model.space();
    if let Some(h) = model.heads.as_mut() {
        for head in [&mut h.pos, &mut h.neg] {
            // perturb in the tangent space so the head stays off the boundary
            let mut u = match space {
                Space::Poincare(c) => raw::log0(head, c),
                Space::Euclidean => head.clone(),
            };
            u.iter_mut().for_each(|x| *x += rng.random_range(-0.2..0.2));
            *head = match space {
                Space::Poincare(c) => raw::exp0(&u, c),
                Space::Euclidean => u,
            };
        }
    }
    model
}

/// Checks one variant. `corrupt` perturbs the analytic gradient so the
/// gate can be seen to fail.
pub fn check_variant(v: &Variant, seed: u64, tol: f64, corrupt: bool) -> GradResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = random_model(v, &mut rng);
    let lens: Vec<usize> = (0..SENTENCES).map(|_| rng.random_range(3..=6)).collect();
    let embs: Vec<Array2<f64>> = lens.iter().map(|&t| gaussian(&mut rng, t, INPUT_DIM, 1.0)).collect();
    let golds: Vec<TreeGold> = lens
        .iter()
        .map(|&t| tree_metrics(&SentenceRecord::from_heads(vec!["w".into(); t], random_heads(&mut rng, t))))
        .collect();
    let labels: Vec<Polarity> = (0..SENTENCES)
        .map(|i| if i % 2 == 0 { Polarity::Positive } else { Polarity::Negative })
        .collect();

    let eval = |m: &Model, with_grad: bool| match v.task {
        Task::Sentiment => {
            let items: Vec<_> = embs
                .iter()
                .zip(&labels)
                .map(|(e, &label)| SentimentItem { emb: e.view(), label })
                .collect();
            sentiment_loss(&items, m, with_grad)
        }
        task => {
            let items: Vec<_> = embs.iter().zip(&golds).map(|(e, g)| SyntaxItem { emb: e.view(), gold: g }).collect();
            syntax_loss(task, &items, m, with_grad)
        }
    };
    let lg = eval(&model, true);
    let frozen_heads_zero = match (&lg.grad.heads, v.trainable_heads) {
        (Some(h), false) => h.pos.iter().chain(&h.neg).all(|&g| g == 0.0),
        _ => true,
    };
    let params = model.trainable_flat();
    let mut analytic = lg.grad.trainable_flat();
    if corrupt {
        analytic[0] = analytic[0] * 1.1 + 1e-3;
    }
    let mut scratch = model.clone();
    let fd = finite_difference_check(
        |x| {
            scratch.set_trainable_flat(x);
            eval(&scratch, false).loss
        },
        &params,
        &analytic,
        DEFAULT_FD_STEP,
    );
    let (max_rel_error, coordinates) = match fd {
        Ok(r) => (r.max_rel_error, r.coordinates),
        Err(_) => (f64::INFINITY, params.len()),
    };
    GradResult {
        variant: v.label(),
        max_rel_error,
        coordinates,
        frozen_heads_zero,
        passed: max_rel_error < tol && frozen_heads_zero,
    }
}

/// Checks every variant, each on its own seed stream derived from `seed`.
pub fn run_all(seed: u64, tol: f64, corrupt: bool) -> Vec<GradResult> {
    all_variants()
        .par_iter()
        .enumerate()
        .map(|(i, v)| check_variant(v, seed.wrapping_mul(1_000_003).wrapping_add(i as u64), tol, corrupt))
        .collect()
}
