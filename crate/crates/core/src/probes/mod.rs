//! Probe parameters, forward projections, losses and analytic gradients.
//!
//! A Poincaré probe maps an embedding `h` to `q = Q ⊗_c exp_0(Pᵀh)`; a
//! Euclidean probe maps it to `B1ᵀh`, optionally followed by a nonlinearity
//! and a second `k × k` map. Syntax losses compare squared predicted
//! distances with tree distances and depths; the sentiment loss classifies
//! sentences by summed distances to two meta-embeddings.
//!
//! Gradients are derived by hand and share the [`Model`] layout, so a
//! gradient is simply a `Model` filled with partial derivatives.

mod checkpoint;
mod forward;
mod loss;
mod rank;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint, Checkpoint, CheckpointError};
pub use forward::{Forward, Space};
pub use loss::{
    depth_loss, distance_loss, joint_loss, sentiment_logits, sentiment_loss, sentiment_predict, syntax_loss,
    LossGrad, SentimentItem, SyntaxItem,
};
pub use rank::{rank_word_sentiment, WordGap};

use crate::geometry::{raw, Curvature};
use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Half-width of the uniform initialization interval.
pub const INIT_SCALE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Distance,
    Depth,
    Joint,
    Sentiment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    Euclidean,
    Poincare,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    None,
    Relu,
    Sigmoid,
    Tanh,
}

macro_rules! text_enum {
    ($ty:ident { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl $ty {
            pub const ALL: &'static [$ty] = &[$($ty::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $($ty::$variant => $name),+ }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($name => Ok($ty::$variant),)+
                    other => Err(format!("unknown {} {other:?}", stringify!($ty).to_lowercase())),
                }
            }
        }
    };
}

text_enum!(Task { Distance => "distance", Depth => "depth", Joint => "joint", Sentiment => "sentiment" });
text_enum!(Geometry { Euclidean => "euclidean", Poincare => "poincare" });
text_enum!(Activation { None => "none", Relu => "relu", Sigmoid => "sigmoid", Tanh => "tanh" });

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::None => x,
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative at `x`; ReLU uses 0 at the kink.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::None => 1.0,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                let s = 1.0 / (1.0 + (-x).exp());
                s * (1.0 - s)
            }
            Activation::Tanh => 1.0 - x.tanh().powi(2),
        }
    }
}

fn uniform_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-INIT_SCALE..=INIT_SCALE))
}

/// `p = exp_0(Pᵀh)`, `q = Q ⊗_c p` (or `q = p` when `use_q` is off).
#[derive(Debug, Clone, PartialEq)]
pub struct PoincareProbe {
    /// `n × k`
    pub p: Array2<f64>,
    /// `k × k`
    pub q: Array2<f64>,
    pub c: Curvature,
    pub use_q: bool,
}

impl PoincareProbe {
    pub fn init<R: Rng>(n: usize, k: usize, c: Curvature, use_q: bool, rng: &mut R) -> Self {
        Self {
            p: uniform_matrix(n, k, rng),
            q: uniform_matrix(k, k, rng),
            c,
            use_q,
        }
    }
}

/// Second map of a two-layer Euclidean probe, `e = B2·σ(B1ᵀh)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondLayer {
    /// `k × k`
    pub b2: Array2<f64>,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EuclideanProbe {
    /// `n × k`
    pub b1: Array2<f64>,
    pub second: Option<SecondLayer>,
}

impl EuclideanProbe {
    pub fn init<R: Rng>(n: usize, k: usize, second: Option<Activation>, rng: &mut R) -> Self {
        let b1 = uniform_matrix(n, k, rng);
        let second = second.map(|activation| SecondLayer {
            b2: uniform_matrix(k, k, rng),
            activation,
        });
        Self { b1, second }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Probe {
    Poincare(PoincareProbe),
    Euclidean(EuclideanProbe),
}

impl Probe {
    pub fn geometry(&self) -> Geometry {
        match self {
            Probe::Poincare(_) => Geometry::Poincare,
            Probe::Euclidean(_) => Geometry::Euclidean,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Probe::Poincare(p) => p.p.nrows(),
            Probe::Euclidean(e) => e.b1.nrows(),
        }
    }

    pub fn rank(&self) -> usize {
        match self {
            Probe::Poincare(p) => p.p.ncols(),
            Probe::Euclidean(e) => e.b1.ncols(),
        }
    }

    /// Curvature for Poincaré probes.
    pub fn curvature(&self) -> Option<Curvature> {
        match self {
            Probe::Poincare(p) => Some(p.c),
            Probe::Euclidean(_) => None,
        }
    }

    pub fn space(&self) -> Space {
        match self {
            Probe::Poincare(p) => Space::Poincare(p.c.get()),
            Probe::Euclidean(_) => Space::Euclidean,
        }
    }
}

/// Positive and negative meta-embeddings of the sentiment probe.
#[derive(Debug, Clone, PartialEq)]
pub struct SentimentHeads {
    pub pos: Vec<f64>,
    pub neg: Vec<f64>,
    pub trainable: bool,
}

impl SentimentHeads {
    /// `c_pos = (1/√k)·1` (Euclidean) or `exp_0((1/√k)·1)` (Poincaré), and
    /// `c_neg = −c_pos`. Trainable heads start from the same place.
    pub fn fixed_positions(k: usize, space: Space, trainable: bool) -> Self {
        let v = vec![1.0 / (k as f64).sqrt(); k];
        let pos = match space {
            Space::Euclidean => v,
            Space::Poincare(c) => {
                let mut p = raw::exp0(&v, c);
                raw::project_in_place(&mut p, c);
                p
            }
        };
        let neg = pos.iter().map(|x| -x).collect();
        Self { pos, neg, trainable }
    }
}

/// Which optimizer a parameter block is routed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamTag {
    /// Plain coordinates, updated with Adam.
    Euclidean,
    /// A point in the ball, updated with Riemannian Adam.
    Ball,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamInfo {
    pub name: &'static str,
    pub tag: ParamTag,
    pub trainable: bool,
    pub len: usize,
}

/// A probe plus, for the sentiment task, its meta-embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub probe: Probe,
    pub heads: Option<SentimentHeads>,
}

fn flat(a: &Array2<f64>) -> &[f64] {
    a.as_slice().expect("parameters are kept in standard layout")
}

fn flat_mut(a: &mut Array2<f64>) -> &mut [f64] {
    a.as_slice_mut().expect("parameters are kept in standard layout")
}

impl Model {
    pub fn new(probe: Probe) -> Self {
        Self { probe, heads: None }
    }

    pub fn with_heads(probe: Probe, heads: SentimentHeads) -> Self {
        Self {
            probe,
            heads: Some(heads),
        }
    }

    pub fn space(&self) -> Space {
        self.probe.space()
    }

    /// Parameter registry in block order. Matrices are always Euclidean;
    /// meta-embeddings are ball points under a Poincaré probe.
    pub fn param_info(&self) -> Vec<ParamInfo> {
        let mut out = Vec::new();
        match &self.probe {
            Probe::Poincare(p) => {
                out.push(ParamInfo { name: "P", tag: ParamTag::Euclidean, trainable: true, len: p.p.len() });
                out.push(ParamInfo { name: "Q", tag: ParamTag::Euclidean, trainable: p.use_q, len: p.q.len() });
            }
            Probe::Euclidean(e) => {
                out.push(ParamInfo { name: "B1", tag: ParamTag::Euclidean, trainable: true, len: e.b1.len() });
                if let Some(s) = &e.second {
                    out.push(ParamInfo { name: "B2", tag: ParamTag::Euclidean, trainable: true, len: s.b2.len() });
                }
            }
        }
        if let Some(h) = &self.heads {
            let tag = match self.probe {
                Probe::Poincare(_) => ParamTag::Ball,
                Probe::Euclidean(_) => ParamTag::Euclidean,
            };
            for name in ["c_pos", "c_neg"] {
                out.push(ParamInfo { name, tag, trainable: h.trainable, len: h.pos.len() });
            }
        }
        out
    }

    pub fn blocks(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        match &self.probe {
            Probe::Poincare(p) => {
                out.push(flat(&p.p));
                out.push(flat(&p.q));
            }
            Probe::Euclidean(e) => {
                out.push(flat(&e.b1));
                if let Some(s) = &e.second {
                    out.push(flat(&s.b2));
                }
            }
        }
        if let Some(h) = &self.heads {
            out.push(&h.pos);
            out.push(&h.neg);
        }
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        match &mut self.probe {
            Probe::Poincare(p) => {
                out.push(flat_mut(&mut p.p));
                out.push(flat_mut(&mut p.q));
            }
            Probe::Euclidean(e) => {
                out.push(flat_mut(&mut e.b1));
                if let Some(s) = &mut e.second {
                    out.push(flat_mut(&mut s.b2));
                }
            }
        }
        if let Some(h) = &mut self.heads {
            out.push(&mut h.pos);
            out.push(&mut h.neg);
        }
        out
    }

    /// Same structure with every parameter zeroed; used as a gradient.
    pub fn zeros_like(&self) -> Model {
        let mut z = self.clone();
        for b in z.blocks_mut() {
            b.fill(0.0);
        }
        z
    }

    /// `self += scale · other` over all blocks.
    pub fn add_scaled(&mut self, other: &Model, scale: f64) {
        for (a, b) in self.blocks_mut().into_iter().zip(other.blocks()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
    }

    /// Concatenation of the trainable blocks.
    pub fn trainable_flat(&self) -> Vec<f64> {
        self.param_info()
            .iter()
            .zip(self.blocks())
            .filter(|(info, _)| info.trainable)
            .flat_map(|(_, b)| b.iter().copied())
            .collect()
    }

    /// Inverse of [`Model::trainable_flat`].
    pub fn set_trainable_flat(&mut self, values: &[f64]) {
        let info = self.param_info();
        let mut off = 0;
        for (i, b) in self.blocks_mut().into_iter().enumerate() {
            if info[i].trainable {
                b.copy_from_slice(&values[off..off + b.len()]);
                off += b.len();
            }
        }
        assert_eq!(off, values.len(), "flat parameter length mismatch");
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.iter().all(|v| v.is_finite()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn registry_routes_heads_by_geometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let c = Curvature::new(1.0).unwrap();
        let pp = Probe::Poincare(PoincareProbe::init(5, 3, c, true, &mut rng));
        let m = Model::with_heads(pp, SentimentHeads::fixed_positions(3, Space::Poincare(1.0), true));
        let tags: Vec<_> = m.param_info().iter().map(|i| (i.name, i.tag)).collect();
        assert_eq!(
            tags,
            vec![
                ("P", ParamTag::Euclidean),
                ("Q", ParamTag::Euclidean),
                ("c_pos", ParamTag::Ball),
                ("c_neg", ParamTag::Ball)
            ]
        );
        let ep = Probe::Euclidean(EuclideanProbe::init(5, 3, Some(Activation::Relu), &mut rng));
        let m = Model::with_heads(ep, SentimentHeads::fixed_positions(3, Space::Euclidean, false));
        assert!(m.param_info().iter().all(|i| i.tag == ParamTag::Euclidean));
        assert!(!m.param_info()[2].trainable);
    }

    #[test]
    fn fixed_heads_positions() {
        let e = SentimentHeads::fixed_positions(4, Space::Euclidean, false);
        assert_eq!(e.pos, vec![0.5; 4]);
        assert_eq!(e.neg, vec![-0.5; 4]);
        let p = SentimentHeads::fixed_positions(4, Space::Poincare(1.0), false);
        assert!((raw::norm(&p.pos) - 1f64.tanh()).abs() < 1e-15);
    }

    #[test]
    fn flat_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = Curvature::new(0.5).unwrap();
        let mut m = Model::new(Probe::Poincare(PoincareProbe::init(4, 2, c, true, &mut rng)));
        let f = m.trainable_flat();
        assert_eq!(f.len(), 4 * 2 + 2 * 2);
        let doubled: Vec<f64> = f.iter().map(|v| v * 2.0).collect();
        m.set_trainable_flat(&doubled);
        assert_eq!(m.trainable_flat(), doubled);
    }

    #[test]
    fn init_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let e = EuclideanProbe::init(10, 4, None, &mut rng);
        assert!(e.b1.iter().all(|v| v.abs() <= INIT_SCALE));
    }

    #[test]
    fn enum_text_round_trip() {
        for t in Task::ALL {
            assert_eq!(t.as_str().parse::<Task>().unwrap(), *t);
        }
        assert!("hyperbolic".parse::<Geometry>().is_err());
    }
}
