//! Structural probes in the generalized Poincaré ball.
//!
//! The crate trains and evaluates low-rank probes over frozen, precomputed
//! contextual embeddings (read from PEMB files). Syntax probes map each word
//! into a Poincaré ball where squared geodesic distances approximate
//! dependency-tree distances and squared distances to the origin approximate
//! tree depths; sentiment probes classify sentences by their words' distances
//! to two meta-embeddings. Euclidean counterparts serve as baselines.
//!
//! Module map:
//! - [`geometry`]: Möbius operations, exp/log maps, distances, projection.
//! - [`optim`]: Adam, Riemannian Adam, finite-difference gradient checks.
//! - [`data`]: treebanks, sentiment TSV, PEMB embeddings, gold tree metrics.
//! - [`probes`]: probe forward passes, losses and their analytic gradients.
//! - [`train`]: batching, learning-rate decay and dev-loss model selection.
//! - [`eval`]: MST decoding, UUAS, Spearman metrics, sweeps, reports.
//! - [`viz`]: PCA projections and SVG scenes.
//! - [`synthetic`]: corpora with planted, recoverable structure.
//! - [`gradcheck`]: finite-difference verification of every loss variant.

pub mod data;
pub mod eval;
pub mod geometry;
pub mod gradcheck;
pub mod optim;
pub mod probes;
pub mod synthetic;
pub mod train;
pub mod viz;

pub use geometry::{BallPoint, Curvature, TangentVector};
