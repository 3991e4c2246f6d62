//! Figure export: PCA projections of probe outputs drawn as SVG.
//!
//! PCA runs directly on ball coordinates. That is a Euclidean view of a
//! curved space, so distances in the picture are distorted; the caveat is
//! written into every scene and SVG.

pub mod pca;

pub use pca::{pca_project, Pca, PcaError};

use crate::eval::Edge;
use crate::probes::{Model, Space};
use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

pub const PCA_CAVEAT: &str =
    "2-D PCA of ball coordinates; Euclidean projection of a hyperbolic space, distances are distorted";
/// Default dashed-connector threshold as a fraction of d(c_pos, c_neg).
pub const DEFAULT_SIGNIFICANCE: f64 = 0.05;
/// Largest radius a renormalized Poincaré scene may use inside the unit disk.
const DISK_FILL: f64 = 0.95;

#[derive(Debug, Error)]
pub enum VizError {
    #[error(transparent)]
    Pca(#[from] PcaError),
    #[error("model has no sentiment meta-embeddings")]
    NoHeads,
    #[error("writing {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointKind {
    Token,
    PositiveHead,
    NegativeHead,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenePoint {
    pub label: String,
    pub x: f64,
    pub y: f64,
    pub kind: PointKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneEdge {
    pub a: usize,
    pub b: usize,
    pub gold: bool,
    pub predicted: bool,
}

/// Line from a token to the meta-embedding it is closer to in the ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Connector {
    pub token: usize,
    pub head: usize,
    /// The distance gap is below the significance threshold.
    pub dashed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectedScene {
    pub sentence: String,
    /// Tokens first, then the positive and negative meta-embeddings if any.
    pub points: Vec<ScenePoint>,
    pub edges: Vec<SceneEdge>,
    pub connectors: Vec<Connector>,
    /// Coordinates are scaled into the unit disk and the boundary is drawn.
    pub disk: bool,
    pub explained: [f64; 2],
    pub note: String,
}

fn project_points(model: &Model, points: &[Vec<f64>]) -> Result<(Vec<[f64; 2]>, [f64; 2], bool), VizError> {
    let pca = pca_project(points)?;
    let mut coords = pca.coords;
    let disk = match model.space() {
        Space::Poincare(c) => {
            let s = c.sqrt();
            coords.iter_mut().for_each(|p| p.iter_mut().for_each(|v| *v *= s));
            let r = coords.iter().map(|p| p[0].hypot(p[1])).fold(0.0, f64::max);
            if r > DISK_FILL {
                let f = DISK_FILL / r;
                coords.iter_mut().for_each(|p| p.iter_mut().for_each(|v| *v *= f));
            }
            true
        }
        Space::Euclidean => false,
    };
    Ok((coords, pca.explained, disk))
}

/// Tokens of one sentence with the union of gold and predicted edges.
pub fn syntax_scene(
    model: &Model,
    tokens: &[String],
    emb: ArrayView2<'_, f64>,
    gold: &BTreeSet<Edge>,
    predicted: &BTreeSet<Edge>,
) -> Result<ProjectedScene, VizError> {
    let q = model.project_sentence(emb);
    let (coords, explained, disk) = project_points(model, &q)?;
    let points = tokens
        .iter()
        .zip(coords)
        .map(|(t, [x, y])| ScenePoint { label: t.clone(), x, y, kind: PointKind::Token })
        .collect();
    let edges = gold
        .union(predicted)
        .map(|&(a, b)| SceneEdge {
            a,
            b,
            gold: gold.contains(&(a, b)),
            predicted: predicted.contains(&(a, b)),
        })
        .collect();
    Ok(ProjectedScene {
        sentence: tokens.join(" "),
        points,
        edges,
        connectors: Vec::new(),
        disk,
        explained,
        note: PCA_CAVEAT.to_string(),
    })
}

/// Tokens plus both meta-embeddings; each token connects to the closer one
/// under the probe metric, dashed when `|d(q, c_neg) − d(q, c_pos)|` is
/// below `significance · d(c_pos, c_neg)`.
pub fn sentiment_scene(model: &Model, tokens: &[String], emb: ArrayView2<'_, f64>, significance: f64) -> Result<ProjectedScene, VizError> {
    let heads = model.heads.as_ref().ok_or(VizError::NoHeads)?;
    let space = model.space();
    let mut q = model.project_sentence(emb);
    let t = q.len();
    let threshold = significance * space.dist(&heads.pos, &heads.neg);
    let connectors = q
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let gap = space.dist(p, &heads.neg) - space.dist(p, &heads.pos);
            Connector {
                token: i,
                head: if gap > 0.0 { t } else { t + 1 },
                dashed: gap.abs() < threshold,
            }
        })
        .collect();
    q.push(heads.pos.clone());
    q.push(heads.neg.clone());
    let (coords, explained, disk) = project_points(model, &q)?;
    let points = coords
        .into_iter()
        .enumerate()
        .map(|(i, [x, y])| {
            let (label, kind) = match i.checked_sub(t) {
                None => (tokens[i].clone(), PointKind::Token),
                Some(0) => ("c_pos".to_string(), PointKind::PositiveHead),
                Some(_) => ("c_neg".to_string(), PointKind::NegativeHead),
            };
            ScenePoint { label, x, y, kind }
        })
        .collect();
    Ok(ProjectedScene {
        sentence: tokens.join(" "),
        points,
        edges: Vec::new(),
        connectors,
        disk,
        explained,
        note: PCA_CAVEAT.to_string(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderConfig {
    /// Width and height of the square canvas in pixels.
    pub size: f64,
    pub margin: f64,
    pub font_size: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            size: 480.0,
            margin: 24.0,
            font_size: 11.0,
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// SVG text of a scene; a pure function of its inputs.
pub fn render_svg(scene: &ProjectedScene, cfg: &RenderConfig) -> String {
    let extent = if scene.disk {
        1.0
    } else {
        let m = scene.points.iter().map(|p| p.x.abs().max(p.y.abs())).fold(0.0, f64::max);
        if m > 0.0 { m } else { 1.0 }
    };
    let half = cfg.size / 2.0;
    let scale = (half - cfg.margin) / extent;
    let px = |x: f64| half + x * scale;
    let py = |y: f64| half - y * scale;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{0}" height="{0}" viewBox="0 0 {0} {0}">"#,
        cfg.size
    );
    let _ = writeln!(
        s,
        "<desc>{}; explained variance {:.4} / {:.4}</desc>",
        escape(&scene.note),
        scene.explained[0],
        scene.explained[1]
    );
    let _ = writeln!(s, "<title>{}</title>", escape(&scene.sentence));
    let _ = writeln!(s, r#"<rect width="{0}" height="{0}" fill="white"/>"#, cfg.size);
    if scene.disk {
        let _ = writeln!(
            s,
            r##"<circle cx="{half:.3}" cy="{half:.3}" r="{:.3}" fill="none" stroke="#444" stroke-width="1"/>"##,
            scale
        );
    }
    let pt = |i: usize| (px(scene.points[i].x), py(scene.points[i].y));
    for c in &scene.connectors {
        let ((x1, y1), (x2, y2)) = (pt(c.token), pt(c.head));
        let color = if scene.points[c.head].kind == PointKind::PositiveHead { "#2ca02c" } else { "#d62728" };
        let dash = if c.dashed { r#" stroke-dasharray="3 3""# } else { "" };
        let _ = writeln!(
            s,
            r#"<line x1="{x1:.3}" y1="{y1:.3}" x2="{x2:.3}" y2="{y2:.3}" stroke="{color}" stroke-width="0.8"{dash}/>"#
        );
    }
    for e in &scene.edges {
        let ((x1, y1), (x2, y2)) = (pt(e.a), pt(e.b));
        let (color, dash) = match (e.gold, e.predicted) {
            (true, true) => ("#000", ""),
            (true, false) => ("#999", ""),
            _ => ("#1f77b4", r#" stroke-dasharray="4 3""#),
        };
        let _ = writeln!(
            s,
            r#"<line x1="{x1:.3}" y1="{y1:.3}" x2="{x2:.3}" y2="{y2:.3}" stroke="{color}" stroke-width="1.5"{dash}/>"#
        );
    }
    for p in &scene.points {
        let (x, y) = (px(p.x), py(p.y));
        let (r, fill) = match p.kind {
            PointKind::Token => (3.0, "#333"),
            PointKind::PositiveHead => (5.0, "#2ca02c"),
            PointKind::NegativeHead => (5.0, "#d62728"),
        };
        let _ = writeln!(s, r#"<circle cx="{x:.3}" cy="{y:.3}" r="{r}" fill="{fill}"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.3}" y="{:.3}" font-family="sans-serif" font-size="{}">{}</text>"#,
            x + 4.0,
            y - 4.0,
            cfg.font_size,
            escape(&p.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn write_svg(path: impl AsRef<Path>, scene: &ProjectedScene, cfg: &RenderConfig) -> Result<(), VizError> {
    let path = path.as_ref();
    std::fs::write(path, render_svg(scene, cfg)).map_err(|source| VizError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Points then edges then connectors as tab-separated rows.
pub fn scene_tsv(scene: &ProjectedScene) -> String {
    let mut s = String::from("point\tlabel\tkind\tx\ty\n");
    for (i, p) in scene.points.iter().enumerate() {
        let kind = match p.kind {
            PointKind::Token => "token",
            PointKind::PositiveHead => "positive_head",
            PointKind::NegativeHead => "negative_head",
        };
        let _ = writeln!(s, "{i}\t{}\t{kind}\t{}\t{}", p.label, p.x, p.y);
    }
    s.push_str("\nedge_a\tedge_b\tgold\tpredicted\n");
    for e in &scene.edges {
        let _ = writeln!(s, "{}\t{}\t{}\t{}", e.a, e.b, e.gold, e.predicted);
    }
    s.push_str("\nconnector_token\tconnector_head\tdashed\n");
    for c in &scene.connectors {
        let _ = writeln!(s, "{}\t{}\t{}", c.token, c.head, c.dashed);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Curvature;
    use crate::probes::{EuclideanProbe, PoincareProbe, Probe, SentimentHeads};
    use ndarray::{array, Array2};

    fn poincare() -> Model {
        Model::new(Probe::Poincare(PoincareProbe {
            p: Array2::eye(3),
            q: Array2::eye(3),
            c: Curvature::new(1.0).unwrap(),
            use_q: false,
        }))
    }

    fn words(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("w{i}")).collect()
    }

    #[test]
    fn empty_edges_draw_points_only() {
        let emb = array![[0.1, 0.0, 0.0], [0.0, 0.4, 0.0], [0.0, 0.0, -0.3]];
        let sc = syntax_scene(&poincare(), &words(3), emb.view(), &BTreeSet::new(), &BTreeSet::new()).unwrap();
        let svg = render_svg(&sc, &RenderConfig::default());
        assert_eq!(svg.matches("<line").count(), 0);
        assert_eq!(svg.matches("<circle").count(), 4); // 3 tokens + disk
        assert!(sc.points.iter().all(|p| p.x.hypot(p.y) < 1.0));
    }

    #[test]
    fn one_edge_one_segment() {
        let m = Model::new(Probe::Euclidean(EuclideanProbe { b1: Array2::eye(2), second: None }));
        let emb = array![[0.0, 1.0], [1.0, 0.0]];
        let e = BTreeSet::from([(0, 1)]);
        let sc = syntax_scene(&m, &words(2), emb.view(), &e, &e).unwrap();
        let svg = render_svg(&sc, &RenderConfig::default());
        assert_eq!(svg.matches("<line").count(), 1);
        assert!(!sc.disk && !svg.contains(r#"fill="none""#));
        assert_eq!(render_svg(&sc, &RenderConfig::default()), svg);
    }

    #[test]
    fn sentiment_scene_includes_heads() {
        let mut m = poincare();
        m.heads = Some(SentimentHeads::fixed_positions(3, m.space(), false));
        let emb = array![[0.5, 0.5, 0.5], [-0.4, -0.5, -0.4], [0.01, -0.01, 0.0]];
        let sc = sentiment_scene(&m, &words(3), emb.view(), DEFAULT_SIGNIFICANCE).unwrap();
        assert_eq!(sc.points.len(), 5);
        assert_eq!(sc.points[3].kind, PointKind::PositiveHead);
        let heads: Vec<usize> = sc.connectors.iter().map(|c| c.head).collect();
        assert_eq!(heads, vec![3, 4, 4]);
        assert_eq!(sc.connectors.iter().map(|c| c.dashed).collect::<Vec<_>>(), vec![false, false, true]);
        assert!(matches!(sentiment_scene(&poincare(), &words(3), emb.view(), 0.05), Err(VizError::NoHeads)));
    }
}
