//! Corpora with planted structure, used by the acceptance checks and by
//! `hyperprobe synth` so every check runs without external data.

use crate::data::{tree_metrics, Pemb, Polarity, SentenceRecord, SentimentExample, TreeGold};
use crate::geometry::{grad, raw};
use crate::optim::{adam_step, AdamState};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

/// Heads (1-based, 0 = root) of a uniformly shuffled random recursive tree
/// on `t` tokens.
pub fn random_heads<R: Rng + ?Sized>(rng: &mut R, t: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..t).collect();
    for i in (1..t).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let mut head = vec![0; t];
    for k in 1..t {
        let parent = order[rng.random_range(0..k)];
        head[order[k]] = parent + 1;
    }
    head
}

fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, std: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || {
        let z: f64 = StandardNormal.sample(rng);
        std * z
    })
}

/// Embeddings go through PEMB as f32; rounding here keeps in-memory corpora
/// identical to their on-disk form.
fn round_f32(m: Array2<f64>) -> Array2<f64> {
    m.mapv(|v| f64::from(v as f32))
}

fn deprel_for(dep: usize, head: usize) -> &'static str {
    match dep.abs_diff(head) {
        0 => "root",
        1 => "adj",
        2..=3 => "near",
        _ => "far",
    }
}

#[derive(Debug, Clone)]
pub struct SyntaxSynthConfig {
    pub sentences: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Embedding width n.
    pub dim: usize,
    /// Rank k of the planted ball coordinates.
    pub rank: usize,
    pub curvature: f64,
    /// Target distance loss for each sentence's planted points.
    pub fit_tol: f64,
    /// Standard deviation of the entries of the mixing matrix `A`.
    pub mixing_std: f64,
    pub seed: u64,
}

impl Default for SyntaxSynthConfig {
    fn default() -> Self {
        Self {
            sentences: 200,
            min_len: 5,
            max_len: 15,
            dim: 128,
            rank: 16,
            curvature: 1.0,
            fit_tol: 0.01,
            mixing_std: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticTreebank {
    /// Sentences with embeddings attached.
    pub records: Vec<SentenceRecord>,
    /// The `n × k` map from tangent coordinates to embeddings.
    pub mixing: Array2<f64>,
    /// Planted ball points, one `t × k` matrix per sentence.
    pub targets: Vec<Array2<f64>>,
    /// Distance loss of each sentence's planted points.
    pub fit_loss: Vec<f64>,
}

/// Distance loss `(1/t²)·Σ_{i,j} |d_T − d²|` of fixed points.
pub fn tree_distance_loss(points: &[Vec<f64>], gold: &TreeGold, c: f64) -> f64 {
    let t = points.len();
    let mut s = 0.0;
    for i in 0..t {
        for j in i + 1..t {
            let d = raw::distance(&points[i], &points[j], c);
            s += (f64::from(gold.dist[[i, j]]) - d * d).abs();
        }
    }
    2.0 * s / (t * t) as f64
}

/// Ball points whose squared distances (pairwise and to the origin) match
/// tree distances and depths. Starts from the Euclidean construction (one
/// orthogonal step per edge) and refines the tangent coordinates with Adam
/// on the squared residuals. Returns the tangent coordinates and the
/// resulting distance loss.
pub fn fit_tree_points<R: Rng + ?Sized>(record: &SentenceRecord, k: usize, c: f64, tol: f64, rng: &mut R) -> (Vec<Vec<f64>>, f64) {
    let t = record.len();
    let gold = tree_metrics(record);
    assert!(t <= k + 1, "tree needs at most k + 1 tokens");
    // random orthonormal edge directions via Gram-Schmidt
    let mut dirs: Vec<Vec<f64>> = Vec::with_capacity(t);
    while dirs.len() < t.saturating_sub(1) {
        let mut v: Vec<f64> = (0..k).map(|_| StandardNormal.sample(rng)).collect();
        for d in &dirs {
            let p = raw::dot(&v, d);
            v.iter_mut().zip(d).for_each(|(a, b)| *a -= p * b);
        }
        let n = raw::norm(&v);
        if n > 1e-6 {
            dirs.push(v.into_iter().map(|a| a / n).collect());
        }
    }
    // Euclidean solution x_i = Σ over root path edges; the tangent scale 1/2
    // matches distances near the origin where d ≈ 2‖v‖
    let mut edge = vec![0; t];
    let mut next = 0;
    for (i, &h) in record.head.iter().enumerate() {
        if h != 0 {
            edge[i] = next;
            next += 1;
        }
    }
    let mut v = vec![vec![0.0; k]; t];
    for (i, vi) in v.iter_mut().enumerate() {
        let mut node = i;
        while record.head[node] != 0 {
            vi.iter_mut().zip(&dirs[edge[node]]).for_each(|(a, b)| *a += 0.5 * b);
            node = record.head[node] - 1;
        }
    }
    let points = |v: &[Vec<f64>]| -> Vec<Vec<f64>> {
        v.iter()
            .map(|u| {
                let mut q = raw::exp0(u, c);
                raw::project_in_place(&mut q, c);
                q
            })
            .collect()
    };
    let mut flat: Vec<f64> = v.concat();
    let mut state = AdamState::new(flat.len(), 0.01);
    let mut best = (flat.clone(), f64::INFINITY);
    for step in 0..4000 {
        let vs: Vec<Vec<f64>> = flat.chunks(k).map(<[f64]>::to_vec).collect();
        let q = points(&vs);
        if step % 50 == 0 {
            let l = tree_distance_loss(&q, &gold, c);
            if l < best.1 {
                best = (flat.clone(), l);
            }
            if l < tol / 4.0 {
                break;
            }
        }
        let mut adj = vec![vec![0.0; k]; t];
        for i in 0..t {
            for j in i + 1..t {
                let (s, gi, gj) = grad::sq_distance_grad(&q[i], &q[j], c);
                let r = 2.0 * (s - f64::from(gold.dist[[i, j]]));
                adj[i].iter_mut().zip(&gi).for_each(|(a, g)| *a += r * g);
                adj[j].iter_mut().zip(&gj).for_each(|(a, g)| *a += r * g);
            }
            let (s, gi, _) = grad::sq_distance_grad(&q[i], &vec![0.0; k], c);
            let r = 2.0 * (s - f64::from(gold.depth[i]));
            adj[i].iter_mut().zip(&gi).for_each(|(a, g)| *a += r * g);
        }
        let g: Vec<f64> = vs
            .iter()
            .zip(&adj)
            .flat_map(|(u, a)| {
                let pre = raw::exp0(u, c);
                let gp = grad::project_vjp(&pre, c, a);
                grad::exp0_vjp(u, c, &gp)
            })
            .collect();
        if adam_step(&mut flat, &g, &mut state).is_err() {
            break;
        }
    }
    let vs: Vec<Vec<f64>> = flat.chunks(k).map(<[f64]>::to_vec).collect();
    let l = tree_distance_loss(&points(&vs), &gold, c);
    if l < best.1 {
        best = (flat, l);
    }
    (best.0.chunks(k).map(<[f64]>::to_vec).collect(), best.1)
}

/// Random trees with planted ball points `q*` and embeddings
/// `h = A·log_0(q*)` for one fixed Gaussian `A`. A probe with `Pᵀ = A⁺` and
/// `Q = I` reproduces the points exactly.
pub fn recoverable_syntax(cfg: &SyntaxSynthConfig) -> SyntheticTreebank {
    assert!(cfg.min_len >= 1 && cfg.min_len <= cfg.max_len);
    assert!(cfg.max_len <= cfg.rank + 1, "max_len must not exceed rank + 1");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mixing = gaussian_matrix(&mut rng, cfg.dim, cfg.rank, cfg.mixing_std);
    let trees: Vec<(SentenceRecord, u64)> = (0..cfg.sentences)
        .map(|s| {
            let t = rng.random_range(cfg.min_len..=cfg.max_len);
            let head = random_heads(&mut rng, t);
            let tokens = (0..t).map(|i| format!("w{}", i + 1)).collect();
            let mut r = SentenceRecord::from_heads(tokens, head);
            r.deprel = r
                .head
                .iter()
                .enumerate()
                .map(|(i, &h)| deprel_for(i + 1, if h == 0 { i + 1 } else { h }).to_string())
                .collect();
            (r, cfg.seed ^ (0x9e37_79b9_7f4a_7c15_u64.wrapping_mul(s as u64 + 1)))
        })
        .collect();
    let fitted: Vec<(Vec<Vec<f64>>, f64)> = trees
        .par_iter()
        .map(|(r, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            fit_tree_points(r, cfg.rank, cfg.curvature, cfg.fit_tol, &mut rng)
        })
        .collect();
    let mut records = Vec::with_capacity(trees.len());
    let mut targets = Vec::with_capacity(trees.len());
    let mut fit_loss = Vec::with_capacity(trees.len());
    for ((mut r, _), (v, loss)) in trees.into_iter().zip(fitted) {
        let t = v.len();
        let mut q = Array2::zeros((t, cfg.rank));
        let mut tangent = Array2::zeros((t, cfg.rank));
        for (i, vi) in v.iter().enumerate() {
            let mut p = raw::exp0(vi, cfg.curvature);
            raw::project_in_place(&mut p, cfg.curvature);
            let back = raw::log0(&p, cfg.curvature);
            q.row_mut(i).assign(&Array1::from(p));
            tangent.row_mut(i).assign(&Array1::from(back));
        }
        r.embedding = Some(round_f32(tangent.dot(&mixing.t())));
        records.push(r);
        targets.push(q);
        fit_loss.push(loss);
    }
    SyntheticTreebank {
        records,
        mixing,
        targets,
        fit_loss,
    }
}

#[derive(Debug, Clone)]
pub struct SentimentSynthConfig {
    pub sentences: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub dim: usize,
    /// Length of the planted polarity vector.
    pub signal: f64,
    /// Per-coordinate standard deviation of the background tokens.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SentimentSynthConfig {
    fn default() -> Self {
        Self {
            sentences: 400,
            min_len: 4,
            max_len: 12,
            dim: 32,
            signal: 4.0,
            noise: 0.3,
            seed: 0,
        }
    }
}

/// Sentences of Gaussian background tokens, each carrying one token at
/// `±signal·d` for a fixed unit direction `d`; the sign is the label.
/// Labels alternate so the corpus is balanced. Returns the examples and `d`.
pub fn planted_sentiment(cfg: &SentimentSynthConfig) -> (Vec<SentimentExample>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut d: Vec<f64> = (0..cfg.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let n = raw::norm(&d);
    d.iter_mut().for_each(|v| *v /= n);
    let examples = (0..cfg.sentences)
        .map(|s| {
            let label = if s % 2 == 0 { Polarity::Positive } else { Polarity::Negative };
            let t = rng.random_range(cfg.min_len..=cfg.max_len);
            let mut emb = gaussian_matrix(&mut rng, t, cfg.dim, cfg.noise);
            let at = rng.random_range(0..t);
            let sign = if label == Polarity::Positive { 1.0 } else { -1.0 };
            emb.row_mut(at).iter_mut().zip(&d).for_each(|(e, v)| *e += sign * cfg.signal * v);
            let tokens = (0..t)
                .map(|i| {
                    if i == at {
                        (if sign > 0.0 { "good" } else { "bad" }).to_string()
                    } else {
                        format!("n{}", rng.random_range(0..50))
                    }
                })
                .collect();
            SentimentExample {
                tokens,
                label,
                embedding: Some(round_f32(emb)),
            }
        })
        .collect();
    (examples, d)
}

/// CoNLL-U text for records (ids, forms, tags, heads and relations).
pub fn to_conllu(records: &[SentenceRecord]) -> String {
    let mut out = String::new();
    for (s, r) in records.iter().enumerate() {
        out.push_str(&format!("# sent_id = {}\n", s + 1));
        for i in 0..r.len() {
            out.push_str(&format!(
                "{}\t{}\t_\t{}\t{}\t_\t{}\t{}\t_\t_\n",
                i + 1,
                r.tokens[i],
                r.upos[i],
                r.xpos[i],
                r.head[i],
                r.deprel[i]
            ));
        }
        out.push('\n');
    }
    out
}

/// `label<TAB>text` lines.
pub fn to_sentiment_tsv(examples: &[SentimentExample]) -> String {
    examples
        .iter()
        .map(|e| {
            let l = if e.label == Polarity::Positive { '1' } else { '0' };
            format!("{l}\t{}\n", e.tokens.join(" "))
        })
        .collect()
}

/// Packs attached embeddings into a PEMB container.
///
/// # Panics
/// If a matrix is missing.
pub fn to_pemb<'a>(matrices: impl IntoIterator<Item = &'a Array2<f64>>) -> Pemb {
    let sentences: Vec<Array2<f32>> = matrices.into_iter().map(|m| m.mapv(|v| v as f32)).collect();
    Pemb {
        dim: sentences.first().map_or(0, |m| m.ncols()),
        sentences,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{parse_conllu_str, parse_sentiment_tsv};

    #[test]
    fn random_heads_are_trees() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for t in 1..20 {
            SentenceRecord::from_heads(vec!["x".into(); t], random_heads(&mut rng, t))
                .validate()
                .unwrap();
        }
    }

    #[test]
    fn fitted_points_match_tree() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for t in [2, 6, 12] {
            let r = SentenceRecord::from_heads(vec!["x".into(); t], random_heads(&mut rng, t));
            let (_, loss) = fit_tree_points(&r, 16, 1.0, 0.01, &mut rng);
            assert!(loss < 0.01, "t = {t}: loss {loss}");
        }
    }

    #[test]
    fn text_exports_parse_back() {
        let cfg = SyntaxSynthConfig {
            sentences: 4,
            dim: 8,
            rank: 6,
            max_len: 6,
            ..Default::default()
        };
        let tb = recoverable_syntax(&cfg);
        let back = parse_conllu_str(&to_conllu(&tb.records));
        assert_eq!(back.sentences.len(), 4);
        for (a, b) in back.sentences.iter().zip(&tb.records) {
            assert_eq!(a.head, b.head);
            assert_eq!(a.deprel, b.deprel);
        }
        let pemb = to_pemb(tb.records.iter().map(|r| r.embedding.as_ref().unwrap()));
        assert_eq!(pemb.sentences[0].mapv(f64::from), *tb.records[0].embedding.as_ref().unwrap());

        let (ex, _) = planted_sentiment(&SentimentSynthConfig { sentences: 6, ..Default::default() });
        let parsed = parse_sentiment_tsv(&to_sentiment_tsv(&ex)).unwrap();
        assert_eq!(parsed.len(), 6);
        assert_eq!(parsed[1].label, Polarity::Negative);
        assert_eq!(parsed[2].tokens, ex[2].tokens);
    }
}
