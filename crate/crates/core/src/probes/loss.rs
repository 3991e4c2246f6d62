use super::{Model, Space, Task};
use crate::data::{Polarity, TreeGold};
use ndarray::ArrayView2;
use rayon::prelude::*;

/// One sentence for a syntax task.
#[derive(Debug, Clone, Copy)]
pub struct SyntaxItem<'a> {
    pub emb: ArrayView2<'a, f64>,
    pub gold: &'a TreeGold,
}

/// One labeled sentence for the sentiment task.
#[derive(Debug, Clone, Copy)]
pub struct SentimentItem<'a> {
    pub emb: ArrayView2<'a, f64>,
    pub label: Polarity,
}

/// Batch-averaged loss and its gradient (laid out like the model).
#[derive(Debug, Clone)]
pub struct LossGrad {
    pub loss: f64,
    pub grad: Model,
    /// Sentences that contributed to the average.
    pub count: usize,
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn axpy(dst: &mut [f64], a: f64, x: &[f64]) {
    dst.iter_mut().zip(x).for_each(|(d, v)| *d += a * v);
}

/// `(1/t²)·Σ_{i,j} |d_T(i,j) − d(q_i,q_j)²|`; the diagonal contributes 0 so
/// each unordered pair is counted twice.
fn distance_terms(space: Space, points: &[Vec<f64>], gold: &TreeGold, adj: &mut [Vec<f64>]) -> f64 {
    let t = points.len();
    let w = 2.0 / (t * t) as f64;
    let mut loss = 0.0;
    for i in 0..t {
        for j in i + 1..t {
            let (s, gi, gj) = space.sq_dist_grad(&points[i], &points[j]);
            let r = s - f64::from(gold.dist[[i, j]]);
            loss += w * r.abs();
            let g = w * sign(r);
            if g != 0.0 {
                axpy(&mut adj[i], g, &gi);
                axpy(&mut adj[j], g, &gj);
            }
        }
    }
    loss
}

/// `(1/t)·Σ_i |depth_i − d(q_i, 0)²|`.
fn depth_terms(space: Space, points: &[Vec<f64>], gold: &TreeGold, adj: &mut [Vec<f64>]) -> f64 {
    let t = points.len();
    let w = 1.0 / t as f64;
    let mut loss = 0.0;
    for (i, q) in points.iter().enumerate() {
        let (s, g) = space.sq_norm_grad(q);
        let r = s - f64::from(gold.depth[i]);
        loss += w * r.abs();
        let gr = w * sign(r);
        if gr != 0.0 {
            axpy(&mut adj[i], gr, &g);
        }
    }
    loss
}

fn counts_for(task: Task, t: usize) -> bool {
    match task {
        Task::Distance | Task::Joint => t >= 2,
        Task::Depth => t >= 1,
        Task::Sentiment => false,
    }
}

fn syntax_sentence(task: Task, model: &Model, item: &SyntaxItem<'_>, with_grad: bool) -> (f64, Option<Model>) {
    let fwd = model.forward(item.emb);
    let space = model.space();
    let k = model.probe.rank();
    let mut adj = vec![vec![0.0; k]; fwd.points.len()];
    let mut loss = 0.0;
    if matches!(task, Task::Distance | Task::Joint) {
        loss += distance_terms(space, &fwd.points, item.gold, &mut adj);
    }
    if matches!(task, Task::Depth | Task::Joint) {
        loss += depth_terms(space, &fwd.points, item.gold, &mut adj);
    }
    let grad = with_grad.then(|| {
        let mut g = model.zeros_like();
        model.backward(item.emb, &fwd, &adj, &mut g);
        g
    });
    (loss, grad)
}

fn reduce(model: &Model, parts: Vec<(f64, Option<Model>)>) -> LossGrad {
    let mut grad = model.zeros_like();
    let count = parts.len();
    if count == 0 {
        return LossGrad { loss: 0.0, grad, count };
    }
    let scale = 1.0 / count as f64;
    let mut loss = 0.0;
    // fixed sentence order keeps the sum bit-reproducible
    for (l, g) in parts {
        loss += l;
        if let Some(g) = g {
            grad.add_scaled(&g, scale);
        }
    }
    LossGrad {
        loss: loss * scale,
        grad,
        count,
    }
}

/// Batch-averaged syntax loss. Sentences too short for the task (t < 2 for
/// distance/joint, t < 1 for depth) are left out of the average.
pub fn syntax_loss(task: Task, batch: &[SyntaxItem<'_>], model: &Model, with_grad: bool) -> LossGrad {
    assert!(task != Task::Sentiment, "sentiment batches use sentiment_loss");
    let parts: Vec<_> = batch
        .par_iter()
        .filter(|it| counts_for(task, it.emb.nrows()))
        .map(|it| syntax_sentence(task, model, it, with_grad))
        .collect();
    reduce(model, parts)
}

pub fn distance_loss(batch: &[SyntaxItem<'_>], model: &Model) -> LossGrad {
    syntax_loss(Task::Distance, batch, model, true)
}

pub fn depth_loss(batch: &[SyntaxItem<'_>], model: &Model) -> LossGrad {
    syntax_loss(Task::Depth, batch, model, true)
}

/// Unweighted sum of the distance and depth losses on shared parameters.
pub fn joint_loss(batch: &[SyntaxItem<'_>], model: &Model) -> LossGrad {
    syntax_loss(Task::Joint, batch, model, true)
}

fn heads(model: &Model) -> &super::SentimentHeads {
    model.heads.as_ref().expect("sentiment model needs meta-embeddings")
}

/// `(l_pos, l_neg) = (Σ_i d(q_i, c_neg), Σ_i d(q_i, c_pos))`.
pub fn sentiment_logits(emb: ArrayView2<'_, f64>, model: &Model) -> (f64, f64) {
    let h = heads(model);
    let space = model.space();
    let points = model.project_sentence(emb);
    points.iter().fold((0.0, 0.0), |(lp, ln), q| {
        (lp + space.dist(q, &h.neg), ln + space.dist(q, &h.pos))
    })
}

/// Argmax of the logits; an exact tie predicts negative.
pub fn sentiment_predict(emb: ArrayView2<'_, f64>, model: &Model) -> Polarity {
    let (lp, ln) = sentiment_logits(emb, model);
    if lp > ln {
        Polarity::Positive
    } else {
        Polarity::Negative
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sentiment_sentence(model: &Model, item: &SentimentItem<'_>, with_grad: bool) -> (f64, Option<Model>) {
    let h = heads(model);
    let space = model.space();
    let fwd = model.forward(item.emb);
    let k = model.probe.rank();
    let mut l_pos = 0.0;
    let mut l_neg = 0.0;
    let mut d_neg = Vec::with_capacity(fwd.points.len());
    let mut d_pos = Vec::with_capacity(fwd.points.len());
    for q in &fwd.points {
        let a = space.dist_grad(q, &h.neg);
        let b = space.dist_grad(q, &h.pos);
        l_pos += a.0;
        l_neg += b.0;
        d_neg.push(a);
        d_pos.push(b);
    }
    let z = l_pos - l_neg;
    let (loss, y_pos) = match item.label {
        Polarity::Positive => (softplus(-z), 1.0),
        Polarity::Negative => (softplus(z), 0.0),
    };
    if !with_grad {
        return (loss, None);
    }
    let p_pos = 1.0 / (1.0 + (-z).exp());
    let g_lpos = p_pos - y_pos;
    let g_lneg = -g_lpos;
    let mut adj = vec![vec![0.0; k]; fwd.points.len()];
    let mut g_cneg = vec![0.0; k];
    let mut g_cpos = vec![0.0; k];
    for (i, ((_, gq_n, gc_n), (_, gq_p, gc_p))) in d_neg.iter().zip(&d_pos).enumerate() {
        axpy(&mut adj[i], g_lpos, gq_n);
        axpy(&mut adj[i], g_lneg, gq_p);
        axpy(&mut g_cneg, g_lpos, gc_n);
        axpy(&mut g_cpos, g_lneg, gc_p);
    }
    let mut g = model.zeros_like();
    model.backward(item.emb, &fwd, &adj, &mut g);
    if h.trainable {
        let gh = g.heads.as_mut().expect("mirrors model");
        gh.pos = g_cpos;
        gh.neg = g_cneg;
    }
    (loss, Some(g))
}

/// Batch-averaged softmax cross-entropy over `(l_pos, l_neg)`. Head
/// gradients stay exactly zero when the heads are fixed.
pub fn sentiment_loss(batch: &[SentimentItem<'_>], model: &Model, with_grad: bool) -> LossGrad {
    let parts: Vec<_> = batch
        .par_iter()
        .filter(|it| it.emb.nrows() >= 1)
        .map(|it| sentiment_sentence(model, it, with_grad))
        .collect();
    reduce(model, parts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{tree_metrics, SentenceRecord};
    use crate::geometry::{raw, Curvature};
    use crate::probes::{EuclideanProbe, PoincareProbe, Probe, SentimentHeads};
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};

    fn ident_poincare(n: usize) -> Model {
        let c = Curvature::new(1.0).unwrap();
        Model::new(Probe::Poincare(PoincareProbe {
            p: Array2::eye(n),
            q: Array2::eye(n),
            c,
            use_q: false,
        }))
    }

    /// Tangent vector whose exp_0 image sits at distance `d` from the origin.
    fn at_distance(d: f64) -> f64 {
        d / 2.0
    }

    #[test]
    fn two_token_distance_loss() {
        let gold = tree_metrics(&SentenceRecord::from_heads(vec!["a".into(), "b".into()], vec![2, 0]));
        let m = ident_poincare(1);
        // two points on a line at ±r: distance d(−x, x) = 2·d(0, x)
        let emb_one = array![[at_distance(0.5)], [-at_distance(0.5)]];
        let l = distance_loss(&[SyntaxItem { emb: emb_one.view(), gold: &gold }], &m);
        assert_abs_diff_eq!(l.loss, 0.0, epsilon = 1e-12);

        let half = 3f64.sqrt() / 2.0;
        let emb_three = array![[at_distance(half)], [-at_distance(half)]];
        let l = distance_loss(&[SyntaxItem { emb: emb_three.view(), gold: &gold }], &m);
        // (1/4)·2·|3 − 1|
        assert_abs_diff_eq!(l.loss, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn depth_loss_cases() {
        let root = tree_metrics(&SentenceRecord::from_heads(vec!["a".into()], vec![0]));
        let m = ident_poincare(1);
        let emb = array![[0.0]];
        let l = depth_loss(&[SyntaxItem { emb: emb.view(), gold: &root }], &m);
        assert_eq!(l.loss, 0.0);

        let g = tree_metrics(&SentenceRecord::from_heads(vec!["a".into(), "b".into()], vec![0, 1]));
        // token 2 (depth 1) at squared distance 4, token 1 (depth 0) at origin
        let emb = array![[0.0], [at_distance(2.0)]];
        let l = depth_loss(&[SyntaxItem { emb: emb.view(), gold: &g }], &m);
        assert_abs_diff_eq!(l.loss, 3.0 / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn joint_is_sum() {
        let g = tree_metrics(&SentenceRecord::from_heads(vec!["a".into(), "b".into(), "c".into()], vec![0, 1, 1]));
        let m = ident_poincare(2);
        let emb = array![[0.1, 0.2], [0.4, -0.3], [-0.2, 0.5]];
        let item = [SyntaxItem { emb: emb.view(), gold: &g }];
        let a = distance_loss(&item, &m).loss;
        let b = depth_loss(&item, &m).loss;
        assert_abs_diff_eq!(joint_loss(&item, &m).loss, a + b, epsilon = 1e-14);
    }

    #[test]
    fn short_sentences_are_excluded() {
        let g = tree_metrics(&SentenceRecord::from_heads(vec!["a".into()], vec![0]));
        let m = ident_poincare(1);
        let emb = array![[0.3]];
        let l = distance_loss(&[SyntaxItem { emb: emb.view(), gold: &g }], &m);
        assert_eq!(l.count, 0);
        assert_eq!(l.loss, 0.0);
    }

    fn sentiment_model(k: usize, trainable: bool) -> Model {
        let c = Curvature::new(1.0).unwrap();
        let probe = Probe::Poincare(PoincareProbe {
            p: Array2::eye(k),
            q: Array2::eye(k),
            c,
            use_q: false,
        });
        Model::with_heads(probe, SentimentHeads::fixed_positions(k, Space::Poincare(1.0), trainable))
    }

    #[test]
    fn words_at_positive_head_predict_positive() {
        let m = sentiment_model(2, false);
        let cpos = m.heads.as_ref().unwrap().pos.clone();
        let tangent = raw::log0(&cpos, 1.0);
        let emb = Array2::from_shape_fn((3, 2), |(_, j)| tangent[j]);
        let (lp, ln) = sentiment_logits(emb.view(), &m);
        assert!(ln.abs() < 1e-7);
        let d = raw::distance(&cpos, &m.heads.as_ref().unwrap().neg, 1.0);
        assert_abs_diff_eq!(lp, 3.0 * d, epsilon = 1e-6);
        assert_eq!(sentiment_predict(emb.view(), &m), Polarity::Positive);
    }

    #[test]
    fn equidistant_words_tie_to_negative() {
        let m = sentiment_model(2, false);
        // (1, −1)/√2 direction is orthogonal to c_pos = −c_neg
        let emb = array![[0.3, -0.3]];
        let (lp, ln) = sentiment_logits(emb.view(), &m);
        assert_eq!(lp, ln);
        assert_eq!(sentiment_predict(emb.view(), &m), Polarity::Negative);
        let l = sentiment_loss(&[SentimentItem { emb: emb.view(), label: Polarity::Positive }], &m, true);
        assert_abs_diff_eq!(l.loss, std::f64::consts::LN_2, epsilon = 1e-15);
    }

    #[test]
    fn midpoint_nudged_toward_positive() {
        let m = sentiment_model(2, false);
        let h = m.heads.as_ref().unwrap();
        // geodesic midpoint of c_neg and c_pos is the origin; nudge along c_pos
        let dir = raw::log0(&h.pos, 1.0);
        let emb = Array2::from_shape_fn((1, 2), |(_, j)| 1e-3 * dir[j]);
        assert_eq!(sentiment_predict(emb.view(), &m), Polarity::Positive);
    }

    #[test]
    fn large_margin_drives_loss_to_zero() {
        let m = sentiment_model(2, false);
        let h = m.heads.as_ref().unwrap();
        let t = raw::log0(&h.pos, 1.0);
        let emb = Array2::from_shape_fn((40, 2), |(_, j)| t[j]);
        let l = sentiment_loss(&[SentimentItem { emb: emb.view(), label: Polarity::Positive }], &m, true);
        assert!(l.loss < 1e-12);
    }

    #[test]
    fn fixed_heads_get_zero_gradient() {
        let m = sentiment_model(2, false);
        let emb = array![[0.3, 0.1], [-0.2, 0.4]];
        let l = sentiment_loss(&[SentimentItem { emb: emb.view(), label: Polarity::Negative }], &m, true);
        let h = l.grad.heads.unwrap();
        assert!(h.pos.iter().chain(&h.neg).all(|v| *v == 0.0));
    }

    #[test]
    fn euclidean_identity_coincident_tokens() {
        let m = Model::new(Probe::Euclidean(EuclideanProbe { b1: Array2::eye(2), second: None }));
        let emb = array![[0.5, 0.5], [0.5, 0.5]];
        let pts = m.project_sentence(emb.view());
        assert_eq!(m.space().sq_dist(&pts[0], &pts[1]), 0.0);
    }
}
