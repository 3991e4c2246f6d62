use super::mst::Edge;
use crate::data::{SentenceRecord, TreeGold};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Shortest and longest sentence lengths entering the Spearman averages.
pub const SPEARMAN_MIN_LEN: usize = 5;
pub const SPEARMAN_MAX_LEN: usize = 50;

/// `|predicted ∩ gold| / |gold|`, or `None` for an empty gold set.
pub fn uuas(pred: &BTreeSet<Edge>, gold: &BTreeSet<Edge>) -> Option<f64> {
    if gold.is_empty() {
        return None;
    }
    Some(pred.intersection(gold).count() as f64 / gold.len() as f64)
}

/// Corpus UUAS from per-sentence `(hits, gold edges)`. Micro averaging
/// weights sentences by edge count; macro averages per-sentence ratios.
/// `None` when no sentence has a gold edge.
pub fn corpus_uuas(counts: &[(usize, usize)], macro_average: bool) -> Option<f64> {
    let with_edges: Vec<_> = counts.iter().filter(|c| c.1 > 0).collect();
    if with_edges.is_empty() {
        return None;
    }
    Some(if macro_average {
        with_edges.iter().map(|(h, g)| *h as f64 / *g as f64).sum::<f64>() / with_edges.len() as f64
    } else {
        let hits: usize = with_edges.iter().map(|c| c.0).sum();
        let gold: usize = with_edges.iter().map(|c| c.1).sum();
        hits as f64 / gold as f64
    })
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation; `None` when either side is constant or there
/// are fewer than two observations.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len());
    if x.len() < 2 {
        return None;
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = x.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        let (da, db) = (a - mean, b - mean);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Averages values per sentence length within `[lo, hi]`, then averages
/// the per-length means.
pub fn length_bucketed_mean(values: &[(usize, f64)], lo: usize, hi: usize) -> Option<f64> {
    let mut by_len: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for &(len, v) in values {
        if (lo..=hi).contains(&len) {
            let e = by_len.entry(len).or_default();
            e.0 += v;
            e.1 += 1;
        }
    }
    if by_len.is_empty() {
        return None;
    }
    Some(by_len.values().map(|(s, n)| s / *n as f64).sum::<f64>() / by_len.len() as f64)
}

/// Spearman between predicted and gold distances over the unordered pairs
/// of unmasked tokens.
pub fn sentence_dspr(pred_sq: ndarray::ArrayView2<'_, f64>, gold: &TreeGold, mask: Option<&[bool]>) -> Option<f64> {
    let keep: Vec<usize> = (0..gold.len()).filter(|&i| !mask.is_some_and(|m| m[i])).collect();
    let mut p = Vec::new();
    let mut g = Vec::new();
    for (a, &i) in keep.iter().enumerate() {
        for &j in &keep[a + 1..] {
            p.push(pred_sq[[i, j]]);
            g.push(f64::from(gold.dist[[i, j]]));
        }
    }
    spearman(&p, &g)
}

/// Whether the unmasked token of least predicted depth (first index on
/// ties) is the gold root, and the depth Spearman over unmasked tokens.
pub fn sentence_root_nspr(pred_depth: &[f64], record: &SentenceRecord, gold: &TreeGold, mask: Option<&[bool]>) -> (bool, Option<f64>) {
    let keep: Vec<usize> = (0..gold.len()).filter(|&i| !mask.is_some_and(|m| m[i])).collect();
    let mut argmin: Option<usize> = None;
    for &i in &keep {
        if argmin.is_none_or(|a| pred_depth[i] < pred_depth[a]) {
            argmin = Some(i);
        }
    }
    let hit = argmin.is_some() && argmin == record.root();
    let p: Vec<f64> = keep.iter().map(|&i| pred_depth[i]).collect();
    let g: Vec<f64> = keep.iter().map(|&i| f64::from(gold.depth[i])).collect();
    (hit, spearman(&p, &g))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationRecall {
    pub relation: String,
    pub mean_gold_length: f64,
    pub gold: usize,
    pub recalled: usize,
    pub recall: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EdgeLengthReport {
    /// Edge length `|i − j|` → count.
    pub gold_lengths: BTreeMap<usize, usize>,
    pub predicted_lengths: BTreeMap<usize, usize>,
    /// Sorted by mean gold length, longest first, then by name.
    pub relations: Vec<RelationRecall>,
}

/// Edge-length histograms and per-relation recall. A gold edge takes the
/// relation label of its dependent; root attachments are not edges.
pub fn edge_length_analysis(records: &[SentenceRecord], predicted: &[BTreeSet<Edge>], masks: &[Option<Vec<bool>>]) -> EdgeLengthReport {
    let mut rep = EdgeLengthReport::default();
    let mut rel: BTreeMap<String, (usize, usize, usize)> = BTreeMap::new();
    for ((r, pred), mask) in records.iter().zip(predicted).zip(masks) {
        for &(i, j) in pred {
            *rep.predicted_lengths.entry(j - i).or_default() += 1;
        }
        for (dep, &h) in r.head.iter().enumerate() {
            if h == 0 {
                continue;
            }
            let head = h - 1;
            if mask.as_ref().is_some_and(|m| m[dep] || m[head]) {
                continue;
            }
            let e = (dep.min(head), dep.max(head));
            let len = e.1 - e.0;
            *rep.gold_lengths.entry(len).or_default() += 1;
            let entry = rel.entry(r.deprel[dep].clone()).or_default();
            entry.0 += 1;
            entry.1 += usize::from(pred.contains(&e));
            entry.2 += len;
        }
    }
    rep.relations = rel
        .into_iter()
        .map(|(relation, (gold, recalled, total_len))| RelationRecall {
            relation,
            mean_gold_length: total_len as f64 / gold as f64,
            gold,
            recalled,
            recall: recalled as f64 / gold as f64,
        })
        .collect();
    rep.relations
        .sort_by(|a, b| b.mean_gold_length.total_cmp(&a.mean_gold_length).then_with(|| a.relation.cmp(&b.relation)));
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::tree_metrics;
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;

    #[test]
    fn uuas_extremes() {
        let g = BTreeSet::from([(0, 1), (1, 2)]);
        assert_eq!(uuas(&g, &g), Some(1.0));
        assert_eq!(uuas(&BTreeSet::from([(0, 2)]), &g), Some(0.0));
        assert_eq!(uuas(&g, &BTreeSet::new()), None);
        assert_eq!(corpus_uuas(&[(1, 1), (0, 3)], false), Some(0.25));
        assert_eq!(corpus_uuas(&[(1, 1), (0, 3)], true), Some(0.5));
    }

    #[test]
    fn spearman_cases() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(spearman(&x, &[10.0, 20.0, 30.0, 45.0]), Some(1.0));
        assert_eq!(spearman(&x, &[4.0, 3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(spearman(&x, &[1.0; 4]), None);
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
        // scipy.stats.spearmanr([1,2,2,3,5], [2,1,4,4,3])
        let r = spearman(&[1.0, 2.0, 2.0, 3.0, 5.0], &[2.0, 1.0, 4.0, 4.0, 3.0]).unwrap();
        assert_abs_diff_eq!(r, 0.394_736_842_105_263_2, epsilon = 1e-12);
    }

    #[test]
    fn bucketed_mean_averages_lengths_first() {
        let v = [(5, 1.0), (5, 0.0), (6, 1.0), (4, 0.0), (51, 0.0)];
        assert_eq!(length_bucketed_mean(&v, 5, 50), Some(0.75));
        assert_eq!(length_bucketed_mean(&[(3, 1.0)], 5, 50), None);
    }

    fn chain(t: usize) -> SentenceRecord {
        SentenceRecord::from_heads(vec!["w".into(); t], (0..t).collect())
    }

    #[test]
    fn root_and_nspr_cases() {
        let r = chain(4);
        let g = tree_metrics(&r);
        let depth: Vec<f64> = g.depth.iter().map(|&d| f64::from(d)).collect();
        assert_eq!(sentence_root_nspr(&depth, &r, &g, None), (true, Some(1.0)));
        // constant predictions: first index wins, Spearman undefined
        let (hit, s) = sentence_root_nspr(&[2.0; 4], &r, &g, None);
        assert!(hit && s.is_none());
        let (hit, _) = sentence_root_nspr(&depth, &r, &g, Some(&[true, false, false, false]));
        assert!(!hit);
    }

    #[test]
    fn dspr_on_gold_is_one() {
        let r = chain(5);
        let g = tree_metrics(&r);
        let sq: Array2<f64> = g.dist.mapv(f64::from);
        assert_eq!(sentence_dspr(sq.view(), &g, None), Some(1.0));
        assert_eq!(sentence_dspr((-sq).view(), &g, None), Some(-1.0));
    }

    #[test]
    fn edge_lengths_on_gold_and_chain() {
        // star: every token attaches to token 1
        let mut star = SentenceRecord::from_heads(vec!["w".into(); 5], vec![0, 1, 1, 1, 1]);
        star.deprel = vec!["root".into(), "a".into(), "b".into(), "c".into(), "d".into()];
        let gold = star.gold_edges(None);
        let same = edge_length_analysis(&[star.clone()], &[gold.clone()], &[None]);
        assert_eq!(same.gold_lengths, same.predicted_lengths);
        assert!(same.relations.iter().all(|r| r.recall == 1.0));
        assert_eq!(same.relations[0].relation, "d");
        let chain_pred = BTreeSet::from([(0, 1), (1, 2), (2, 3), (3, 4)]);
        let rep = edge_length_analysis(&[star], &[chain_pred], &[None]);
        assert_eq!(rep.relations[0].recall, 0.0);
        assert_eq!(rep.relations.last().unwrap().recall, 1.0);
    }
}
