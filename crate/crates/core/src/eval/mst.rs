use ndarray::ArrayView2;
use std::collections::BTreeSet;

/// Undirected edge `(i, j)` with `i < j`.
pub type Edge = (usize, usize);

fn edge(a: usize, b: usize) -> Edge {
    (a.min(b), a.max(b))
}

/// Minimum spanning tree over the tokens not excluded by `mask` (`true` =
/// excluded), weighted by the predicted squared distances. Prim's algorithm
/// from the lowest eligible index; among equal weights the edge that is
/// smaller as `(min index, max index)` wins. Fewer than two eligible tokens
/// yield no edges.
pub fn mst_decode(sq_dist: ArrayView2<'_, f64>, mask: Option<&[bool]>) -> BTreeSet<Edge> {
    let t = sq_dist.nrows();
    assert_eq!(t, sq_dist.ncols(), "distance matrix must be square");
    let eligible: Vec<usize> = (0..t).filter(|&i| !mask.is_some_and(|m| m[i])).collect();
    let mut out = BTreeSet::new();
    let Some((&first, rest)) = eligible.split_first() else {
        return out;
    };
    // best known link into the tree for every outside vertex
    let mut best: Vec<(usize, (f64, Edge))> = rest.iter().map(|&v| (v, (sq_dist[[first, v]], edge(first, v)))).collect();
    let key = |a: &(f64, Edge), b: &(f64, Edge)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    while !best.is_empty() {
        let pick = (0..best.len())
            .min_by(|&a, &b| key(&best[a].1, &best[b].1))
            .expect("nonempty");
        let (v, (_, e)) = best.swap_remove(pick);
        out.insert(e);
        for (u, link) in best.iter_mut() {
            let cand = (sq_dist[[v, *u]], edge(v, *u));
            if key(&cand, link).is_lt() {
                *link = cand;
            }
        }
    }
    out
}
