use ndarray::Array2;
use std::collections::{BTreeSet, VecDeque};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error("empty sentence")]
    Empty,
    #[error("expected exactly one root, found {0}")]
    RootCount(usize),
    #[error("token {token} has out-of-range head {head}")]
    HeadOutOfRange { token: usize, head: usize },
    #[error("head cycle through token {0}")]
    Cycle(usize),
}

/// One sentence of a dependency treebank. Token indices in `head` are
/// 1-based with 0 marking the root, as in CoNLL files.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SentenceRecord {
    pub tokens: Vec<String>,
    pub head: Vec<usize>,
    pub upos: Vec<String>,
    pub xpos: Vec<String>,
    pub deprel: Vec<String>,
    /// `t × n` embedding matrix, present once paired with a PEMB file.
    pub embedding: Option<Array2<f64>>,
}

impl SentenceRecord {
    /// Record with the given tokens and heads and placeholder tags.
    pub fn from_heads(tokens: Vec<String>, head: Vec<usize>) -> Self {
        let t = head.len();
        Self {
            tokens,
            head,
            upos: vec!["X".into(); t],
            xpos: vec!["X".into(); t],
            deprel: vec!["dep".into(); t],
            embedding: None,
        }
    }

    pub fn len(&self) -> usize {
        self.head.len()
    }

    pub fn is_empty(&self) -> bool {
        self.head.is_empty()
    }

    /// 0-based index of the root token.
    pub fn root(&self) -> Option<usize> {
        self.head.iter().position(|&h| h == 0)
    }

    pub fn validate(&self) -> Result<(), TreeError> {
        let t = self.len();
        if t == 0 {
            return Err(TreeError::Empty);
        }
        let roots = self.head.iter().filter(|&&h| h == 0).count();
        if roots != 1 {
            return Err(TreeError::RootCount(roots));
        }
        for (i, &h) in self.head.iter().enumerate() {
            if h > t || h == i + 1 {
                return Err(TreeError::HeadOutOfRange { token: i + 1, head: h });
            }
        }
        // with one root and in-range heads, every walk either reaches the
        // root within t steps or is stuck on a cycle
        for start in 0..t {
            let mut cur = start;
            let mut steps = 0;
            while self.head[cur] != 0 {
                cur = self.head[cur] - 1;
                steps += 1;
                if steps > t {
                    return Err(TreeError::Cycle(start + 1));
                }
            }
        }
        Ok(())
    }

    /// Per-token punctuation flags under `set`.
    pub fn punct_mask(&self, set: &PunctuationSet) -> Vec<bool> {
        (0..self.len())
            .map(|i| {
                set.contains(self.upos.get(i).map_or("", String::as_str))
                    || set.contains(self.xpos.get(i).map_or("", String::as_str))
            })
            .collect()
    }

    /// Undirected gold edges as 0-based `(min, max)` pairs, skipping any edge
    /// with an endpoint flagged in `exclude`.
    pub fn gold_edges(&self, exclude: Option<&[bool]>) -> BTreeSet<(usize, usize)> {
        let skip = |i: usize| exclude.is_some_and(|m| m[i]);
        self.head
            .iter()
            .enumerate()
            .filter(|&(_, &h)| h != 0)
            .map(|(i, &h)| (i, h - 1))
            .filter(|&(i, h)| !skip(i) && !skip(h))
            .map(|(i, h)| (i.min(h), i.max(h)))
            .collect()
    }
}

/// Part-of-speech tags treated as punctuation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PunctuationSet(BTreeSet<String>);

impl PunctuationSet {
    pub fn new<I, S>(tags: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self(tags.into_iter().map(Into::into).collect())
    }

    /// No tag counts as punctuation.
    pub fn none() -> Self {
        Self(BTreeSet::new())
    }

    pub fn contains(&self, tag: &str) -> bool {
        self.0.contains(tag)
    }
}

impl Default for PunctuationSet {
    /// PTB punctuation tags plus the universal `PUNCT`.
    fn default() -> Self {
        Self::new(["''", ",", ".", ":", "``", "-LRB-", "-RRB-", "PUNCT"])
    }
}

/// Gold pairwise tree distances and depths (root depth 0).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeGold {
    pub dist: Array2<u32>,
    pub depth: Vec<u32>,
}

impl TreeGold {
    pub fn len(&self) -> usize {
        self.depth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depth.is_empty()
    }
}

/// Tree distances by breadth-first search from every token.
pub fn tree_metrics(record: &SentenceRecord) -> TreeGold {
    let t = record.len();
    let mut adj = vec![Vec::new(); t];
    for (i, &h) in record.head.iter().enumerate() {
        if h != 0 {
            adj[i].push(h - 1);
            adj[h - 1].push(i);
        }
    }
    let mut dist = Array2::<u32>::from_elem((t, t), u32::MAX);
    let mut queue = VecDeque::new();
    for s in 0..t {
        dist[[s, s]] = 0;
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            let du = dist[[s, u]];
            for &v in &adj[u] {
                if dist[[s, v]] == u32::MAX {
                    dist[[s, v]] = du + 1;
                    queue.push_back(v);
                }
            }
        }
    }
    let depth = match record.root() {
        Some(r) => (0..t).map(|i| dist[[r, i]]).collect(),
        None => vec![0; t],
    };
    TreeGold { dist, depth }
}

/// Left-to-right chain over the same tokens: token 1 is the root and every
/// later token attaches to its predecessor.
pub fn linear_baseline(record: &SentenceRecord) -> SentenceRecord {
    let mut out = record.clone();
    out.head = (0..record.len()).collect();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use crate::synthetic::random_heads;
    use rand_chacha::ChaCha8Rng;

    fn rec(head: &[usize]) -> SentenceRecord {
        let toks = (0..head.len()).map(|i| format!("w{i}")).collect();
        SentenceRecord::from_heads(toks, head.to_vec())
    }

    fn floyd_warshall(head: &[usize]) -> Vec<Vec<u32>> {
        let t = head.len();
        let inf = u32::MAX / 4;
        let mut d = vec![vec![inf; t]; t];
        for i in 0..t {
            d[i][i] = 0;
            if head[i] != 0 {
                d[i][head[i] - 1] = 1;
                d[head[i] - 1][i] = 1;
            }
        }
        for k in 0..t {
            for i in 0..t {
                for j in 0..t {
                    if d[i][k] + d[k][j] < d[i][j] {
                        d[i][j] = d[i][k] + d[k][j];
                    }
                }
            }
        }
        d
    }

    #[test]
    fn two_token_sentence() {
        let r = rec(&[2, 0]);
        r.validate().unwrap();
        assert_eq!(r.root(), Some(1));
        let g = tree_metrics(&r);
        assert_eq!(g.dist[[0, 1]], 1);
        assert_eq!(g.depth, vec![1, 0]);
    }

    #[test]
    fn chain_and_star() {
        let chain = rec(&[0, 1, 2]);
        assert_eq!(tree_metrics(&chain).dist[[0, 2]], 2);
        let star = rec(&[0, 1, 1, 1]);
        let g = tree_metrics(&star);
        assert_eq!(g.dist[[1, 3]], 2);
        assert_eq!(g.depth, vec![0, 1, 1, 1]);
    }

    #[test]
    fn invalid_trees() {
        assert_eq!(rec(&[2, 1]).validate(), Err(TreeError::RootCount(0)));
        assert_eq!(rec(&[0, 0]).validate(), Err(TreeError::RootCount(2)));
        assert!(matches!(rec(&[0, 3, 2]).validate(), Err(TreeError::Cycle(_))));
        assert!(matches!(
            rec(&[0, 5]).validate(),
            Err(TreeError::HeadOutOfRange { .. })
        ));
        assert!(matches!(
            rec(&[0, 2]).validate(),
            Err(TreeError::HeadOutOfRange { .. })
        ));
    }

    #[test]
    fn bfs_matches_floyd_warshall() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let t = rng.random_range(1..=10);
            let head = random_heads(&mut rng, t);
            let r = rec(&head);
            r.validate().unwrap();
            let g = tree_metrics(&r);
            let fw = floyd_warshall(&head);
            for i in 0..t {
                for j in 0..t {
                    assert_eq!(g.dist[[i, j]], fw[i][j]);
                }
            }
        }
    }

    #[test]
    fn four_point_condition() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let head = random_heads(&mut rng, 12);
        let d = tree_metrics(&rec(&head)).dist;
        for _ in 0..500 {
            let q: Vec<usize> = (0..4).map(|_| rng.random_range(0..12)).collect();
            let (a, b, c, e) = (q[0], q[1], q[2], q[3]);
            let mut s = [
                d[[a, b]] + d[[c, e]],
                d[[a, c]] + d[[b, e]],
                d[[a, e]] + d[[b, c]],
            ];
            s.sort();
            assert_eq!(s[1], s[2]);
        }
    }

    #[test]
    fn linear_baseline_chain() {
        let one = linear_baseline(&rec(&[0]));
        assert_eq!(one.head, vec![0]);
        let four = linear_baseline(&rec(&[2, 0, 2, 3]));
        assert_eq!(four.head, vec![0, 1, 2, 3]);
        four.validate().unwrap();
        assert_eq!(tree_metrics(&four).dist[[0, 3]], 3);
    }

    #[test]
    fn gold_edges_skip_punctuation() {
        let mut r = rec(&[2, 0, 2]);
        r.xpos[2] = ".".into();
        let mask = r.punct_mask(&PunctuationSet::default());
        assert_eq!(mask, vec![false, false, true]);
        assert_eq!(r.gold_edges(Some(&mask)).len(), 1);
        assert_eq!(r.gold_edges(None).len(), 2);
    }
}
