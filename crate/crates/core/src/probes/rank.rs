use super::Model;
use crate::data::SentimentExample;
use std::collections::BTreeMap;

/// Mean polarity gap `d(q, c_neg) − d(q, c_pos)` of one word type.
#[derive(Debug, Clone, PartialEq)]
pub struct WordGap {
    pub word: String,
    pub gap: f64,
    pub occurrences: usize,
}

fn ignored(word: &str) -> bool {
    word.starts_with("##") || word.parse::<f64>().is_ok() || word.replace([',', '.'], "").parse::<u64>().is_ok()
}

/// Word types ordered from most positive to most negative. Subword pieces
/// (`##…`) and numerals are skipped; equal gaps keep lexicographic order.
/// Returns `None` when no embedded example contributes a word.
pub fn rank_word_sentiment(corpus: &[SentimentExample], model: &Model) -> Option<Vec<WordGap>> {
    let heads = model.heads.as_ref()?;
    let space = model.space();
    let mut acc: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for ex in corpus {
        let Some(emb) = &ex.embedding else { continue };
        for (word, q) in ex.tokens.iter().zip(model.project_sentence(emb.view())) {
            if ignored(word) {
                continue;
            }
            let e = acc.entry(word.as_str()).or_default();
            e.0 += space.dist(&q, &heads.neg) - space.dist(&q, &heads.pos);
            e.1 += 1;
        }
    }
    if acc.is_empty() {
        return None;
    }
    let mut out: Vec<WordGap> = acc
        .into_iter()
        .map(|(w, (sum, n))| WordGap {
            word: w.to_string(),
            gap: sum / n as f64,
            occurrences: n,
        })
        .collect();
    // stable sort preserves the lexicographic order of the BTreeMap on ties
    out.sort_by(|a, b| b.gap.total_cmp(&a.gap));
    Some(out)
}
