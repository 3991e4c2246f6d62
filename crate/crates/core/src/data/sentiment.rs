use super::{read_to_string, DataError, Result};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn flipped(self) -> Self {
        match self {
            Polarity::Positive => Polarity::Negative,
            Polarity::Negative => Polarity::Positive,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentimentExample {
    pub tokens: Vec<String>,
    pub label: Polarity,
    pub embedding: Option<Array2<f64>>,
}

/// Parses `label<TAB>text` lines with label `1` (positive) or `0`
/// (negative). Text is split on whitespace; blank lines are ignored.
pub fn parse_sentiment_tsv(text: &str) -> Result<Vec<SentimentExample>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (label, body) = line.split_once('\t').unwrap_or((line, ""));
        let label = match label.trim() {
            "1" => Polarity::Positive,
            "0" => Polarity::Negative,
            other => {
                return Err(DataError::UnknownLabel {
                    line: i + 1,
                    label: other.to_string(),
                })
            }
        };
        out.push(SentimentExample {
            tokens: body.split_whitespace().map(str::to_string).collect(),
            label,
            embedding: None,
        });
    }
    Ok(out)
}

pub fn load_sentiment_tsv(path: impl AsRef<Path>) -> Result<Vec<SentimentExample>> {
    let path = path.as_ref();
    let examples = parse_sentiment_tsv(&read_to_string(path)?)?;
    let pos = examples.iter().filter(|e| e.label == Polarity::Positive).count();
    log::info!(
        "{}: {} examples ({} positive, {} negative)",
        path.display(),
        examples.len(),
        pos,
        examples.len() - pos
    );
    if examples.is_empty() {
        return Err(DataError::NoSentences(path.display().to_string()));
    }
    if pos * 10 < examples.len() * 4 || pos * 10 > examples.len() * 6 {
        log::warn!("{}: label split is unbalanced", path.display());
    }
    Ok(examples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels() {
        let ex = parse_sentiment_tsv("1\tgreat movie\n0\tawful\n").unwrap();
        assert_eq!(ex[0].label, Polarity::Positive);
        assert_eq!(ex[0].tokens, vec!["great", "movie"]);
        assert_eq!(ex[1].label, Polarity::Negative);
    }

    #[test]
    fn unknown_label() {
        assert!(matches!(
            parse_sentiment_tsv("2\tmeh\n"),
            Err(DataError::UnknownLabel { line: 1, .. })
        ));
    }
}
