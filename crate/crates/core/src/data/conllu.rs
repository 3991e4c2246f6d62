use super::{attach_embeddings, read_to_string, DataError, Pemb, Result, SentenceRecord};
use std::path::Path;

/// Parsed treebank plus the file positions of sentences rejected on the
/// way (0-based, counting every sentence block).
#[derive(Debug, Clone, Default)]
pub struct Treebank {
    pub sentences: Vec<SentenceRecord>,
    pub dropped: Vec<usize>,
}

impl Treebank {
    /// Attaches embeddings in file order. An embedding file that still
    /// contains the dropped sentences is accepted and those matrices skipped.
    pub fn attach(&mut self, pemb: &Pemb) -> Result<()> {
        if !self.dropped.is_empty() && pemb.sentences.len() == self.sentences.len() + self.dropped.len() {
            let kept = Pemb {
                dim: pemb.dim,
                sentences: pemb
                    .sentences
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| !self.dropped.contains(i))
                    .map(|(_, m)| m.clone())
                    .collect(),
            };
            return attach_embeddings(&mut self.sentences, &kept);
        }
        attach_embeddings(&mut self.sentences, pemb)
    }
}

/// Reads a 10-column CoNLL file. Multiword-token ranges (`3-4`) and empty
/// nodes (`5.1`) are skipped; sentences that are malformed or do not form a
/// tree are dropped with a warning.
pub fn parse_conllu(path: impl AsRef<Path>) -> Result<Treebank> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    let tb = parse_conllu_str(&text);
    if tb.sentences.is_empty() {
        return Err(DataError::NoSentences(path.display().to_string()));
    }
    if !tb.dropped.is_empty() {
        log::warn!("{}: dropped {} malformed sentences", path.display(), tb.dropped.len());
    }
    Ok(tb)
}

pub fn parse_conllu_str(text: &str) -> Treebank {
    let mut tb = Treebank::default();
    let mut ordinal = 0;
    let mut block: Vec<(usize, &str)> = Vec::new();
    let lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    for (no, line) in lines.chain(std::iter::once((0, ""))) {
        if line.trim().is_empty() {
            if !block.is_empty() {
                match parse_block(&block) {
                    Ok(r) => tb.sentences.push(r),
                    Err(e) => {
                        log::warn!("dropping sentence at line {}: {e}", block[0].0);
                        tb.dropped.push(ordinal);
                    }
                }
                ordinal += 1;
                block.clear();
            }
        } else if !line.starts_with('#') {
            block.push((no, line));
        }
    }
    tb
}

fn parse_block(lines: &[(usize, &str)]) -> Result<SentenceRecord> {
    let mut r = SentenceRecord::default();
    for &(line, text) in lines {
        let cols: Vec<&str> = text.split('\t').collect();
        if cols.len() != 10 {
            return Err(DataError::Malformed {
                line,
                msg: format!("expected 10 tab-separated columns, found {}", cols.len()),
            });
        }
        if cols[0].contains('-') || cols[0].contains('.') {
            continue;
        }
        let id: usize = cols[0].parse().map_err(|_| DataError::Malformed {
            line,
            msg: format!("bad token id {:?}", cols[0]),
        })?;
        if id != r.len() + 1 {
            return Err(DataError::Malformed {
                line,
                msg: format!("token id {id} out of sequence"),
            });
        }
        let head: usize = cols[6].parse().map_err(|_| DataError::Malformed {
            line,
            msg: format!("bad head {:?}", cols[6]),
        })?;
        r.tokens.push(cols[1].to_string());
        r.upos.push(cols[3].to_string());
        r.xpos.push(cols[4].to_string());
        r.head.push(head);
        r.deprel.push(cols[7].to_string());
    }
    r.validate().map_err(|e| DataError::Malformed {
        line: lines[0].0,
        msg: e.to_string(),
    })?;
    Ok(r)
}
