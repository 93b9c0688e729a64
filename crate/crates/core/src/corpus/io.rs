//! JSON-lines corpus files: one utterance object per line, keys in fixed order.

use std::fs;
use std::path::Path;

use super::{Corpus, Utterance};
use crate::{Error, Result};

pub fn corpus_to_string(c: &Corpus) -> Result<String> {
    let mut out = String::new();
    for u in &c.utterances {
        out.push_str(&serde_json::to_string(u)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn save_corpus(c: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, corpus_to_string(c)?)?;
    Ok(())
}

/// Parses corpus text; `origin` is only used in error messages. Blank lines are skipped.
pub fn parse_corpus(text: &str, origin: &Path) -> Result<Corpus> {
    let mut utterances = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let u: Utterance = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line: i + 1,
            msg: e.to_string(),
        })?;
        utterances.push(u);
    }
    Corpus::new(utterances)
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_corpus(&text, path)
}
