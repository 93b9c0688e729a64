//! Corpus data model: word-aligned utterances with f0 tracks.
//!
//! Silence is never a [`Word`]; gaps between word spans are silence and carry
//! no phones. Phone symbols are opaque small integers.

mod io;
mod synth;

use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use io::{corpus_to_string, load_corpus, parse_corpus, save_corpus};
pub use synth::{synth_corpus, SynthConfig, FRAME_PERIOD};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Word {
    pub token: String,
    pub phone_count: usize,
    pub phone_symbols: Vec<usize>,
    #[serde(rename = "start")]
    pub start_time: f64,
    #[serde(rename = "end")]
    pub end_time: f64,
    pub emphasized: bool,
}

impl Word {
    pub fn duration(&self) -> f64 {
        self.end_time - self.start_time
    }

    /// Half-open span membership, so adjacent words never share a frame.
    pub fn contains(&self, t: f64) -> bool {
        t >= self.start_time && t < self.end_time
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F0Frame {
    #[serde(rename = "t")]
    pub time: f64,
    /// Hz; meaningful only when `voiced`.
    pub f0: f64,
    pub voiced: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub id: String,
    pub speaker: usize,
    pub words: Vec<Word>,
    #[serde(rename = "f0")]
    pub f0_track: Vec<F0Frame>,
}

impl Utterance {
    pub fn phone_count(&self) -> usize {
        self.words.iter().map(|w| w.phone_count).sum()
    }

    /// Word index of every phone, in order.
    pub fn phone_word_index(&self) -> Vec<usize> {
        self.words
            .iter()
            .enumerate()
            .flat_map(|(i, w)| std::iter::repeat_n(i, w.phone_count))
            .collect()
    }

    /// Half-open phone ranges `[start, end)` of each word.
    pub fn word_phone_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut at = 0;
        self.words
            .iter()
            .map(|w| {
                let r = at..at + w.phone_count;
                at += w.phone_count;
                r
            })
            .collect()
    }

    /// Natural-log f0 of voiced frames inside `word`'s span.
    pub fn word_log_f0(&self, word: &Word) -> Vec<f64> {
        self.f0_track
            .iter()
            .filter(|f| f.voiced && word.contains(f.time))
            .map(|f| f.f0.ln())
            .collect()
    }

    /// Natural-log f0 of voiced frames inside any word span.
    pub fn speech_log_f0(&self) -> Vec<f64> {
        self.f0_track
            .iter()
            .filter(|f| f.voiced && self.words.iter().any(|w| w.contains(f.time)))
            .map(|f| f.f0.ln())
            .collect()
    }
}

/// Lists every violated invariant; an empty report means the utterance is valid.
pub fn validate_utterance(u: &Utterance) -> Vec<String> {
    let mut report = Vec::new();
    if u.words.is_empty() {
        report.push("no words".to_string());
    }
    for (i, w) in u.words.iter().enumerate() {
        if !(w.start_time.is_finite() && w.end_time.is_finite()) {
            report.push(format!("word {i} ({}): non-finite time", w.token));
            continue;
        }
        if w.start_time < 0.0 {
            report.push(format!("word {i} ({}): negative start time", w.token));
        }
        if w.end_time <= w.start_time {
            report.push(format!(
                "word {i} ({}): duration violation, end {} <= start {}",
                w.token, w.end_time, w.start_time
            ));
        }
        if w.phone_count == 0 {
            report.push(format!("word {i} ({}): phone_count must be >= 1", w.token));
        }
        if w.phone_symbols.len() != w.phone_count {
            report.push(format!(
                "word {i} ({}): phone_symbols length {} != phone_count {}",
                w.token,
                w.phone_symbols.len(),
                w.phone_count
            ));
        }
    }
    for (i, pair) in u.words.windows(2).enumerate() {
        if pair[1].start_time < pair[0].end_time {
            report.push(format!(
                "ordering: word {} starts at {} before word {} ends at {}",
                i + 1,
                pair[1].start_time,
                i,
                pair[0].end_time
            ));
        }
    }
    for (i, f) in u.f0_track.iter().enumerate() {
        if !f.time.is_finite() || f.time < 0.0 {
            report.push(format!("frame {i}: invalid time {}", f.time));
        }
        if f.voiced && !(f.f0.is_finite() && f.f0 > 0.0) {
            report.push(format!("frame {i}: voiced frame with f0 {}", f.f0));
        }
    }
    for (i, pair) in u.f0_track.windows(2).enumerate() {
        if pair[1].time <= pair[0].time {
            report.push(format!("frame {}: times not strictly increasing", i + 1));
        }
    }
    if !u.f0_track.iter().any(|f| f.voiced) {
        report.push("no voiced frames".to_string());
    } else if !u
        .f0_track
        .iter()
        .any(|f| f.voiced && u.words.iter().any(|w| w.contains(f.time)))
    {
        report.push("no voiced frames inside word spans".to_string());
    }
    report
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub utterances: Vec<Utterance>,
    pub speakers: BTreeSet<usize>,
}

impl Corpus {
    /// Validates every utterance and id uniqueness; the speaker set is derived.
    pub fn new(utterances: Vec<Utterance>) -> Result<Self> {
        let mut seen = HashSet::new();
        for u in &utterances {
            let report = validate_utterance(u);
            if !report.is_empty() {
                return Err(Error::Validation {
                    utt: u.id.clone(),
                    violations: report.join("; "),
                });
            }
            if !seen.insert(u.id.as_str()) {
                return Err(Error::Validation {
                    utt: u.id.clone(),
                    violations: "duplicate utterance id".into(),
                });
            }
        }
        let speakers = utterances.iter().map(|u| u.speaker).collect();
        Ok(Self {
            utterances,
            speakers,
        })
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn word_count(&self) -> usize {
        self.utterances.iter().map(|u| u.words.len()).sum()
    }

    pub fn get(&self, id: &str) -> Option<&Utterance> {
        self.utterances.iter().find(|u| u.id == id)
    }

    /// Largest phone symbol + 1.
    pub fn phone_vocab_size(&self) -> usize {
        self.utterances
            .iter()
            .flat_map(|u| u.words.iter())
            .flat_map(|w| w.phone_symbols.iter().copied())
            .max()
            .map_or(0, |m| m + 1)
    }

    fn subset(&self, idx: &[usize]) -> Corpus {
        let utterances: Vec<Utterance> = idx.iter().map(|&i| self.utterances[i].clone()).collect();
        let speakers = utterances.iter().map(|u| u.speaker).collect();
        Corpus {
            utterances,
            speakers,
        }
    }
}

/// Deterministic utterance-level train/dev partition.
///
/// The dev side gets `round(fraction * n)` utterances clamped to `[1, n-1]`;
/// both sides keep the corpus order.
pub fn split_heldout(c: &Corpus, fraction: f64, seed: u64) -> Result<(Corpus, Corpus)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!(
            "held-out fraction {fraction} not in (0, 1)"
        )));
    }
    let n = c.len();
    if n < 2 {
        return Err(Error::CorpusTooSmall(format!(
            "{n} utterance(s); a split needs at least 2"
        )));
    }
    let n_dev = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut is_dev = vec![false; n];
    for &i in &order[..n_dev] {
        is_dev[i] = true;
    }
    let (dev, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| is_dev[i]);
    Ok((c.subset(&train), c.subset(&dev)))
}
