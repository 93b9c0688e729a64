//! Sentence- and word-level prosodic statistics and their phone-level targets.
//!
//! Four statistics are extracted per utterance, all in natural-log units:
//! sentence log per-phone duration, sentence log-f0 spread, and the same two
//! per word. The prosodic-control (PC) vector of a word is
//! `[S_dur, S_f0, W_dur - S_dur, W_f0 - S_f0]`, mapped through the corpus-wide
//! scale `x / (3 var)` (or `x / (3 sd)` with [`NormScale::StdDev`]).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Utterance};
use crate::nnet::Matrix;
use crate::{Error, Result};

pub const N_PC: usize = 4;

/// Linear-interpolated percentile of an ascending slice at rank `p * (n - 1)`.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let rank = p * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// 95th minus 5th percentile; `None` with fewer than two values.
pub fn log_f0_spread(mut log_f0: Vec<f64>) -> Option<f64> {
    if log_f0.len() < 2 {
        return None;
    }
    log_f0.sort_by(f64::total_cmp);
    Some(percentile(&log_f0, 0.95) - percentile(&log_f0, 0.05))
}

pub fn sentence_dur_stat(u: &Utterance) -> f64 {
    let speech: f64 = u.words.iter().map(|w| w.duration()).sum();
    (speech / u.phone_count() as f64).ln()
}

pub fn sentence_f0_spread(u: &Utterance) -> Result<f64> {
    let values = u.speech_log_f0();
    let found = values.len();
    log_f0_spread(values).ok_or_else(|| Error::TooFewVoiced {
        utt: u.id.clone(),
        found,
    })
}

/// Per-word log per-phone durations and log-f0 spreads.
///
/// Words with fewer than two voiced frames take the sentence spread, so their
/// word-level f0 delta is zero.
pub fn word_stats(u: &Utterance) -> Result<(Vec<f64>, Vec<f64>)> {
    let w_dur = u
        .words
        .iter()
        .map(|w| (w.duration() / w.phone_count as f64).ln())
        .collect();
    let mut sentence = None;
    let mut w_f0 = Vec::with_capacity(u.words.len());
    for w in &u.words {
        let spread = match log_f0_spread(u.word_log_f0(w)) {
            Some(s) => s,
            None => match sentence {
                Some(s) => s,
                None => *sentence.insert(sentence_f0_spread(u)?),
            },
        };
        w_f0.push(spread);
    }
    Ok((w_dur, w_f0))
}

/// Raw (unnormalized) statistics of one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct RawPC {
    pub s_dur: f64,
    pub s_f0: f64,
    pub w_dur: Vec<f64>,
    pub w_f0: Vec<f64>,
}

impl RawPC {
    pub fn extract(u: &Utterance) -> Result<Self> {
        let (w_dur, w_f0) = word_stats(u)?;
        Ok(Self {
            s_dur: sentence_dur_stat(u),
            s_f0: sentence_f0_spread(u)?,
            w_dur,
            w_f0,
        })
    }

    /// `[S_dur, S_f0, W_dur - S_dur, W_f0 - S_f0]` for every word.
    pub fn components(&self) -> Vec<[f64; N_PC]> {
        self.w_dur
            .iter()
            .zip(&self.w_f0)
            .map(|(d, f)| [self.s_dur, self.s_f0, d - self.s_dur, f - self.s_f0])
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormScale {
    /// Divide by three times the variance.
    #[default]
    Variance,
    /// Divide by three times the standard deviation.
    StdDev,
}

pub const NORM_STATS_VERSION: u32 = 1;

/// Corpus-wide population variance and mean of each PC component.
///
/// The means are not part of the scale map itself; they centre targets at
/// extraction and are added back at realization, so an all-zero PC realizes
/// to corpus-average prosody.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub format_version: u32,
    pub scale: NormScale,
    pub variance: [f64; N_PC],
    pub mean: [f64; N_PC],
}

impl NormStats {
    pub fn new(variance: [f64; N_PC], mean: [f64; N_PC], scale: NormScale) -> Result<Self> {
        if let Some(component) = variance.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::ZeroVariance { component });
        }
        Ok(Self {
            format_version: NORM_STATS_VERSION,
            scale,
            variance,
            mean,
        })
    }

    /// Half-width of the raw interval mapped onto `[-1, 1]`.
    pub fn half_range(&self, i: usize) -> f64 {
        match self.scale {
            NormScale::Variance => 3.0 * self.variance[i],
            NormScale::StdDev => 3.0 * self.variance[i].sqrt(),
        }
    }

    pub fn normalize_value(&self, i: usize, x: f64) -> f64 {
        x / self.half_range(i)
    }

    pub fn denormalize_value(&self, i: usize, y: f64) -> f64 {
        y * self.half_range(i)
    }

    /// Centre then normalize one raw component vector.
    pub fn to_pc(&self, raw: &[f64; N_PC]) -> [f64; N_PC] {
        std::array::from_fn(|i| self.normalize_value(i, raw[i] - self.mean[i]))
    }

    /// Inverse of [`NormStats::to_pc`].
    pub fn from_pc(&self, pc: &[f64; N_PC]) -> [f64; N_PC] {
        std::array::from_fn(|i| self.denormalize_value(i, pc[i]) + self.mean[i])
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let stats: NormStats = serde_json::from_str(&fs::read_to_string(path)?)?;
        if stats.format_version != NORM_STATS_VERSION {
            return Err(Error::Version {
                what: "norm-stats",
                found: stats.format_version,
                expected: NORM_STATS_VERSION,
            });
        }
        NormStats::new(stats.variance, stats.mean, stats.scale)
    }
}

fn mean_and_population_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

/// Population statistics over all constituents: one sample per utterance for
/// the sentence components, one per word for the word deltas.
pub fn compute_norm_stats(c: &Corpus, scale: NormScale) -> Result<NormStats> {
    if c.is_empty() {
        return Err(Error::CorpusTooSmall("empty corpus".into()));
    }
    let mut samples: [Vec<f64>; N_PC] = Default::default();
    for u in &c.utterances {
        let raw = RawPC::extract(u)?;
        samples[0].push(raw.s_dur);
        samples[1].push(raw.s_f0);
        for comp in raw.components() {
            samples[2].push(comp[2]);
            samples[3].push(comp[3]);
        }
    }
    let mut variance = [0.0; N_PC];
    let mut mean = [0.0; N_PC];
    for i in 0..N_PC {
        let (m, v) = mean_and_population_variance(&samples[i]);
        // rounding residue of a constant column is not variance
        if v <= 1e-24 * m.abs().max(1.0).powi(2) {
            return Err(Error::ZeroVariance { component: i });
        }
        mean[i] = m;
        variance[i] = v;
    }
    NormStats::new(variance, mean, scale)
}

/// Applies the scale map to every word's components, without centring or clipping.
pub fn normalize(raw: &RawPC, stats: &NormStats) -> Vec<[f64; N_PC]> {
    raw.components()
        .iter()
        .map(|c| std::array::from_fn(|i| stats.normalize_value(i, c[i])))
        .collect()
}

pub fn denormalize(pc: &[[f64; N_PC]], stats: &NormStats) -> Vec<[f64; N_PC]> {
    pc.iter()
        .map(|c| std::array::from_fn(|i| stats.denormalize_value(i, c[i])))
        .collect()
}

/// Phone-level targets with their replication weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PhoneTargets {
    /// `T x 4`.
    pub targets: Matrix,
    /// `T x 4`; each constituent's phones sum to one per column.
    pub weights: Matrix,
    pub word_index: Vec<usize>,
}

impl PhoneTargets {
    pub fn len(&self) -> usize {
        self.word_index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.word_index.is_empty()
    }
}

/// Replicates per-word PC vectors over phones; sentence columns are weighted
/// `1 / T`, word columns `1 / phone_count` of the owning word.
pub fn expand_to_phones(u: &Utterance, pc: &[[f64; N_PC]]) -> Result<PhoneTargets> {
    if pc.len() != u.words.len() {
        return Err(Error::Shape(format!(
            "{} PC vectors for {} words in {}",
            pc.len(),
            u.words.len(),
            u.id
        )));
    }
    let word_index = u.phone_word_index();
    let t = word_index.len();
    let mut targets = Matrix::zeros(t, N_PC);
    let mut weights = Matrix::zeros(t, N_PC);
    let sentence_w = 1.0 / t as f64;
    for (row, &w) in word_index.iter().enumerate() {
        let word_w = 1.0 / u.words[w].phone_count as f64;
        targets.row_mut(row).copy_from_slice(&pc[w]);
        weights
            .row_mut(row)
            .copy_from_slice(&[sentence_w, sentence_w, word_w, word_w]);
    }
    Ok(PhoneTargets {
        targets,
        weights,
        word_index,
    })
}

/// Raw statistics, centred and normalized, expanded to phones.
pub fn extract_pc_targets(u: &Utterance, stats: &NormStats) -> Result<PhoneTargets> {
    let pc: Vec<[f64; N_PC]> = RawPC::extract(u)?
        .components()
        .iter()
        .map(|c| stats.to_pc(c))
        .collect();
    expand_to_phones(u, &pc)
}
