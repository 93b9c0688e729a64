//! Inference-time control: rectification to constituent-constant
//! trajectories, user boosting, and realization as physical prosody.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::corpus::Utterance;
use crate::features::{NormStats, N_PC};
use crate::nnet::Matrix;
use crate::predictor::PredictorModel;
use crate::{Error, Result};

fn check_rows(pc: &Matrix, u: &Utterance) -> Result<()> {
    if pc.rows() != u.phone_count() || pc.cols() != N_PC {
        return Err(Error::Shape(format!(
            "{}x{} controls for {} ({} phones)",
            pc.rows(),
            pc.cols(),
            u.id,
            u.phone_count()
        )));
    }
    Ok(())
}

/// Mean of `rows` in column `k`, written as an offset from the first value so
/// that a constant run pools to exactly that constant.
fn pooled(pc: &Matrix, rows: std::ops::Range<usize>, k: usize) -> f64 {
    let first = pc.get(rows.start, k);
    let n = rows.len() as f64;
    first + rows.map(|t| pc.get(t, k) - first).sum::<f64>() / n
}

/// Replaces the sentence columns by their utterance mean and the word columns
/// by their per-word mean.
pub fn rectify(pred: &Matrix, u: &Utterance) -> Result<Matrix> {
    check_rows(pred, u)?;
    let mut out = pred.clone();
    let t = pred.rows();
    for k in 0..2 {
        let m = pooled(pred, 0..t, k);
        (0..t).for_each(|row| out.set(row, k, m));
    }
    for range in u.word_phone_ranges() {
        for k in 2..N_PC {
            let m = pooled(pred, range.clone(), k);
            range.clone().for_each(|row| out.set(row, k, m));
        }
    }
    Ok(out)
}

/// User offsets in normalized control space. `alpha`/`beta` shift the
/// sentence duration and spread everywhere; `gamma`/`delta` shift the word
/// duration and spread of the focal words only.
///
/// These are unrelated to the per-target loss weights of the predictor.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BoostSpec {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub focal_words: BTreeSet<usize>,
}

pub const BOOST_PRESET_NAMES: [&str; 3] = ["pc-unsup", "hybrid", "baseline-sent"];

impl BoostSpec {
    /// Tuned offsets without any focal word.
    pub fn preset(name: &str) -> Result<Self> {
        let (alpha, beta, gamma, delta) = match name {
            "pc-unsup" => (0.0, 0.0, 0.25, 1.30),
            "hybrid" => (0.0, 0.0, 0.0, 1.5),
            "baseline-sent" => (0.0, 0.5, 0.0, 0.0),
            other => {
                return Err(Error::Config(format!(
                    "unknown boost preset {other:?}; known: {}",
                    BOOST_PRESET_NAMES.join(", ")
                )))
            }
        };
        Ok(Self {
            alpha,
            beta,
            gamma,
            delta,
            focal_words: BTreeSet::new(),
        })
    }

    pub fn with_focus(mut self, words: impl IntoIterator<Item = usize>) -> Self {
        self.focal_words.extend(words);
        self
    }
}

/// Indices of the words whose token equals `token`, ignoring ASCII case.
pub fn words_matching(u: &Utterance, token: &str) -> Vec<usize> {
    u.words
        .iter()
        .enumerate()
        .filter(|(_, w)| w.token.eq_ignore_ascii_case(token))
        .map(|(i, _)| i)
        .collect()
}

pub fn apply_boost(pc: &Matrix, spec: &BoostSpec, u: &Utterance) -> Result<Matrix> {
    check_rows(pc, u)?;
    if let Some(&bad) = spec.focal_words.iter().find(|&&w| w >= u.words.len()) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            len: u.words.len(),
        });
    }
    let mut out = pc.clone();
    for row in 0..pc.rows() {
        out.set(row, 0, pc.get(row, 0) + spec.alpha);
        out.set(row, 1, pc.get(row, 1) + spec.beta);
    }
    let ranges = u.word_phone_ranges();
    for &w in &spec.focal_words {
        for row in ranges[w].clone() {
            out.set(row, 2, pc.get(row, 2) + spec.gamma);
            out.set(row, 3, pc.get(row, 3) + spec.delta);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProsodyRealization {
    /// Seconds, one entry per phone.
    pub per_phone_duration: Vec<f64>,
    /// Log-f0 95-5 spread in nats, one entry per word.
    pub word_f0_spread: Vec<f64>,
    pub sentence_f0_spread: f64,
}

/// Maps rectified controls back to physical units. Each constituent is read
/// from its first phone.
pub fn realize(pc: &Matrix, u: &Utterance, stats: &NormStats) -> Result<ProsodyRealization> {
    check_rows(pc, u)?;
    let ranges = u.word_phone_ranges();
    let mut per_phone_duration = Vec::with_capacity(pc.rows());
    let mut word_f0_spread = Vec::with_capacity(ranges.len());
    let mut sentence_f0_spread = f64::NAN;
    for range in ranges {
        let row: [f64; N_PC] = pc.row(range.start).try_into().expect("four columns");
        let [s_dur, s_f0, d_dur, d_f0] = stats.from_pc(&row);
        let dur = (s_dur + d_dur).exp();
        per_phone_duration.extend(std::iter::repeat_n(dur, range.len()));
        word_f0_spread.push(s_f0 + d_f0);
        sentence_f0_spread = s_f0;
    }
    Ok(ProsodyRealization {
        per_phone_duration,
        word_f0_spread,
        sentence_f0_spread,
    })
}

/// Predict, rectify, boost, realize.
pub fn focus_pipeline(
    model: &PredictorModel,
    u: &Utterance,
    spec: &BoostSpec,
    stats: &NormStats,
) -> Result<ProsodyRealization> {
    let pred = model.predict(u)?;
    let boosted = apply_boost(&rectify(&pred, u)?, spec, u)?;
    realize(&boosted, u, stats)
}
