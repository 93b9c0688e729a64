//! Synthetic aligned corpora with planted emphasis effects.
//!
//! Each word draws a per-phone log duration around `base_log_dur` and a
//! log-f0 spread around `base_f0_spread`; emphasized words add the configured
//! effects. Word pitch is a linear log-f0 ramp over the word's voiced frames,
//! so its 95-5 percentile spread is exactly the drawn value (a ramp of
//! amplitude `a` sampled evenly has a 95-5 spread of `0.9 a`).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Corpus, F0Frame, Utterance, Word};
use crate::{Error, Result};

/// f0 frame period of generated tracks, in seconds.
pub const FRAME_PERIOD: f64 = 0.01;

const LEADING_SILENCE: f64 = 0.1;
const TRAILING_SILENCE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_utterances: usize,
    /// Inclusive `[min, max]`.
    pub phones_per_word: [usize; 2],
    /// Inclusive `[min, max]`.
    pub words_per_utterance: [usize; 2],
    /// Per-phone log duration of a neutral word, log seconds.
    pub base_log_dur: f64,
    /// Log-f0 spread of a neutral word, nats.
    pub base_f0_spread: f64,
    pub emphasis_dur_effect: f64,
    pub emphasis_spread_effect: f64,
    pub emphasis_rate: f64,
    /// Standard deviation of the per-word jitter on both log duration and spread.
    pub noise_scale: f64,
    pub rng_seed: u64,
    pub n_speakers: usize,
    /// Speaker `s` adds `s * speaker_tempo_step` to every per-phone log duration.
    pub speaker_tempo_step: f64,
    pub base_f0_hz: f64,
    /// Speaker `s` multiplies pitch by `exp(s * speaker_pitch_step)`.
    pub speaker_pitch_step: f64,
    /// Log-f0 drop of each word centre relative to the previous word.
    pub declination: f64,
    /// Upper bound of the uniform inter-word silence, seconds.
    pub max_gap: f64,
    pub phone_inventory: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_utterances: 100,
            phones_per_word: [2, 5],
            words_per_utterance: [6, 10],
            base_log_dur: 0.08f64.ln(),
            base_f0_spread: 0.25,
            emphasis_dur_effect: 0.3,
            emphasis_spread_effect: 0.4,
            emphasis_rate: 0.23,
            noise_scale: 0.02,
            rng_seed: 0,
            n_speakers: 1,
            speaker_tempo_step: 0.0,
            base_f0_hz: 120.0,
            speaker_pitch_step: 0.4,
            declination: 0.06,
            max_gap: 0.05,
            phone_inventory: 40,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.n_utterances == 0 {
            return bad("n_utterances must be positive");
        }
        for (name, [lo, hi]) in [
            ("phones_per_word", self.phones_per_word),
            ("words_per_utterance", self.words_per_utterance),
        ] {
            if lo == 0 || lo > hi {
                return Err(Error::Config(format!("{name} range [{lo}, {hi}] is empty")));
            }
        }
        if !(0.0..=1.0).contains(&self.emphasis_rate) {
            return bad("emphasis_rate must lie in [0, 1]");
        }
        if !(self.noise_scale >= 0.0) {
            return bad("noise_scale must be >= 0");
        }
        if self.n_speakers == 0 || self.phone_inventory == 0 {
            return bad("n_speakers and phone_inventory must be positive");
        }
        if !(self.base_f0_hz > 0.0) || !(self.base_f0_spread >= 0.0) || !(self.max_gap >= 0.0) {
            return bad("base_f0_hz must be > 0; base_f0_spread and max_gap >= 0");
        }
        let reals = [
            self.base_log_dur,
            self.emphasis_dur_effect,
            self.emphasis_spread_effect,
            self.speaker_tempo_step,
            self.speaker_pitch_step,
            self.declination,
        ];
        if reals.iter().any(|x| !x.is_finite()) {
            return bad("non-finite parameter");
        }
        Ok(())
    }
}

const SYLLABLES: [&str; 20] = [
    "ka", "ti", "mo", "ne", "lu", "sa", "ri", "po", "da", "fe", "go", "hu", "ja", "be", "vi", "zo",
    "wa", "ye", "cu", "xo",
];

fn token_for(symbols: &[usize]) -> String {
    symbols
        .iter()
        .map(|&s| {
            let syl = SYLLABLES[s % SYLLABLES.len()];
            match s / SYLLABLES.len() {
                0 => syl.to_string(),
                k => format!("{syl}{k}"),
            }
        })
        .collect()
}

pub fn synth_corpus(cfg: &SynthConfig) -> Result<Corpus> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let utterances = (0..cfg.n_utterances)
        .map(|i| synth_utterance(cfg, i, &mut rng))
        .collect();
    Corpus::new(utterances)
}

fn synth_utterance(cfg: &SynthConfig, index: usize, rng: &mut ChaCha8Rng) -> Utterance {
    let speaker = rng.random_range(0..cfg.n_speakers);
    let n_words = rng.random_range(cfg.words_per_utterance[0]..=cfg.words_per_utterance[1]);

    let mut words = Vec::with_capacity(n_words);
    let mut spreads = Vec::with_capacity(n_words);
    let mut t = LEADING_SILENCE;
    for w in 0..n_words {
        let phones = rng.random_range(cfg.phones_per_word[0]..=cfg.phones_per_word[1]);
        let symbols: Vec<usize> = (0..phones)
            .map(|_| rng.random_range(0..cfg.phone_inventory))
            .collect();
        let emphasized = rng.random_bool(cfg.emphasis_rate);
        let dur_noise: f64 = rng.sample(StandardNormal);
        let spread_noise: f64 = rng.sample(StandardNormal);
        let gap = if cfg.max_gap > 0.0 {
            rng.random_range(0.0..cfg.max_gap)
        } else {
            0.0
        };
        let emph = if emphasized { 1.0 } else { 0.0 };

        let log_dur = cfg.base_log_dur
            + speaker as f64 * cfg.speaker_tempo_step
            + emph * cfg.emphasis_dur_effect
            + cfg.noise_scale * dur_noise;
        let spread = (cfg.base_f0_spread
            + emph * cfg.emphasis_spread_effect
            + cfg.noise_scale * spread_noise)
            .max(0.0);

        let start = t;
        let end = start + phones as f64 * log_dur.exp();
        words.push(Word {
            token: token_for(&symbols),
            phone_count: phones,
            phone_symbols: symbols,
            start_time: start,
            end_time: end,
            emphasized,
        });
        spreads.push(spread);
        t = end;
        if w + 1 < n_words {
            t += gap;
        }
    }

    let total = t + TRAILING_SILENCE;
    let times: Vec<f64> = (0..)
        .map(|k| k as f64 * FRAME_PERIOD)
        .take_while(|&x| x < total)
        .collect();
    let mut f0_track: Vec<F0Frame> = times
        .iter()
        .map(|&time| F0Frame {
            time,
            f0: 0.0,
            voiced: false,
        })
        .collect();

    let pitch = cfg.base_f0_hz.ln() + speaker as f64 * cfg.speaker_pitch_step;
    for (w, word) in words.iter().enumerate() {
        let frames: Vec<usize> = (0..times.len()).filter(|&k| word.contains(times[k])).collect();
        let centre = pitch - cfg.declination * w as f64;
        let amplitude = spreads[w] / 0.9;
        let n = frames.len();
        for (j, &k) in frames.iter().enumerate() {
            let pos = if n > 1 { j as f64 / (n - 1) as f64 } else { 0.5 };
            let pos = if w % 2 == 0 { pos } else { 1.0 - pos };
            f0_track[k].f0 = (centre + amplitude * (pos - 0.5)).exp();
            f0_track[k].voiced = true;
        }
    }

    Utterance {
        id: format!("syn{index:05}"),
        speaker,
        words,
        f0_track,
    }
}
