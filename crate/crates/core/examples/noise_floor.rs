//! How low can the held-out loss go? Scores the noise-free generator values
//! (same seed, zero jitter) against the noisy targets, next to a constant
//! all-zero prediction.

use prosoctl::corpus::{synth_corpus, SynthConfig};
use prosoctl::features::{compute_norm_stats, extract_pc_targets, NormScale};
use prosoctl::nnet::Matrix;
use prosoctl::predictor::{weighted_l1_loss, DEFAULT_TARGET_WEIGHTS};

fn main() -> anyhow::Result<()> {
    for noise in [0.0, 0.01, 0.02, 0.05] {
        let cfg = SynthConfig {
            n_utterances: 500,
            noise_scale: noise,
            rng_seed: 1,
            ..SynthConfig::default()
        };
        let noisy = synth_corpus(&cfg)?;
        let clean = synth_corpus(&SynthConfig { noise_scale: 0.0, ..cfg })?;
        let stats = compute_norm_stats(&noisy, NormScale::Variance)?;
        let (mut oracle, mut constant) = (0.0, 0.0);
        for (u, c) in noisy.utterances.iter().zip(&clean.utterances) {
            let target = extract_pc_targets(u, &stats)?;
            let ideal = extract_pc_targets(c, &stats)?.targets;
            oracle += weighted_l1_loss(&ideal, &target, &DEFAULT_TARGET_WEIGHTS)?;
            constant += weighted_l1_loss(&Matrix::zeros(target.len(), 4), &target, &DEFAULT_TARGET_WEIGHTS)?;
        }
        println!(
            "noise {noise:<5} generator loss {:>7.3}  constant loss {:>7.3}  ratio {:.3}",
            oracle / noisy.len() as f64,
            constant / noisy.len() as f64,
            oracle / constant
        );
    }
    Ok(())
}
