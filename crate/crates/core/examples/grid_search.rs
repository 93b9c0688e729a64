//! Held-out structure search over blocks and hidden units.

use prosoctl::corpus::{split_heldout, synth_corpus, SynthConfig};
use prosoctl::features::{compute_norm_stats, NormScale};
use prosoctl::predictor::{grid_search, PredictorConfig};

fn main() -> anyhow::Result<()> {
    let corpus = synth_corpus(&SynthConfig {
        n_utterances: 120,
        n_speakers: 2,
        speaker_tempo_step: 0.15,
        rng_seed: 5,
        ..SynthConfig::default()
    })?;
    let (tr, dev) = split_heldout(&corpus, 0.1, 0)?;
    let stats = compute_norm_stats(&tr, NormScale::Variance)?;

    let base = PredictorConfig {
        epochs: 8,
        ..PredictorConfig::preset("desk-hybrid")?
    };
    let grid: Vec<PredictorConfig> = [(1, 8), (2, 8), (1, 16), (2, 16)]
        .into_iter()
        .map(|(n_blocks, hidden_units)| PredictorConfig { n_blocks, hidden_units, ..base.clone() })
        .collect();
    let result = grid_search(&grid, &tr, &dev, &stats)?;
    for (i, r) in result.reports.iter().enumerate() {
        println!(
            "{} {} blocks x {:>2} units  {:>6} params  best dev {:.3} (epoch {:?})",
            if i == result.best_index { "*" } else { " " },
            r.config.n_blocks,
            r.config.hidden_units,
            r.model.num_params(),
            r.best_dev_loss.unwrap_or(f64::NAN),
            r.best_epoch
        );
    }
    Ok(())
}
