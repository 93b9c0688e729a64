//! Train the small emphasis-aware preset on a synthetic corpus and measure
//! how much of the planted emphasis effect it recovers.
//!
//! cargo run --release --example train_predictor -- [noise] [epochs]

use prosoctl::control::rectify;
use prosoctl::corpus::{split_heldout, synth_corpus, SynthConfig};
use prosoctl::features::{compute_norm_stats, NormScale};
use prosoctl::predictor::{train, PredictorConfig};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let noise: f64 = args.next().map_or(Ok(0.02), |s| s.parse())?;
    let epochs: usize = args.next().map_or(Ok(50), |s| s.parse())?;

    let corpus = synth_corpus(&SynthConfig {
        n_utterances: 500,
        noise_scale: noise,
        rng_seed: 1,
        ..SynthConfig::default()
    })?;
    let (tr, dev) = split_heldout(&corpus, 0.1, 0)?;
    let stats = compute_norm_stats(&tr, NormScale::Variance)?;
    let cfg = PredictorConfig {
        epochs,
        ..PredictorConfig::preset("desk-hybrid")?
    };
    let report = train(&cfg, &tr, &dev, &stats)?;
    let first = report.epochs[0].dev_loss;
    for e in &report.epochs {
        println!("epoch {:>3}  train {:>8.3}  dev {:>8.3}  ({:.3} of epoch 1)", e.epoch, e.train_loss, e.dev_loss, e.dev_loss / first);
    }

    for (k, effect) in [(2, 0.3), (3, 0.4)] {
        let (mut emph, mut neutral) = (Vec::new(), Vec::new());
        for u in &dev.utterances {
            let pc = rectify(&report.model.predict(u)?, u)?;
            for (w, range) in u.word_phone_ranges().into_iter().enumerate() {
                let v = pc.get(range.start, k);
                if u.words[w].emphasized { emph.push(v) } else { neutral.push(v) }
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let gap = mean(&emph) - mean(&neutral);
        let planted = stats.normalize_value(k, effect);
        println!("column {}: predicted gap {gap:.3}, planted {planted:.3} ({:+.1}%)", k + 1, 100.0 * (gap - planted) / planted);
    }
    println!("best epoch {:?}, {:.1}s", report.best_epoch, report.wall_clock_secs);
    Ok(())
}
