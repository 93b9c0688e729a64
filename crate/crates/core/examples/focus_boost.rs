//! Boost one word of an utterance and read back realized durations and
//! pitch spreads.
//!
//! cargo run --release --example focus_boost -- [svg path]

use prosoctl::control::{apply_boost, focus_pipeline, rectify, BoostSpec};
use prosoctl::corpus::{split_heldout, synth_corpus, SynthConfig};
use prosoctl::features::{compute_norm_stats, NormScale};
use prosoctl::plot::{render_svg, Trajectory};
use prosoctl::predictor::{train, PredictorConfig};

fn main() -> anyhow::Result<()> {
    let corpus = synth_corpus(&SynthConfig {
        n_utterances: 150,
        rng_seed: 12,
        ..SynthConfig::default()
    })?;
    let (tr, dev) = split_heldout(&corpus, 0.1, 0)?;
    let stats = compute_norm_stats(&tr, NormScale::Variance)?;
    let cfg = PredictorConfig { epochs: 10, ..PredictorConfig::preset("desk-unsup")? };
    let model = train(&cfg, &tr, &dev, &stats)?.model;

    let u = &dev.utterances[0];
    let focal = 2;
    let plain = focus_pipeline(&model, u, &BoostSpec::default(), &stats)?;
    for preset in ["pc-unsup", "hybrid", "baseline-sent"] {
        let spec = BoostSpec::preset(preset)?.with_focus([focal]);
        let boosted = focus_pipeline(&model, u, &spec, &stats)?;
        let first_phone = u.word_phone_ranges()[focal].start;
        println!(
            "{preset:<14} word {focal} ({}): duration {:.1} -> {:.1} ms/phone, spread {:.3} -> {:.3} nats, sentence spread {:.3} -> {:.3}",
            u.words[focal].token,
            1e3 * plain.per_phone_duration[first_phone],
            1e3 * boosted.per_phone_duration[first_phone],
            plain.word_f0_spread[focal],
            boosted.word_f0_spread[focal],
            plain.sentence_f0_spread,
            boosted.sentence_f0_spread
        );
    }

    println!("\ngamma sweep on word {focal}:");
    for i in 0..5 {
        let gamma = 0.25 * i as f64;
        let spec = BoostSpec { gamma, ..BoostSpec::default() }.with_focus([focal]);
        let r = focus_pipeline(&model, u, &spec, &stats)?;
        println!("  gamma {gamma:.2}: {:.1} ms/phone", 1e3 * r.per_phone_duration[u.word_phone_ranges()[focal].start]);
    }

    if let Some(path) = std::env::args().nth(1) {
        let rect = rectify(&model.predict(u)?, u)?;
        let boosted = apply_boost(&rect, &BoostSpec::preset("pc-unsup")?.with_focus([focal]), u)?;
        let traj = |m: &prosoctl::nnet::Matrix| Trajectory {
            utt_id: u.id.clone(),
            word_index: u.phone_word_index(),
            values: (0..m.rows()).map(|r| [m.get(r, 0), m.get(r, 1), m.get(r, 2), m.get(r, 3)]).collect(),
        };
        std::fs::write(&path, render_svg(&[("predicted".into(), traj(&rect)), ("boosted".into(), traj(&boosted))])?)?;
        println!("\nwrote {path}");
    }
    Ok(())
}
