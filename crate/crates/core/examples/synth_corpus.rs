//! Generate a small synthetic corpus and look at what was planted.
//!
//! cargo run --example synth_corpus -- out.jsonl

use prosoctl::corpus::{save_corpus, synth_corpus, SynthConfig};
use prosoctl::features::word_stats;

fn main() -> anyhow::Result<()> {
    let out = std::env::args().nth(1);
    let cfg = SynthConfig {
        n_utterances: 200,
        n_speakers: 2,
        speaker_tempo_step: 0.15,
        rng_seed: 42,
        ..SynthConfig::default()
    };
    let corpus = synth_corpus(&cfg)?;

    let (mut emph, mut neutral) = (Vec::new(), Vec::new());
    for u in &corpus.utterances {
        let (w_dur, _) = word_stats(u)?;
        for (w, d) in u.words.iter().zip(w_dur) {
            if w.emphasized { emph.push(d) } else { neutral.push(d) }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    println!("{} utterances, {} words, speakers {:?}", corpus.len(), corpus.word_count(), corpus.speakers);
    println!(
        "emphasized words: {:.1}%",
        100.0 * emph.len() as f64 / (emph.len() + neutral.len()) as f64
    );
    println!(
        "log per-phone duration: emphasized {:.3}, neutral {:.3} (planted gap {})",
        mean(&emph),
        mean(&neutral),
        cfg.emphasis_dur_effect
    );

    let u = &corpus.utterances[0];
    println!("\nfirst utterance ({}, speaker {}):", u.id, u.speaker);
    for w in &u.words {
        println!(
            "  {:<10} {} phones  {:.3}-{:.3}s{}",
            w.token,
            w.phone_count,
            w.start_time,
            w.end_time,
            if w.emphasized { "  *" } else { "" }
        );
    }

    if let Some(path) = out {
        save_corpus(&corpus, &path)?;
        println!("\nwrote {path}");
    }
    Ok(())
}
