//! Sentence and word statistics of one utterance, their normalized
//! controls, and the replication weights used in training.

use prosoctl::corpus::{synth_corpus, SynthConfig};
use prosoctl::features::{compute_norm_stats, extract_pc_targets, NormScale, RawPC};

fn main() -> anyhow::Result<()> {
    let corpus = synth_corpus(&SynthConfig {
        n_utterances: 100,
        rng_seed: 3,
        ..SynthConfig::default()
    })?;
    let stats = compute_norm_stats(&corpus, NormScale::Variance)?;
    println!("corpus variance {:?}", stats.variance);
    println!("corpus mean     {:?}\n", stats.mean);

    let u = &corpus.utterances[0];
    let raw = RawPC::extract(u)?;
    println!("{}: S_dur {:.4} (per-phone {:.1} ms), S_f0 {:.4} nats", u.id, raw.s_dur, 1e3 * raw.s_dur.exp(), raw.s_f0);
    println!("{:<10} {:>8} {:>8} {:>8}", "word", "W_dur", "W_f0", "emph");
    for (w, word) in u.words.iter().enumerate() {
        println!("{:<10} {:>8.4} {:>8.4} {:>8}", word.token, raw.w_dur[w], raw.w_f0[w], word.emphasized);
    }

    let t = extract_pc_targets(u, &stats)?;
    println!("\nphone  word      pc1      pc2      pc3      pc4 |   w1     w3");
    for p in 0..t.len() {
        let r = t.targets.row(p);
        println!(
            "{p:>5} {:>5} {:>8.3} {:>8.3} {:>8.3} {:>8.3} | {:.3} {:.3}",
            t.word_index[p],
            r[0],
            r[1],
            r[2],
            r[3],
            t.weights.get(p, 0),
            t.weights.get(p, 2)
        );
    }
    Ok(())
}
