//! Raw against rectified predictions for one utterance, as SVG plus the CSV
//! of the plotted points.
//!
//! cargo run --release --example plot_trajectories -- traj.svg

use prosoctl::control::rectify;
use prosoctl::corpus::{split_heldout, synth_corpus, SynthConfig};
use prosoctl::features::{compute_norm_stats, extract_pc_targets, NormScale};
use prosoctl::nnet::Matrix;
use prosoctl::plot::{render_svg, series_csv, Trajectory};
use prosoctl::predictor::{train, PredictorConfig};

fn main() -> anyhow::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "trajectories.svg".into());
    let corpus = synth_corpus(&SynthConfig { n_utterances: 120, rng_seed: 8, ..SynthConfig::default() })?;
    let (tr, dev) = split_heldout(&corpus, 0.1, 0)?;
    let stats = compute_norm_stats(&tr, NormScale::Variance)?;
    let model = train(&PredictorConfig { epochs: 10, ..PredictorConfig::preset("desk-hybrid")? }, &tr, &dev, &stats)?.model;

    let u = &dev.utterances[0];
    let as_traj = |m: &Matrix| Trajectory {
        utt_id: u.id.clone(),
        word_index: u.phone_word_index(),
        values: (0..m.rows()).map(|r| [m.get(r, 0), m.get(r, 1), m.get(r, 2), m.get(r, 3)]).collect(),
    };
    let raw = model.predict(u)?;
    let series = vec![
        ("target".to_string(), as_traj(&extract_pc_targets(u, &stats)?.targets)),
        ("raw".to_string(), as_traj(&raw)),
        ("rectified".to_string(), as_traj(&rectify(&raw, u)?)),
    ];
    std::fs::write(&path, render_svg(&series)?)?;
    let csv_path = std::path::Path::new(&path).with_extension("csv");
    std::fs::write(&csv_path, series_csv(&series))?;
    println!("wrote {path} and {}", csv_path.display());
    Ok(())
}
