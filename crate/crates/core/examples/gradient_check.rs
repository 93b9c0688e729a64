//! Central-difference check of the full predictor gradient.

use prosoctl::corpus::{synth_corpus, Corpus, SynthConfig};
use prosoctl::features::{compute_norm_stats, NormScale};
use prosoctl::nnet::{finite_diff_check, Parameterized};
use prosoctl::predictor::{example_loss, loss_and_grad, prepare_examples, EmphasisFeature, PredictorConfig, PredictorModel};

fn main() -> anyhow::Result<()> {
    let reference = synth_corpus(&SynthConfig {
        n_utterances: 100,
        words_per_utterance: [2, 4],
        phones_per_word: [1, 3],
        phone_inventory: 10,
        ..SynthConfig::default()
    })?;
    let stats = compute_norm_stats(&reference, NormScale::Variance)?;
    let batch = Corpus::new(reference.utterances[..3].to_vec())?;

    for hidden in [2, 4, 8] {
        let cfg = PredictorConfig {
            hidden_units: hidden,
            speaker_emb_dim: 2,
            phone_emb_dim: 4,
            emphasis_feature: EmphasisFeature::On(2),
            ..PredictorConfig::default()
        };
        let model = PredictorModel::init(&cfg, 10, 1)?;
        let examples = prepare_examples(&model, &batch, &stats)?;
        let mut grads = model.zero_grads();
        for ex in &examples {
            grads.add_assign(&loss_and_grad(&model, ex, None)?.1);
        }
        let report = finite_diff_check(
            |flat| {
                let mut m = model.clone();
                m.params.assign_flat(flat);
                examples.iter().map(|ex| example_loss(&m, ex).unwrap()).sum()
            },
            &model.params.flatten(),
            &grads.flatten(),
            1e-5,
        );
        println!(
            "hidden {hidden}: {} params, max rel err {:.2e}, max abs err {:.2e}",
            model.num_params(),
            report.max_rel_error,
            report.max_abs_error
        );
    }
    Ok(())
}
