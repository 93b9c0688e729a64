//! Weighted-L1 training with ADAM and the held-out structure search.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::loss::{weighted_l1_grad, weighted_l1_loss};
use super::model::{derive_seed, DropoutCtx, PredictorModel, PredictorParams, UtteranceInput};
use super::PredictorConfig;
use crate::corpus::Corpus;
use crate::features::{extract_pc_targets, NormStats, PhoneTargets};
use crate::nnet::{adam_update, AdamConfig, AdamState, Parameterized};
use crate::{Error, Result};

/// Model input and targets of one utterance.
#[derive(Debug, Clone)]
pub struct Example {
    pub id: String,
    pub input: UtteranceInput,
    pub targets: PhoneTargets,
}

pub fn prepare_examples(model: &PredictorModel, c: &Corpus, stats: &NormStats) -> Result<Vec<Example>> {
    c.utterances
        .iter()
        .map(|u| {
            Ok(Example {
                id: u.id.clone(),
                input: model.prepare(u)?,
                targets: extract_pc_targets(u, stats)?,
            })
        })
        .collect()
}

/// Loss of one utterance and its gradient w.r.t. every parameter.
pub fn loss_and_grad(
    model: &PredictorModel,
    ex: &Example,
    dropout: Option<DropoutCtx>,
) -> Result<(f64, PredictorParams)> {
    let alpha = &model.config.target_weights;
    let (pred, cache) = model.forward(&ex.input, dropout)?;
    let loss = weighted_l1_loss(&pred, &ex.targets, alpha)?;
    let d_out = weighted_l1_grad(&pred, &ex.targets, alpha)?;
    Ok((loss, model.backward(&ex.input, &cache, &d_out)))
}

/// Inference-mode loss of one utterance.
pub fn example_loss(model: &PredictorModel, ex: &Example) -> Result<f64> {
    let (pred, _) = model.forward(&ex.input, None)?;
    weighted_l1_loss(&pred, &ex.targets, &model.config.target_weights)
}

/// Mean per-utterance loss with dropout off.
pub fn mean_loss(model: &PredictorModel, examples: &[Example]) -> Result<f64> {
    let losses: Vec<f64> = examples
        .par_iter()
        .map(|ex| example_loss(model, ex))
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len().max(1) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochLoss {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub config: PredictorConfig,
    pub epochs: Vec<EpochLoss>,
    /// Epoch of the returned model; `None` when no epoch ran.
    pub best_epoch: Option<usize>,
    pub best_dev_loss: Option<f64>,
    pub model: PredictorModel,
    pub wall_clock_secs: f64,
}

/// The serializable part of a [`TrainReport`]: everything except the model
/// and the wall-clock time, so reruns produce identical bytes.
#[derive(Debug, Clone, Serialize)]
pub struct TrainSummary<'a> {
    pub config: &'a PredictorConfig,
    pub num_params: usize,
    pub best_epoch: Option<usize>,
    pub best_dev_loss: Option<f64>,
    pub epochs: &'a [EpochLoss],
}

impl TrainReport {
    pub fn summary(&self) -> TrainSummary<'_> {
        TrainSummary {
            config: &self.config,
            num_params: self.model.num_params(),
            best_epoch: self.best_epoch,
            best_dev_loss: self.best_dev_loss,
            epochs: &self.epochs,
        }
    }

    /// `epoch,train_loss,dev_loss` rows.
    pub fn loss_curve_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,dev_loss\n");
        for e in &self.epochs {
            out.push_str(&format!("{},{},{}\n", e.epoch, e.train_loss, e.dev_loss));
        }
        out
    }
}

fn vocab_and_speakers(corpora: &[&Corpus]) -> (usize, usize) {
    let vocab = corpora.iter().map(|c| c.phone_vocab_size()).max().unwrap_or(0);
    let speakers = corpora
        .iter()
        .filter_map(|c| c.speakers.iter().next_back())
        .max()
        .map_or(0, |s| s + 1);
    (vocab, speakers)
}

/// Trains from a fresh initialization and returns the best-dev-loss model.
pub fn train(cfg: &PredictorConfig, train: &Corpus, dev: &Corpus, stats: &NormStats) -> Result<TrainReport> {
    cfg.validate()?;
    if train.is_empty() || dev.is_empty() {
        return Err(Error::CorpusTooSmall("training and dev corpora must be non-empty".into()));
    }
    let (vocab, speakers) = vocab_and_speakers(&[train, dev]);
    let model = PredictorModel::init(cfg, vocab, speakers)?;
    train_model(model, train, dev, stats)
}

/// Continues training an existing model with its own config.
pub fn train_model(
    mut model: PredictorModel,
    train: &Corpus,
    dev: &Corpus,
    stats: &NormStats,
) -> Result<TrainReport> {
    let started = Instant::now();
    let cfg = model.config.clone();
    let train_ex = prepare_examples(&model, train, stats)?;
    let dev_ex = prepare_examples(&model, dev, stats)?;
    let mut adam = AdamState::new(
        AdamConfig {
            learning_rate: cfg.learning_rate,
            ..AdamConfig::default()
        },
        &model.params,
    );
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.rng_seed, &[u64::MAX]));
    let mut order: Vec<usize> = (0..train_ex.len()).collect();
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, PredictorParams)> = None;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut train_total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let results: Vec<(f64, PredictorParams)> = batch
                .par_iter()
                .map(|&i| {
                    let dropout = (cfg.dropout_rate > 0.0).then(|| DropoutCtx {
                        rate: cfg.dropout_rate,
                        seed: derive_seed(cfg.rng_seed, &[epoch as u64, i as u64]),
                    });
                    loss_and_grad(&model, &train_ex[i], dropout)
                })
                .collect::<Result<_>>()?;
            let mut grads = model.zero_grads();
            for ((loss, g), &i) in results.iter().zip(batch) {
                if !loss.is_finite() {
                    return Err(Error::Diverged {
                        epoch,
                        detail: format!("non-finite loss on {}", train_ex[i].id),
                    });
                }
                train_total += loss;
                grads.add_assign(g);
            }
            grads.scale(1.0 / batch.len() as f64);
            adam_update(&mut adam, &mut model.params, &grads)?;
        }
        let dev_loss = mean_loss(&model, &dev_ex)?;
        if !dev_loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                detail: "non-finite dev loss".into(),
            });
        }
        epochs.push(EpochLoss {
            epoch,
            train_loss: train_total / train_ex.len() as f64,
            dev_loss,
        });
        if best.as_ref().is_none_or(|(_, l, _)| dev_loss < *l) {
            best = Some((epoch, dev_loss, model.params.clone()));
        }
    }

    let (best_epoch, best_dev_loss) = match best {
        Some((e, l, params)) => {
            model.params = params;
            (Some(e), Some(l))
        }
        None => (None, None),
    };
    Ok(TrainReport {
        config: cfg,
        epochs,
        best_epoch,
        best_dev_loss,
        model,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone)]
pub struct GridResult {
    pub best_index: usize,
    pub best: PredictorConfig,
    pub reports: Vec<TrainReport>,
}

/// Trains every configuration and keeps the lowest best-dev loss; ties go to
/// the smaller model, then to the earlier grid entry.
pub fn grid_search(
    grid: &[PredictorConfig],
    train_set: &Corpus,
    dev: &Corpus,
    stats: &NormStats,
) -> Result<GridResult> {
    if grid.is_empty() {
        return Err(Error::Config("empty hyper-parameter grid".into()));
    }
    let reports: Vec<TrainReport> = grid
        .par_iter()
        .map(|cfg| train(cfg, train_set, dev, stats))
        .collect::<Result<_>>()?;
    let score = |r: &TrainReport| r.best_dev_loss.unwrap_or(f64::INFINITY);
    let best_index = (0..reports.len())
        .min_by(|&a, &b| {
            score(&reports[a])
                .total_cmp(&score(&reports[b]))
                .then(reports[a].model.num_params().cmp(&reports[b].model.num_params()))
                .then(a.cmp(&b))
        })
        .expect("non-empty grid");
    Ok(GridResult {
        best_index,
        best: grid[best_index].clone(),
        reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{split_heldout, synth_corpus, SynthConfig};
    use crate::features::{compute_norm_stats, NormScale};
    use crate::nnet::finite_diff_check;
    use crate::predictor::EmphasisFeature;

    fn tiny_setup(n: usize) -> (Corpus, Corpus, NormStats) {
        let c = synth_corpus(&SynthConfig {
            n_utterances: n,
            words_per_utterance: [2, 4],
            phones_per_word: [1, 3],
            n_speakers: 2,
            speaker_tempo_step: 0.2,
            phone_inventory: 6,
            rng_seed: 21,
            ..SynthConfig::default()
        })
        .unwrap();
        let stats = compute_norm_stats(&c, NormScale::Variance).unwrap();
        let (tr, dv) = split_heldout(&c, 0.25, 1).unwrap();
        (tr, dv, stats)
    }

    fn small_cfg() -> PredictorConfig {
        PredictorConfig {
            n_blocks: 2,
            hidden_units: 4,
            speaker_emb_dim: 2,
            phone_emb_dim: 3,
            emphasis_feature: EmphasisFeature::On(2),
            dropout_rate: 0.0,
            learning_rate: 5e-3,
            epochs: 3,
            batch_size: 2,
            rng_seed: 4,
            ..PredictorConfig::default()
        }
    }

    #[test]
    fn full_model_gradient_matches_finite_differences() {
        let (tr, _, stats) = tiny_setup(3);
        let model = PredictorModel::init(&small_cfg(), 6, 2).unwrap();
        let examples = prepare_examples(&model, &tr, &stats).unwrap();
        let ex = &examples[0];
        let (_, g) = loss_and_grad(&model, ex, None).unwrap();
        let report = finite_diff_check(
            |flat| {
                let mut m = model.clone();
                m.params.assign_flat(flat);
                example_loss(&m, ex).unwrap()
            },
            &model.params.flatten(),
            &g.flatten(),
            1e-5,
        );
        assert!(report.max_rel_error < 1e-4, "{report:?}");
        assert!(report.checked > 100);
    }

    #[test]
    fn gradient_with_fixed_dropout_mask() {
        let (tr, _, stats) = tiny_setup(3);
        let cfg = PredictorConfig { dropout_rate: 0.3, ..small_cfg() };
        let model = PredictorModel::init(&cfg, 6, 2).unwrap();
        let ex = &prepare_examples(&model, &tr, &stats).unwrap()[0];
        let ctx = Some(DropoutCtx { rate: 0.3, seed: 99 });
        let (_, g) = loss_and_grad(&model, ex, ctx).unwrap();
        let report = finite_diff_check(
            |flat| {
                let mut m = model.clone();
                m.params.assign_flat(flat);
                loss_and_grad(&m, ex, ctx).unwrap().0
            },
            &model.params.flatten(),
            &g.flatten(),
            1e-5,
        );
        assert!(report.max_rel_error < 1e-4, "{report:?}");
    }

    #[test]
    fn zero_epochs_returns_initial_model() {
        let (tr, dv, stats) = tiny_setup(8);
        let cfg = PredictorConfig { epochs: 0, ..small_cfg() };
        let report = train(&cfg, &tr, &dv, &stats).unwrap();
        assert!(report.epochs.is_empty());
        assert_eq!(report.best_epoch, None);
        let fresh = PredictorModel::init(&cfg, report.model.phone_vocab, report.model.n_speakers).unwrap();
        assert_eq!(report.model, fresh);
    }

    #[test]
    fn training_is_deterministic_and_reports_every_epoch() {
        let (tr, dv, stats) = tiny_setup(12);
        let cfg = PredictorConfig { dropout_rate: 0.1, ..small_cfg() };
        let a = train(&cfg, &tr, &dv, &stats).unwrap();
        let b = train(&cfg, &tr, &dv, &stats).unwrap();
        assert_eq!(a.epochs, b.epochs);
        assert_eq!(a.model, b.model);
        assert_eq!(a.epochs.len(), 3);
        let best = a.epochs.iter().map(|e| e.dev_loss).fold(f64::INFINITY, f64::min);
        assert_eq!(a.best_dev_loss, Some(best));
        assert!((mean_loss(&a.model, &prepare_examples(&a.model, &dv, &stats).unwrap()).unwrap() - best).abs() < 1e-12);
    }

    #[test]
    fn singleton_grid_and_tie_breaking() {
        let (tr, dv, stats) = tiny_setup(8);
        let cfg = PredictorConfig { epochs: 1, ..small_cfg() };
        let r = grid_search(std::slice::from_ref(&cfg), &tr, &dv, &stats).unwrap();
        assert_eq!(r.best_index, 0);
        assert_eq!(r.best, cfg);
        // identical configs tie exactly; the first one wins
        let r = grid_search(&[cfg.clone(), cfg.clone()], &tr, &dv, &stats).unwrap();
        assert_eq!(r.best_index, 0);
        assert!(grid_search(&[], &tr, &dv, &stats).is_err());
    }

    #[test]
    fn speakers_with_different_tempo_predict_differently() {
        let (tr, dv, stats) = tiny_setup(16);
        let cfg = PredictorConfig { epochs: 4, ..small_cfg() };
        let model = train(&cfg, &tr, &dv, &stats).unwrap().model;
        let mut u = tr.utterances[0].clone();
        u.speaker = 0;
        let a = model.predict(&u).unwrap();
        u.speaker = 1;
        let b = model.predict(&u).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn summary_serializes_without_wall_clock() {
        let (tr, dv, stats) = tiny_setup(6);
        let r = train(&PredictorConfig { epochs: 2, ..small_cfg() }, &tr, &dv, &stats).unwrap();
        let json = serde_json::to_string(&r.summary()).unwrap();
        assert!(!json.contains("wall"));
        assert_eq!(r.loss_curve_csv().lines().count(), 3);
    }
}
