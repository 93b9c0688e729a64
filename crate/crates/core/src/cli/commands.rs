use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use super::manifest::{default_manifest_path, sibling, RunManifest};
use super::{
    BoostArgs, CliError, CliResult, DataArgs, ExtractArgs, GridSearchArgs, LossEvalArgs, ModelArgs, PlotArgs,
    PredictArgs, ScaleArg, SynthArgs, TrainArgs, ValidateArgs,
};
use crate::control::{apply_boost, realize, rectify, words_matching, BoostSpec};
use crate::corpus::{load_corpus, save_corpus, split_heldout, synth_corpus, validate_utterance, Corpus, SynthConfig, Utterance};
use crate::features::{compute_norm_stats, extract_pc_targets, NormScale, NormStats, N_PC};
use crate::nnet::Matrix;
use crate::plot::{parse_trajectories, render_svg, series_csv, Trajectory};
use crate::predictor::{self, default_grid, EmphasisFeature, PredictorConfig, PredictorModel};
use crate::s2s_loss::{multitask_loss, LossInputs};
use crate::{Error, Result};

fn finish(manifest: RunManifest, started: Instant, explicit: Option<&Path>, primary: Option<&Path>) -> CliResult<()> {
    let path = match (explicit, primary) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(p)) => default_manifest_path(p),
        (None, None) => return Ok(()),
    };
    let manifest = RunManifest {
        wall_clock_secs: started.elapsed().as_secs_f64(),
        ..manifest
    };
    manifest.write(&path)?;
    Ok(())
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

fn scale(arg: ScaleArg) -> NormScale {
    match arg {
        ScaleArg::Variance => NormScale::Variance,
        ScaleArg::Stddev => NormScale::StdDev,
    }
}

fn select<'a>(c: &'a Corpus, utt: Option<&str>) -> CliResult<Vec<&'a Utterance>> {
    match utt {
        None => Ok(c.utterances.iter().collect()),
        Some(id) => c
            .get(id)
            .map(|u| vec![u])
            .ok_or_else(|| CliError::Usage(format!("no utterance {id:?} in corpus"))),
    }
}

pub(super) fn synth(a: SynthArgs, manifest: Option<&Path>) -> CliResult<()> {
    let started = Instant::now();
    let mut cfg: SynthConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => SynthConfig::default(),
    };
    cfg.n_utterances = a.n;
    cfg.rng_seed = a.seed;
    if let Some(v) = a.emphasis_rate {
        cfg.emphasis_rate = v;
    }
    if let Some(v) = a.noise {
        cfg.noise_scale = v;
    }
    if let Some(v) = a.dur_effect {
        cfg.emphasis_dur_effect = v;
    }
    if let Some(v) = a.spread_effect {
        cfg.emphasis_spread_effect = v;
    }
    if let Some(v) = a.speakers {
        cfg.n_speakers = v;
    }
    if let Some(v) = a.tempo_step {
        cfg.speaker_tempo_step = v;
    }
    let corpus = synth_corpus(&cfg)?;
    save_corpus(&corpus, &a.out)?;
    let emphasized = corpus.utterances.iter().flat_map(|u| &u.words).filter(|w| w.emphasized).count();
    println!(
        "{} utterances, {} words ({} emphasized) -> {}",
        corpus.len(),
        corpus.word_count(),
        emphasized,
        a.out.display()
    );
    let mut m = RunManifest::new("synth").config(&cfg)?.seed("rng_seed", cfg.rng_seed).output("corpus", &a.out);
    if let Some(p) = &a.config {
        m = m.input("config", p);
    }
    finish(m, started, manifest, Some(&a.out))
}

pub(super) fn validate(a: ValidateArgs, manifest: Option<&Path>) -> CliResult<()> {
    let started = Instant::now();
    let text = fs::read_to_string(&a.corpus).map_err(Error::from)?;
    let mut problems = Vec::new();
    let mut ids = BTreeSet::new();
    let mut n = 0;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        n += 1;
        match serde_json::from_str::<Utterance>(line) {
            Err(e) => problems.push(format!("line {}: {e}", i + 1)),
            Ok(u) => {
                for v in validate_utterance(&u) {
                    problems.push(format!("line {} ({}): {v}", i + 1, u.id));
                }
                if !ids.insert(u.id.clone()) {
                    problems.push(format!("line {} ({}): duplicate utterance id", i + 1, u.id));
                }
            }
        }
    }
    for p in &problems {
        println!("{p}");
    }
    let m = RunManifest::new("validate").input("corpus", &a.corpus);
    finish(m, started, manifest, None)?;
    if problems.is_empty() {
        println!("ok: {n} utterances");
        Ok(())
    } else {
        Err(Error::Validation {
            utt: a.corpus.display().to_string(),
            violations: format!("{} problem(s)", problems.len()),
        }
        .into())
    }
}

const TARGET_HEADER: [&str; 11] = [
    "utt_id", "phone_index", "word_index", "pc1", "pc2", "pc3", "pc4", "w1", "w2", "w3", "w4",
];

pub(super) fn extract(a: ExtractArgs, manifest: Option<&Path>) -> CliResult<()> {
    let started = Instant::now();
    let corpus = load_corpus(&a.corpus)?;
    let stats = match &a.stats {
        Some(p) => NormStats::load(p)?,
        None => compute_norm_stats(&corpus, scale(a.scale))?,
    };
    let mut rows = Vec::new();
    for u in &corpus.utterances {
        let t = extract_pc_targets(u, &stats)?;
        for (p, &w) in t.word_index.iter().enumerate() {
            let mut row = vec![u.id.clone(), p.to_string(), w.to_string()];
            row.extend(t.targets.row(p).iter().map(f64::to_string));
            row.extend(t.weights.row(p).iter().map(f64::to_string));
            rows.push(row);
        }
    }
    stats.save(&a.stats_out)?;
    write_csv(&a.targets_out, &TARGET_HEADER, rows)?;
    println!("variance {:?}", stats.variance);
    let mut m = RunManifest::new("extract")
        .config(serde_json::json!({ "scale": stats.scale }))?
        .input("corpus", &a.corpus)
        .output("stats", &a.stats_out)
        .output("targets", &a.targets_out);
    if let Some(p) = &a.stats {
        m = m.input("stats", p);
    }
    finish(m, started, manifest, Some(&a.targets_out))
}

fn model_config(a: &ModelArgs) -> Result<PredictorConfig> {
    let mut cfg = match &a.config {
        Some(p) => read_json(p)?,
        None => PredictorConfig::preset(&a.preset)?,
    };
    if let Some(v) = a.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = a.seed {
        cfg.rng_seed = v;
    }
    if let Some(v) = a.learning_rate {
        cfg.learning_rate = v;
    }
    if let Some(v) = a.blocks {
        cfg.n_blocks = v;
    }
    if let Some(v) = a.hidden {
        cfg.hidden_units = v;
    }
    if let Some(v) = a.dropout {
        cfg.dropout_rate = v;
    }
    if let Some(v) = a.batch_size {
        cfg.batch_size = v;
    }
    match a.emphasis_dim {
        Some(0) => cfg.emphasis_feature = EmphasisFeature::Off,
        Some(d) => cfg.emphasis_feature = EmphasisFeature::On(d),
        None => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

struct Data {
    train: Corpus,
    dev: Corpus,
    stats: NormStats,
}

/// Loads or splits the corpora and loads or computes statistics; computed
/// statistics are saved next to `out`.
fn load_data(a: &DataArgs, out: &Path, m: RunManifest) -> Result<(Data, RunManifest)> {
    let full = load_corpus(&a.train)?;
    let mut m = m.input("train", &a.train);
    let (train, dev) = match &a.dev {
        Some(p) => {
            m = m.input("dev", p);
            (full, load_corpus(p)?)
        }
        None => {
            m = m.seed("split_seed", a.split_seed);
            split_heldout(&full, a.heldout, a.split_seed)?
        }
    };
    let stats = match &a.stats {
        Some(p) => {
            m = m.input("stats", p);
            NormStats::load(p)?
        }
        None => {
            let stats = compute_norm_stats(&train, scale(a.scale))?;
            let path = sibling(out, "stats.json");
            stats.save(&path)?;
            m = m.output("stats", &path);
            stats
        }
    };
    Ok((Data { train, dev, stats }, m))
}

pub(super) fn train(a: TrainArgs, manifest: Option<&Path>) -> CliResult<()> {
    let started = Instant::now();
    let cfg = model_config(&a.model)?;
    let m = RunManifest::new("train").config(&cfg)?.seed("rng_seed", cfg.rng_seed);
    let (data, m) = load_data(&a.data, &a.out, m)?;
    let report = predictor::train(&cfg, &data.train, &data.dev, &data.stats)?;
    let report_path = sibling(&a.out, "report.json");
    let curve_path = sibling(&a.out, "curve.csv");
    report.model.save(&a.out)?;
    write_json(&report_path, &report.summary())?;
    fs::write(&curve_path, report.loss_curve_csv()).map_err(Error::from)?;
    match (report.best_epoch, report.best_dev_loss) {
        (Some(e), Some(l)) => println!("best dev loss {l:.6} at epoch {e} of {}", report.epochs.len()),
        _ => println!("no epochs run; wrote the initial model"),
    }
    let m = m.output("model", &a.out).output("report", &report_path).output("curve", &curve_path);
    finish(m, started, manifest, Some(&a.out))
}

#[derive(Serialize)]
struct GridReport<'a> {
    best_index: usize,
    best: &'a PredictorConfig,
    cells: Vec<predictor::TrainSummary<'a>>,
}

pub(super) fn grid_search(a: GridSearchArgs, manifest: Option<&Path>) -> CliResult<()> {
    let started = Instant::now();
    let base = model_config(&a.model)?;
    let grid: Vec<PredictorConfig> = match &a.grid {
        Some(p) => read_json(p)?,
        None => default_grid(&base),
    };
    let mut m = RunManifest::new("grid-search").config(&grid)?.seed("rng_seed", base.rng_seed);
    if let Some(p) = &a.grid {
        m = m.input("grid", p);
    }
    let (data, m) = load_data(&a.data, &a.out, m)?;
    let result = predictor::grid_search(&grid, &data.train, &data.dev, &data.stats)?;
    let best = &result.reports[result.best_index];
    let report_path = sibling(&a.out, "report.json");
    let curve_path = sibling(&a.out, "curve.csv");
    best.model.save(&a.out)?;
    write_json(
        &report_path,
        &GridReport {
            best_index: result.best_index,
            best: &result.best,
            cells: result.reports.iter().map(|r| r.summary()).collect(),
        },
    )?;
    let mut curve = String::from("cell,epoch,train_loss,dev_loss\n");
    for (i, r) in result.reports.iter().enumerate() {
        for e in &r.epochs {
            curve.push_str(&format!("{i},{},{},{}\n", e.epoch, e.train_loss, e.dev_loss));
        }
    }
    fs::write(&curve_path, curve).map_err(Error::from)?;
    for (i, r) in result.reports.iter().enumerate() {
        println!(
            "{}cell {i}: {} blocks x {} units, best dev loss {:.6}",
            if i == result.best_index { "* " } else { "  " },
            r.config.n_blocks,
            r.config.hidden_units,
            r.best_dev_loss.unwrap_or(f64::NAN)
        );
    }
    let m = m.output("model", &a.out).output("report", &report_path).output("curve", &curve_path);
    finish(m, started, manifest, Some(&a.out))
}

const REALIZED_HEADER: [&str; 3] = ["duration_s", "word_f0_spread", "sentence_f0_spread"];

fn realized_columns(pc: &Matrix, u: &Utterance, stats: &NormStats) -> Result<Vec<[String; 3]>> {
    let r = realize(pc, u, stats)?;
    Ok(u.phone_word_index()
        .iter()
        .enumerate()
        .map(|(p, &w)| {
            [
                r.per_phone_duration[p].to_string(),
                r.word_f0_spread[w].to_string(),
                r.sentence_f0_spread.to_string(),
            ]
        })
        .collect())
}

pub(super) fn predict(a: PredictArgs, manifest: Option<&Path>) -> CliResult<()> {
    let started = Instant::now();
    let model = PredictorModel::load(&a.model)?;
    let corpus = load_corpus(&a.corpus)?;
    let stats = a.stats.as_deref().map(NormStats::load).transpose()?;
    let mut header = vec!["utt_id", "phone_index", "word_index", "pc1", "pc2", "pc3", "pc4"];
    if stats.is_some() {
        header.extend(REALIZED_HEADER);
    }
    let mut rows = Vec::new();
    for u in select(&corpus, a.utt.as_deref())? {
        let raw = model.predict(u)?;
        let rectified = rectify(&raw, u)?;
        let shown = if a.rectify { &rectified } else { &raw };
        let realized = match &stats {
            Some(s) => Some(realized_columns(&rectified, u, s)?),
            None => None,
        };
        for (p, w) in u.phone_word_index().into_iter().enumerate() {
            let mut row = vec![u.id.clone(), p.to_string(), w.to_string()];
            row.extend(shown.row(p).iter().map(f64::to_string));
            if let Some(r) = &realized {
                row.extend(r[p].iter().cloned());
            }
            rows.push(row);
        }
    }
    write_csv(&a.out, &header, rows)?;
    let mut m = RunManifest::new("predict")
        .config(serde_json::json!({ "rectify": a.rectify, "utt": a.utt }))?
        .input("model", &a.model)
        .input("corpus", &a.corpus)
        .output("predictions", &a.out);
    if let Some(p) = &a.stats {
        m = m.input("stats", p);
    }
    finish(m, started, manifest, Some(&a.out))
}

enum Focus {
    None,
    Indices(BTreeSet<usize>),
    Token(String),
}

fn parse_focus(raw: Option<&str>) -> CliResult<Focus> {
    let Some(raw) = raw.map(str::trim) else {
        return Ok(Focus::None);
    };
    if raw.is_empty() {
        return Err(CliError::Usage("--focus is empty".into()));
    }
    let parts: Vec<&str> = raw.split(',').map(str::trim).collect();
    if parts.iter().all(|p| !p.is_empty() && p.bytes().all(|b| b.is_ascii_digit())) {
        let idx = parts
            .iter()
            .map(|p| p.parse().map_err(|e| CliError::Usage(format!("--focus {p}: {e}"))))
            .collect::<CliResult<_>>()?;
        Ok(Focus::Indices(idx))
    } else if parts.len() == 1 {
        Ok(Focus::Token(raw.to_string()))
    } else {
        Err(CliError::Usage(format!("--focus {raw:?}: expected word indices or a single token")))
    }
}

fn boost_spec(a: &BoostArgs) -> Result<BoostSpec> {
    let mut spec = match &a.preset {
        Some(name) => BoostSpec::preset(name)?,
        None => BoostSpec::default(),
    };
    if let Some(v) = a.alpha {
        spec.alpha = v;
    }
    if let Some(v) = a.beta {
        spec.beta = v;
    }
    if let Some(v) = a.gamma {
        spec.gamma = v;
    }
    if let Some(v) = a.delta {
        spec.delta = v;
    }
    Ok(spec)
}

pub(super) fn boost(a: BoostArgs, manifest: Option<&Path>) -> CliResult<()> {
    let started = Instant::now();
    let model = PredictorModel::load(&a.model)?;
    let stats = NormStats::load(&a.stats)?;
    let corpus = load_corpus(&a.corpus)?;
    let base = boost_spec(&a)?;
    let focus = parse_focus(a.focus.as_deref())?;
    let utterances = select(&corpus, a.utt.as_deref())?;

    let mut header = vec!["utt_id", "phone_index", "word_index", "token", "focal", "pc1", "pc2", "pc3", "pc4"];
    header.extend(REALIZED_HEADER);
    let mut rows = Vec::new();
    let mut matched = 0;
    let mut plotted: Option<[Trajectory; 2]> = None;
    for u in utterances {
        let spec = BoostSpec {
            focal_words: match &focus {
                Focus::None => BTreeSet::new(),
                Focus::Indices(idx) => idx.clone(),
                Focus::Token(tok) => words_matching(u, tok).into_iter().collect(),
            },
            ..base.clone()
        };
        matched += spec.focal_words.len();
        let rectified = rectify(&model.predict(u)?, u)?;
        let boosted = apply_boost(&rectified, &spec, u)?;
        let realized = realized_columns(&boosted, u, &stats)?;
        let word_index = u.phone_word_index();
        for (p, &w) in word_index.iter().enumerate() {
            let mut row = vec![
                u.id.clone(),
                p.to_string(),
                w.to_string(),
                u.words[w].token.clone(),
                u8::from(spec.focal_words.contains(&w)).to_string(),
            ];
            row.extend(boosted.row(p).iter().map(f64::to_string));
            row.extend(realized[p].iter().cloned());
            rows.push(row);
        }
        if plotted.is_none() {
            let traj = |pc: &Matrix| Trajectory {
                utt_id: u.id.clone(),
                word_index: word_index.clone(),
                values: (0..pc.rows()).map(|r| std::array::from_fn::<f64, N_PC, _>(|k| pc.get(r, k))).collect(),
            };
            plotted = Some([traj(&rectified), traj(&boosted)]);
        }
    }
    if let Focus::Token(tok) = &focus {
        if matched == 0 {
            return Err(Error::Config(format!("no word matches --focus {tok:?}")).into());
        }
    }
    write_csv(&a.out, &header, rows)?;
    let mut m = RunManifest::new("boost")
        .config(&base)?
        .input("model", &a.model)
        .input("stats", &a.stats)
        .input("corpus", &a.corpus)
        .output("realization", &a.out);
    if let (Some(svg), Some([plain, boosted])) = (&a.svg, plotted) {
        let series = [("predicted".to_string(), plain), ("boosted".to_string(), boosted)];
        fs::write(svg, render_svg(&series)?).map_err(Error::from)?;
        m = m.output("svg", svg);
    }
    finish(m, started, manifest, Some(&a.out))
}

fn load_trajectories(path: &Path) -> Result<Vec<Trajectory>> {
    parse_trajectories(&fs::read_to_string(path)?, path)
}

fn pick(trajs: Vec<Trajectory>, utt: Option<&str>, path: &Path) -> CliResult<Trajectory> {
    let found = match utt {
        Some(id) => trajs.into_iter().find(|t| t.utt_id == id),
        None => trajs.into_iter().next(),
    };
    found.ok_or_else(|| match utt {
        Some(id) => CliError::Usage(format!("{}: no rows for utterance {id:?}", path.display())),
        None => CliError::Usage(format!("{}: no data rows", path.display())),
    })
}

pub(super) fn plot(a: PlotArgs, manifest: Option<&Path>) -> CliResult<()> {
    let started = Instant::now();
    let main = pick(load_trajectories(&a.input)?, a.utt.as_deref(), &a.input)?;
    let utt = main.utt_id.clone();
    let mut series = vec![(a.input.display().to_string(), main)];
    if let Some(p) = &a.overlay {
        series.push((p.display().to_string(), pick(load_trajectories(p)?, Some(&utt), p)?));
    }
    let series_out: PathBuf = a.series_out.clone().unwrap_or_else(|| a.out.with_extension("series.csv"));
    fs::write(&a.out, render_svg(&series)?).map_err(Error::from)?;
    fs::write(&series_out, series_csv(&series)).map_err(Error::from)?;
    let mut m = RunManifest::new("plot")
        .config(serde_json::json!({ "utt": utt }))?
        .input("input", &a.input)
        .output("svg", &a.out)
        .output("series", &series_out);
    if let Some(p) = &a.overlay {
        m = m.input("overlay", p);
    }
    finish(m, started, manifest, Some(&a.out))
}

fn read_matrix(path: &Path) -> Result<Matrix> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = record?
            .iter()
            .map(|f| {
                f.trim().parse::<f64>().map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    msg: e.to_string(),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Matrix::from_rows(&rows)
}

pub(super) fn loss_eval(a: LossEvalArgs, manifest: Option<&Path>) -> CliResult<()> {
    let started = Instant::now();
    let inputs = LossInputs::new(
        read_matrix(&a.mel_pred)?,
        read_matrix(&a.mel_target)?,
        read_matrix(&a.lpc_pre)?,
        read_matrix(&a.lpc_post)?,
        read_matrix(&a.lpc_target)?,
    )?;
    println!("{}", multitask_loss(&inputs)?);
    let m = RunManifest::new("loss-eval")
        .input("mel_pred", &a.mel_pred)
        .input("mel_target", &a.mel_target)
        .input("lpc_pre", &a.lpc_pre)
        .input("lpc_post", &a.lpc_post)
        .input("lpc_target", &a.lpc_target);
    finish(m, started, manifest, None)
}
