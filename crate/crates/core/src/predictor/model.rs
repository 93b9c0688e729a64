use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{EmphasisFeature, PredictorConfig};
use crate::corpus::Utterance;
use crate::features::N_PC;
use crate::nnet::{
    dropout_backward, dropout_forward, prefixed, BiLstm, BiLstmCache, EmbeddingTable,
    LayerNormCache, LayerNormParams, Linear, Matrix, Parameterized, TensorView,
};
use crate::{Error, Result};

/// Word position in sentence, phone position in word, word-initial flag.
pub const N_POSITION_FEATURES: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub lstm: BiLstm,
    pub norm: LayerNormParams,
}

impl Parameterized for Block {
    fn tensors(&self) -> Vec<TensorView<'_>> {
        let mut v = prefixed("lstm", self.lstm.tensors());
        v.extend(prefixed("norm", self.norm.tensors()));
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.lstm.tensors_mut();
        v.extend(self.norm.tensors_mut());
        v
    }
}

/// All trainable tensors; gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorParams {
    pub phone_emb: EmbeddingTable,
    pub speaker_emb: EmbeddingTable,
    pub emphasis_emb: Option<EmbeddingTable>,
    pub blocks: Vec<Block>,
    pub proj: Linear,
}

impl Parameterized for PredictorParams {
    fn tensors(&self) -> Vec<TensorView<'_>> {
        let mut v = prefixed("phone_emb", self.phone_emb.tensors());
        v.extend(prefixed("speaker_emb", self.speaker_emb.tensors()));
        if let Some(e) = &self.emphasis_emb {
            v.extend(prefixed("emphasis_emb", e.tensors()));
        }
        for (i, b) in self.blocks.iter().enumerate() {
            v.extend(prefixed(&format!("block{i}"), b.tensors()));
        }
        v.extend(prefixed("proj", self.proj.tensors()));
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.phone_emb.tensors_mut();
        v.extend(self.speaker_emb.tensors_mut());
        if let Some(e) = &mut self.emphasis_emb {
            v.extend(e.tensors_mut());
        }
        for b in &mut self.blocks {
            v.extend(b.tensors_mut());
        }
        v.extend(self.proj.tensors_mut());
        v
    }
}

/// Index-level view of an utterance, validated against a model's tables.
#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceInput {
    pub speaker: usize,
    pub phones: Vec<usize>,
    pub emphasized: Vec<bool>,
    /// `T x N_POSITION_FEATURES`.
    pub positions: Matrix,
}

impl UtteranceInput {
    pub fn len(&self) -> usize {
        self.phones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phones.is_empty()
    }
}

/// Dropout settings for a training forward pass; `None` means inference.
#[derive(Debug, Clone, Copy)]
pub struct DropoutCtx {
    pub rate: f64,
    pub seed: u64,
}

struct BlockCache {
    lstm: BiLstmCache,
    norm: LayerNormCache,
    mask: Option<Matrix>,
    input_dim: usize,
}

/// Activations kept from a forward pass for back-propagation.
pub struct ForwardCache {
    blocks: Vec<BlockCache>,
    proj_input: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictorModel {
    pub config: PredictorConfig,
    pub phone_vocab: usize,
    pub n_speakers: usize,
    pub params: PredictorParams,
}

fn mix_seed(seed: u64, salt: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(seed, |s, p| mix_seed(s, *p))
}

impl PredictorModel {
    fn build(
        config: &PredictorConfig,
        phone_vocab: usize,
        n_speakers: usize,
        mut make_table: impl FnMut(usize, usize) -> EmbeddingTable,
        mut make_lstm: impl FnMut(usize, usize) -> BiLstm,
        make_norm: impl Fn(usize) -> LayerNormParams,
        make_proj: impl FnOnce(usize, usize) -> Linear,
    ) -> Result<Self> {
        config.validate()?;
        if phone_vocab == 0 || n_speakers == 0 {
            return Err(Error::Config("phone vocabulary and speaker count must be positive".into()));
        }
        let phone_emb = make_table(phone_vocab, config.phone_emb_dim);
        let speaker_emb = make_table(n_speakers, config.speaker_emb_dim);
        let emphasis_emb = match config.emphasis_feature {
            EmphasisFeature::Off => None,
            EmphasisFeature::On(d) => Some(make_table(2, d)),
        };
        let mut in_dim = config.feature_dim();
        let mut blocks = Vec::with_capacity(config.n_blocks);
        for _ in 0..config.n_blocks {
            let lstm = make_lstm(in_dim + config.speaker_emb_dim, config.hidden_units);
            in_dim = lstm.output_dim();
            blocks.push(Block {
                lstm,
                norm: make_norm(in_dim),
            });
        }
        Ok(Self {
            config: config.clone(),
            phone_vocab,
            n_speakers,
            params: PredictorParams {
                phone_emb,
                speaker_emb,
                emphasis_emb,
                blocks,
                proj: make_proj(in_dim, N_PC),
            },
        })
    }

    /// Random initialization seeded by `config.rng_seed`.
    pub fn init(config: &PredictorConfig, phone_vocab: usize, n_speakers: usize) -> Result<Self> {
        let rng = std::cell::RefCell::new(ChaCha8Rng::seed_from_u64(config.rng_seed));
        Self::build(
            config,
            phone_vocab,
            n_speakers,
            |v, d| EmbeddingTable::init(v, d, &mut *rng.borrow_mut()),
            |i, h| BiLstm::init(i, h, &mut *rng.borrow_mut()),
            LayerNormParams::new,
            |i, o| Linear::init(i, o, &mut *rng.borrow_mut()),
        )
    }

    /// Every tensor zero, layer-norm gains included.
    pub fn zeroed(config: &PredictorConfig, phone_vocab: usize, n_speakers: usize) -> Result<Self> {
        Self::build(
            config,
            phone_vocab,
            n_speakers,
            EmbeddingTable::zeros,
            BiLstm::zeros,
            LayerNormParams::zeros,
            Linear::zeros,
        )
    }

    /// A zero-valued copy of the parameter tree, for gradient accumulation.
    pub fn zero_grads(&self) -> PredictorParams {
        let mut g = self.params.clone();
        g.fill_zero();
        g
    }

    pub fn num_params(&self) -> usize {
        self.params.num_params()
    }

    pub fn prepare(&self, u: &Utterance) -> Result<UtteranceInput> {
        if u.speaker >= self.n_speakers {
            return Err(Error::UnknownSpeaker {
                speaker: u.speaker,
                n: self.n_speakers,
            });
        }
        let t = u.phone_count();
        let n_words = u.words.len();
        let mut phones = Vec::with_capacity(t);
        let mut emphasized = Vec::with_capacity(t);
        let mut positions = Matrix::zeros(t, N_POSITION_FEATURES);
        let mut row = 0;
        for (w, word) in u.words.iter().enumerate() {
            let word_pos = if n_words > 1 {
                w as f64 / (n_words - 1) as f64
            } else {
                0.0
            };
            for (j, &sym) in word.phone_symbols.iter().enumerate() {
                if sym >= self.phone_vocab {
                    return Err(Error::OutOfVocabulary {
                        symbol: sym,
                        vocab: self.phone_vocab,
                    });
                }
                let phone_pos = if word.phone_count > 1 {
                    j as f64 / (word.phone_count - 1) as f64
                } else {
                    0.0
                };
                phones.push(sym);
                emphasized.push(word.emphasized);
                positions
                    .row_mut(row)
                    .copy_from_slice(&[word_pos, phone_pos, if j == 0 { 1.0 } else { 0.0 }]);
                row += 1;
            }
        }
        Ok(UtteranceInput {
            speaker: u.speaker,
            phones,
            emphasized,
            positions,
        })
    }

    /// `T x feature_dim`: phone embedding, positions, optional emphasis embedding.
    pub fn features(&self, input: &UtteranceInput) -> Result<Matrix> {
        let p = &self.params;
        let mut out = Matrix::zeros(input.len(), self.config.feature_dim());
        let pd = self.config.phone_emb_dim;
        for t in 0..input.len() {
            let row = out.row_mut(t);
            row[..pd].copy_from_slice(p.phone_emb.lookup(input.phones[t])?);
            row[pd..pd + N_POSITION_FEATURES].copy_from_slice(input.positions.row(t));
            if let Some(e) = &p.emphasis_emb {
                row[pd + N_POSITION_FEATURES..].copy_from_slice(e.lookup(input.emphasized[t] as usize)?);
            }
        }
        Ok(out)
    }

    pub fn featurize(&self, u: &Utterance) -> Result<Matrix> {
        self.features(&self.prepare(u)?)
    }

    /// Full forward pass. Block `b` concatenates the speaker embedding to its
    /// input, then runs Bi-LSTM, layer norm and dropout.
    pub fn forward(
        &self,
        input: &UtteranceInput,
        dropout: Option<DropoutCtx>,
    ) -> Result<(Matrix, ForwardCache)> {
        let p = &self.params;
        let t = input.len();
        let spk = p.speaker_emb.lookup(input.speaker)?;
        let spk_rows = Matrix::from_vec(t, spk.len(), spk.repeat(t))?;
        let mut x = self.features(input)?;
        let mut caches = Vec::with_capacity(p.blocks.len());
        for (b, block) in p.blocks.iter().enumerate() {
            let input_dim = x.cols();
            let z = x.hcat(&spk_rows)?;
            let (h, lstm) = block.lstm.forward(&z)?;
            let (n, norm) = block.norm.forward(&h)?;
            let (out, mask) = match dropout {
                Some(ctx) => dropout_forward(&n, ctx.rate, true, derive_seed(ctx.seed, &[b as u64])),
                None => (n, None),
            };
            caches.push(BlockCache {
                lstm,
                norm,
                mask,
                input_dim,
            });
            x = out;
        }
        let y = p.proj.forward(&x)?;
        Ok((
            y,
            ForwardCache {
                blocks: caches,
                proj_input: x,
            },
        ))
    }

    /// Gradients of a scalar loss given `d_out = dL/dy` (`T x 4`).
    pub fn backward(&self, input: &UtteranceInput, cache: &ForwardCache, d_out: &Matrix) -> PredictorParams {
        let p = &self.params;
        let mut g = self.zero_grads();
        let mut dx = p.proj.backward(&cache.proj_input, d_out, &mut g.proj);
        let mut d_spk = vec![0.0; self.config.speaker_emb_dim];
        for (b, (block, bc)) in p.blocks.iter().zip(&cache.blocks).enumerate().rev() {
            let dn = dropout_backward(&dx, bc.mask.as_ref());
            let dh = block.norm.backward(&bc.norm, &dn, &mut g.blocks[b].norm);
            let dz = block.lstm.backward(&bc.lstm, &dh, &mut g.blocks[b].lstm);
            for r in 0..dz.rows() {
                for (acc, v) in d_spk.iter_mut().zip(&dz.row(r)[bc.input_dim..]) {
                    *acc += v;
                }
            }
            dx = dz.cols_range(0, bc.input_dim);
        }
        g.speaker_emb.accumulate_grad(input.speaker, &d_spk);
        let pd = self.config.phone_emb_dim;
        for t in 0..input.len() {
            let row = dx.row(t);
            g.phone_emb.accumulate_grad(input.phones[t], &row[..pd]);
            if let Some(e) = &mut g.emphasis_emb {
                e.accumulate_grad(input.emphasized[t] as usize, &row[pd + N_POSITION_FEATURES..]);
            }
        }
        g
    }

    /// Inference: dropout off, `T x 4` normalized PC predictions.
    pub fn predict(&self, u: &Utterance) -> Result<Matrix> {
        Ok(self.forward(&self.prepare(u)?, None)?.0)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            config: self.config.clone(),
            phone_vocab: self.phone_vocab,
            n_speakers: self.n_speakers,
            tensors: self
                .params
                .tensors()
                .into_iter()
                .map(|t| TensorRecord {
                    name: t.name,
                    shape: t.shape,
                    data: t.data.to_vec(),
                })
                .collect(),
        };
        fs::write(path, serde_json::to_string(&file)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(&fs::read_to_string(path)?)?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Version {
                what: "model",
                found: file.format_version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        let mut model = Self::zeroed(&file.config, file.phone_vocab, file.n_speakers)?;
        {
            let expected: Vec<(String, [usize; 2])> = model
                .params
                .tensors()
                .into_iter()
                .map(|t| (t.name, t.shape))
                .collect();
            if expected.len() != file.tensors.len() {
                return Err(Error::Shape(format!(
                    "model file has {} tensors, config implies {}",
                    file.tensors.len(),
                    expected.len()
                )));
            }
            for ((name, shape), rec) in expected.iter().zip(&file.tensors) {
                if *name != rec.name || *shape != rec.shape || rec.data.len() != shape[0] * shape[1] {
                    return Err(Error::Shape(format!(
                        "tensor {} {:?} does not match expected {name} {shape:?}",
                        rec.name, rec.shape
                    )));
                }
            }
        }
        for (dst, rec) in model.params.tensors_mut().into_iter().zip(&file.tensors) {
            dst.copy_from_slice(&rec.data);
        }
        Ok(model)
    }
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TensorRecord {
    name: String,
    shape: [usize; 2],
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    config: PredictorConfig,
    phone_vocab: usize,
    n_speakers: usize,
    tensors: Vec<TensorRecord>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tests::{flat_track, word};

    fn cfg(emph: EmphasisFeature) -> PredictorConfig {
        PredictorConfig {
            n_blocks: 2,
            hidden_units: 3,
            speaker_emb_dim: 2,
            phone_emb_dim: 3,
            emphasis_feature: emph,
            ..PredictorConfig::default()
        }
    }

    fn utt(words: Vec<crate::corpus::Word>, speaker: usize) -> Utterance {
        let end = words.last().unwrap().end_time;
        Utterance {
            id: "m".into(),
            speaker,
            words,
            f0_track: flat_track(end, 100.0),
        }
    }

    #[test]
    fn single_phone_features() {
        let m = PredictorModel::init(&cfg(EmphasisFeature::Off), 4, 1).unwrap();
        let u = utt(vec![word("a", 1, 0.0, 0.2, false)], 0);
        let f = m.featurize(&u).unwrap();
        assert_eq!(f.shape(), [1, 3 + N_POSITION_FEATURES]);
        assert_eq!(&f.row(0)[3..5], &[0.0, 0.0]);
    }

    #[test]
    fn emphasis_columns_gate_and_differ() {
        let m = PredictorModel::init(&cfg(EmphasisFeature::On(4)), 4, 1).unwrap();
        assert_eq!(m.config.feature_dim(), 3 + N_POSITION_FEATURES + 4);
        let mut a = word("a", 2, 0.0, 0.2, false);
        let mut b = word("a", 2, 0.3, 0.5, true);
        a.phone_symbols = vec![1, 2];
        b.phone_symbols = vec![1, 2];
        let f = m.featurize(&utt(vec![a, b], 0)).unwrap();
        for (r0, r1) in [(0, 2), (1, 3)] {
            let (x, y) = (f.row(r0), f.row(r1));
            assert_eq!(&x[..3], &y[..3]);
            assert_eq!(&x[4..6], &y[4..6]);
            assert_ne!(&x[6..], &y[6..]);
        }
    }

    #[test]
    fn out_of_vocabulary_and_unknown_speaker() {
        let m = PredictorModel::init(&cfg(EmphasisFeature::Off), 2, 1).unwrap();
        let u = utt(vec![word("a", 3, 0.0, 0.2, false)], 0);
        assert!(matches!(m.predict(&u), Err(Error::OutOfVocabulary { symbol: 2, vocab: 2 })));
        let u = utt(vec![word("a", 1, 0.0, 0.2, false)], 1);
        assert!(matches!(m.predict(&u), Err(Error::UnknownSpeaker { .. })));
    }

    #[test]
    fn zero_model_outputs_projection_bias() {
        let mut m = PredictorModel::zeroed(&cfg(EmphasisFeature::On(2)), 5, 2).unwrap();
        m.params.proj.b = vec![0.1, -0.2, 0.3, 0.4];
        let u = utt(vec![word("a", 3, 0.0, 0.3, true), word("b", 2, 0.4, 0.6, false)], 1);
        let y = m.predict(&u).unwrap();
        for t in 0..5 {
            assert_eq!(y.row(t), &m.params.proj.b[..]);
        }
    }

    #[test]
    fn inference_is_repeatable() {
        let m = PredictorModel::init(&cfg(EmphasisFeature::On(2)), 5, 2).unwrap();
        let u = utt(vec![word("a", 3, 0.0, 0.3, true), word("b", 2, 0.4, 0.6, false)], 1);
        assert_eq!(m.predict(&u).unwrap(), m.predict(&u).unwrap());
    }

    #[test]
    fn block_input_widths_include_speaker() {
        let m = PredictorModel::init(&cfg(EmphasisFeature::On(2)), 5, 2).unwrap();
        let b = &m.params.blocks;
        assert_eq!(b[0].lstm.input_dim(), m.config.feature_dim() + 2);
        assert_eq!(b[1].lstm.input_dim(), 2 * 3 + 2);
    }

    #[test]
    fn save_load_is_bit_exact() {
        let m = PredictorModel::init(&cfg(EmphasisFeature::On(2)), 7, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        m.save(&path).unwrap();
        let back = PredictorModel::load(&path).unwrap();
        assert_eq!(back, m);
        let bits = |p: &PredictorModel| p.params.flatten().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&m));
    }

    #[test]
    fn load_rejects_other_versions() {
        let m = PredictorModel::init(&cfg(EmphasisFeature::Off), 3, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        m.save(&path).unwrap();
        let text = fs::read_to_string(&path).unwrap().replacen("\"format_version\":1", "\"format_version\":9", 1);
        fs::write(&path, text).unwrap();
        assert!(matches!(PredictorModel::load(&path), Err(Error::Version { found: 9, .. })));
    }
}
