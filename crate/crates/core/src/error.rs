use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("utterance {utt}: {violations}")]
    Validation { utt: String, violations: String },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("corpus too small: {0}")]
    CorpusTooSmall(String),

    #[error("utterance {utt}: too few voiced frames ({found}) for a percentile spread")]
    TooFewVoiced { utt: String, found: usize },

    #[error("zero corpus-wide variance for component {component}")]
    ZeroVariance { component: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("phone symbol {symbol} outside vocabulary of size {vocab}")]
    OutOfVocabulary { symbol: usize, vocab: usize },

    #[error("speaker {speaker} outside speaker table of size {n}")]
    UnknownSpeaker { speaker: usize, n: usize },

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("training diverged at epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },

    #[error("unsupported {what} format version {found} (expected {expected})")]
    Version {
        what: &'static str,
        found: u32,
        expected: u32,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
