//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {detail}")]
    Schema { path: PathBuf, detail: String },

    #[error("dataset {path} contains no records")]
    EmptyDataset { path: PathBuf },

    #[error("cannot sample {n} records from a set of {len}")]
    BadSampleSize { n: usize, len: usize },

    #[error("duplicate label for case {case_id} from evaluator {evaluator_id}")]
    DuplicateLabel { case_id: String, evaluator_id: String },

    #[error("unknown verdict token {token:?} (expected pass or fail)")]
    UnknownVerdict { token: String },

    #[error("backend error for request {request_id}: {detail}")]
    Backend { request_id: String, detail: String },

    #[error("retries exhausted after {attempts} attempts for request {request_id}: {last}")]
    RetriesExhausted {
        request_id: String,
        attempts: u32,
        last: String,
    },

    #[error("malformed backend payload for request {request_id}: {detail}")]
    MalformedPayload { request_id: String, detail: String },

    #[error("cache entry {path} is corrupt: {detail}")]
    CacheCorruption { path: PathBuf, detail: String },

    #[error("mock backend does not recognize prompt for request {request_id}")]
    UnrecognizedPrompt { request_id: String },

    #[error("rule count {k} outside the supported 0..=8 range")]
    RuleCountOutOfRange { k: u32 },

    #[error("completion has no balanced <output> tags and is not a refusal")]
    MissingOutputTags,

    #[error("generated system prompt has an empty role description")]
    EmptyRole,

    #[error("system prompt generation failed after {attempts} attempts for {record_id}: {last}")]
    GenerationRetriesExhausted {
        record_id: String,
        attempts: u32,
        last: String,
    },

    #[error("empty completion for request {request_id}")]
    EmptyCompletion { request_id: String },

    #[error("requested {requested} examples but only {available} are available")]
    MixSizeExceeded { requested: usize, available: usize },

    #[error("expert benchmark has {size} cases; few-shot synthesis needs at least {needed}")]
    ExpertSetTooSmall { size: usize, needed: usize },

    #[error("expected exactly {expected} expansion instructions, parsed {got}")]
    ExpansionArity { expected: usize, got: usize },

    #[error("benchmark case {case_id}: {detail}")]
    MalformedCase { case_id: String, detail: String },

    #[error("duplicate benchmark case id {case_id}")]
    DuplicateCaseId { case_id: String },

    #[error("judge completion contains no <judgement> tag")]
    MissingJudgement,

    #[error("judgement token {token:?} is neither pass nor fail")]
    BadJudgementToken { token: String },

    #[error("verdict is internally inconsistent: {detail}")]
    InconsistentVerdict { detail: String },

    #[error("cannot aggregate an empty verdict list")]
    EmptyVerdictSet,

    #[error("preference token {token:?} is not one of A, B, C")]
    BadPreferenceToken { token: String },

    #[error("label sets are not aligned: {detail}")]
    LabelMismatch { detail: String },

    #[error("pair tally is empty")]
    EmptyTally,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn schema(path: impl Into<PathBuf>, detail: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            detail: detail.into(),
        }
    }
}
