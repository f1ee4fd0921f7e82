use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Broad failure class, used by the command-line front end to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Parse,
    Config,
    Io,
}

impl ErrorKind {
    pub fn exit_code(self) -> u8 {
        match self {
            ErrorKind::Parse => 2,
            ErrorKind::Config => 3,
            ErrorKind::Io => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorKind::Parse => "parse",
            ErrorKind::Config => "config",
            ErrorKind::Io => "io",
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },

    #[error("line {line}: timestamp {t_ms} ms does not follow {prev_ms} ms")]
    NonMonotoneTime { line: u64, t_ms: i64, prev_ms: i64 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("schema violation: {0}")]
    Schema(String),

    #[error("answer variant mismatch for stimulus {stimulus_id}: task {task} cannot carry that answer")]
    AnswerMismatch { stimulus_id: String, task: String },

    #[error("duplicate trial: reader {reader_id}, stimulus {stimulus_id}, task {task}")]
    DuplicateTrial {
        reader_id: String,
        stimulus_id: String,
        task: String,
    },

    #[error("duplicate stimulus {0} in catalog")]
    DuplicateStimulus(String),

    #[error("unknown stimulus {0}")]
    UnknownStimulus(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("stream too short: {valid} valid gaze points, need at least 2")]
    StreamTooShort { valid: usize },

    #[error("all samples invalid")]
    NoValidSamples,

    #[error("empty scanpath")]
    EmptyScanpath,

    #[error("dimension mismatch: {left_w}x{left_h} vs {right_w}x{right_h}")]
    DimensionMismatch {
        left_w: usize,
        left_h: usize,
        right_w: usize,
        right_h: usize,
    },

    #[error("map is not sum-normalized")]
    NotNormalized,

    #[error("constant map: correlation undefined")]
    ConstantMap,

    #[error("need at least 2 observers, got {0}")]
    TooFewObservers(usize),

    #[error("duplicate observer {0}")]
    DuplicateObserver(String),

    #[error("task mismatch: expected {expected}, got {got}")]
    TaskMismatch { expected: String, got: String },

    #[error("need at least {needed} values, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("paired samples differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("no trials")]
    NoTrials,

    #[error("trial reader={reader_id} stimulus={stimulus_id} task={task}: {source}")]
    Trial {
        reader_id: String,
        stimulus_id: String,
        task: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. } => ErrorKind::Io,
            Error::Config(_) => ErrorKind::Config,
            Error::Trial { source, .. } => source.kind(),
            _ => ErrorKind::Parse,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
