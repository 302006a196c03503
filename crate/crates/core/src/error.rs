use std::path::PathBuf;

use thiserror::Error;

use crate::domain::Group;

#[derive(Debug, Error)]
pub enum Error {
    #[error("candidate {id} has a non-finite score")]
    NonFiniteScore { id: u64 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error(
        "candidate {id} has an unknown observed group; resolve unknowns first \
         (noise::apply_fixture assigns them to the disadvantaged group)"
    )]
    UnresolvedUnknown { id: u64 },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("schema error: missing column(s) {}", .0.join(", "))]
    MissingColumns(Vec<String>),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("group `{0}` is absent")]
    GroupAbsent(Group),

    #[error("split with seed {seed} leaves group `{group}` empty in the {side} set; try a different seed")]
    EmptySplitGroup {
        seed: u64,
        group: Group,
        side: &'static str,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("degenerate target: all training judgments equal {0}")]
    DegenerateJudgments(f64),

    #[error(
        "training diverged at epoch {epoch} (loss became non-finite with learning rate {learning_rate:e}); \
         use a smaller learning rate"
    )]
    Diverged { epoch: usize, learning_rate: f64 },

    #[error(
        "disadvantaged-group detection is tied (mean skew {mean_skew} for both groups); \
         pin the group explicitly"
    )]
    DetectionTie { mean_skew: f64 },

    #[error("infeasible target proportions: {0}")]
    Infeasible(String),

    #[error("fixture error: {0}")]
    Fixture(String),

    #[error("strategy `{strategy}` needs the {model} model")]
    MissingModel {
        strategy: &'static str,
        model: &'static str,
    },

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config: {0}")]
    Config(String),

    #[error("scenario {scenario}: {source}")]
    Scenario {
        scenario: String,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
