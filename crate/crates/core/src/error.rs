use std::path::PathBuf;

use thiserror::Error;

use crate::ids::UserId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(
        "duplicate rating for user {user:?}, item {item:?} on lines {first_line} and {second_line}"
    )]
    DuplicatePair {
        user: String,
        item: String,
        first_line: usize,
        second_line: usize,
    },

    #[error(
        "filtering left no ratings (min user ratings {min_user}, min item ratings {min_item})"
    )]
    EmptyResult { min_user: usize, min_item: usize },

    #[error("user {user:?} has {count} ratings, fewer than the {folds} folds requested")]
    TooFewRatings {
        user: String,
        count: usize,
        folds: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown user {0}")]
    UnknownUser(UserId),

    #[error("empty user profile")]
    EmptyProfile,

    #[error("non-finite factor value after training iteration {iteration}")]
    NonFinite { iteration: usize },

    #[error("user {user} has {available} candidates, fewer than the {requested} requested")]
    TooFewCandidates {
        user: String,
        available: usize,
        requested: usize,
    },

    #[error("candidate list for user {0} has no normalized scores")]
    MissingNormScores(UserId),

    #[error("recommendation log is empty")]
    EmptyLog,

    #[error("long-tail item set is empty")]
    EmptyLongTail,

    #[error("missing folds: {0}")]
    MissingFolds(String),

    #[error("malformed model checkpoint: {0}")]
    Checkpoint(String),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("stage `{stage}` failed on fold {fold}: {source}")]
    Stage {
        stage: &'static str,
        fold: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str, fold: usize) -> Self {
        Error::Stage {
            stage,
            fold,
            source: Box::new(self),
        }
    }
}
