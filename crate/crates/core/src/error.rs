use std::io;

use thiserror::Error;

/// Broad classes of failure, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Capacity,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{0} is not prime")]
    NotPrime(u64),

    #[error("stage {stage} exceeds the configured maximum {max_stage}: G({stage}#) needs about {bytes} bytes")]
    Capacity {
        stage: u64,
        max_stage: u64,
        bytes: u128,
    },

    #[error("merged gap {gap} does not fit a one-byte cell while building stage {stage}")]
    GapOverflow { stage: u64, gap: u64 },

    #[error("invalid gap `{token}` in \"{text}\": {reason}")]
    Parse {
        text: String,
        token: String,
        reason: &'static str,
    },

    #[error("closure of {constellation} exceeds the budget (sigma {sigma} > {budget}); it would hold about {estimated_nodes} nodes")]
    ClosureBudget {
        constellation: String,
        sigma: u64,
        budget: u64,
        estimated_nodes: u128,
    },

    #[error("no buildable stage satisfies the counting conditions for {constellation} (needs stage below {needed_next}); use sieve-only counting")]
    NoInitStage {
        constellation: String,
        needed_next: u64,
    },

    #[error("stage {stage} does not satisfy the counting conditions for {constellation}")]
    InitConditions { constellation: String, stage: u64 },

    #[error("stage {requested} is below the initialization stage {init}")]
    StageBelowInit { requested: u64, init: u64 },

    #[error("exact mode is capped at stage {cap}; use density mode for stage {requested}")]
    ExactCap { requested: u64, cap: u64 },

    #[error("no copies to test for uniformity")]
    NoCopies,

    #[error("no Hardy-Littlewood form configured for {0}")]
    NoHlForm(String),

    #[error("{0}")]
    Config(String),

    #[error("malformed ledger: {0}")]
    Ledger(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Capacity { .. } | Error::GapOverflow { .. } | Error::ClosureBudget { .. } => {
                ErrorKind::Capacity
            }
            Error::Io(_) => ErrorKind::Io,
            Error::Csv(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => ErrorKind::Io,
            _ => ErrorKind::Config,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
