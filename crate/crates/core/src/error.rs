use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("signal too short: {required} samples required, {available} available")]
    Length { required: usize, available: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("input is not persistently exciting: input Hankel rank {rank} < {required}")]
    Excitation { rank: usize, required: usize },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("requested order {requested} exceeds the {available} significant singular values")]
    OrderTooLarge { requested: usize, available: usize },

    #[error("fault channel is not left invertible")]
    NotLeftInvertible,

    #[error("inconsistent rank profile: rank(R_s+1) = {rank_s_plus_1} < rank(R_s) = {rank_s}")]
    RankProfile { rank_s: usize, rank_s_plus_1: usize },

    #[error("no fault-matrix solution: {0}")]
    NoSolution(String),

    #[error("representative policy infeasible: {0}")]
    Infeasible(String),

    #[error("no admissible system after {attempts} attempts: {reason}")]
    Rejected { attempts: usize, reason: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("missing series: {0}")]
    MissingSeries(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Errors caused by the caller's input or configuration, as opposed to a
    /// numerical failure inside a pipeline.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Stage { source, .. } => source.is_input_error(),
            Error::Dimension(_)
            | Error::Length { .. }
            | Error::Empty(_)
            | Error::NonFinite { .. }
            | Error::Invalid(_)
            | Error::Parse(_)
            | Error::MissingSeries(_)
            | Error::Io(_)
            | Error::Json(_) => true,
            _ => false,
        }
    }

    pub fn stage(&self) -> Option<&'static str> {
        match self {
            Error::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| match e {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        })
    }
}
