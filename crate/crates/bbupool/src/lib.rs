//! File formats, reports and sweeps on top of `bbupool-core`.

pub mod analysis;
pub mod configfile;
pub mod format;
pub mod simulation;
pub mod sweep;

pub type Result<T, E = AppError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{0}")]
    Config(String),

    #[error("line {line}: {message}")]
    ConfigLine { line: usize, message: String },

    #[error("{0}")]
    Io(String),

    #[error(transparent)]
    Core(#[from] bbupool_core::Error),
}

impl AppError {
    /// 1 for usage and configuration problems, 2 for numerical failures,
    /// 3 when no operating point meets the request.
    pub fn exit_code(&self) -> i32 {
        use bbupool_core::Error as E;
        match self {
            AppError::Config(_) | AppError::ConfigLine { .. } | AppError::Io(_) => 1,
            AppError::Core(e) => match e {
                E::InvalidConfig(_) | E::InvalidArgument(_) => 1,
                E::Infeasible { .. } | E::Unstable { .. } => 3,
                E::StateSpaceTooLarge { .. }
                | E::QuadratureDiverged { .. }
                | E::RowDefect { .. }
                | E::NotConverged { .. }
                | E::PercentileUnbounded { .. }
                | E::EmptySamples => 2,
            },
        }
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::Io(e.to_string())
    }
}

impl From<csv::Error> for AppError {
    fn from(e: csv::Error) -> Self {
        AppError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for AppError {
    fn from(e: serde_json::Error) -> Self {
        AppError::Io(e.to_string())
    }
}
