use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "system unstable with {servers} servers (rho_bbu = {rho_bbu}, max rho_rrh = {max_rho_rrh})"
    )]
    Unstable {
        servers: u32,
        rho_bbu: f64,
        max_rho_rrh: f64,
    },

    #[error("state space of {states} states exceeds the limit of {limit}")]
    StateSpaceTooLarge { states: usize, limit: usize },

    #[error(
        "adaptive quadrature did not reach tolerance {tolerance:e} (estimated error {error:e})"
    )]
    QuadratureDiverged { tolerance: f64, error: f64 },

    #[error("transition row {row} sums to {sum}, too far from 1 to renormalise")]
    RowDefect { row: usize, sum: f64 },

    #[error("power iteration stopped after {iterations} iterations with L1 residual {residual:e}")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("cdf never reaches {zeta} (plateau at {plateau})")]
    PercentileUnbounded { zeta: f64, plateau: f64 },

    #[error("no server count up to {max_servers} meets the target (best Pr(t2 < tau) = {best_probability})")]
    Infeasible {
        max_servers: u32,
        best_probability: f64,
    },

    #[error("no samples to take a percentile of")]
    EmptySamples,
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
