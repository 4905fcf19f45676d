use thiserror::Error;

use crate::diagnostics::EnergyRecord;

pub type Result<T, E = NpnsError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum NpnsError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    /// The Poisson problem `-ΔΦ = ρ` has no periodic solution unless `ρ` has zero mean.
    #[error("Poisson equation is not solvable: charge density has mean {0:e}")]
    NonzeroMeanCharge(f64),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// A non-finite coefficient appeared while stepping.
    #[error("blow-up at t = {t}: {reason}")]
    BlowUp {
        t: f64,
        reason: String,
        /// Diagnostics of the last finite state, when one was available.
        last_record: Option<Box<EnergyRecord>>,
    },

    #[error("condition failed: {0}")]
    ConditionFailed(String),

    #[error("decay fit is not defined: {0}")]
    FitDomain(String),
}
