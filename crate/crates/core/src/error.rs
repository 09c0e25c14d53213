use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain where the model is defined.
    #[error("domain error: {what} = {value} ({reason})")]
    Domain {
        what: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("configuration error: {0}")]
    Config(String),

    /// The plant integration produced a non-finite state.
    #[error("integration fault at t = {t} h: {detail} (X = {x})")]
    Integration { t: f64, x: f64, detail: String },

    #[error(
        "no admissible setpoint at q0 = {q0}: productivity is non-positive over the search bracket"
    )]
    NoAdmissibleSetpoint { q0: f64 },

    /// Productivity is not unimodal on the search grid, so golden-section
    /// refinement cannot be trusted.
    #[error(
        "productivity is not unimodal in X at q0 = {q0} ({turns} direction changes on the grid)"
    )]
    NotUnimodal { q0: f64, turns: usize },

    #[error("usage error: {0}")]
    Usage(String),
}

impl Error {
    pub(crate) fn domain(what: &'static str, value: f64, reason: &'static str) -> Self {
        Error::Domain {
            what,
            value,
            reason,
        }
    }
}
