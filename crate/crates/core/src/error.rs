use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An input lies outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    /// A structural precondition (shape, symmetry, definiteness) was violated.
    #[error("contract violation: {0}")]
    Contract(String),

    /// The constraint set admits no solution. `family` names the constraint
    /// family whose removal restored feasibility, when probing found one.
    #[error("infeasible problem{}", family.as_ref().map(|f| format!(" (binding constraint family: {f})")).unwrap_or_default())]
    Infeasible { family: Option<String> },

    #[error("solver failure: {0}")]
    Solver(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
