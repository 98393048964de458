use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("{name} = {value} is outside its domain ({expected})")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    /// A structural precondition was violated by the caller.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("no vacuum (neither-sent) windows were observed")]
    NoVacuumWindows,

    #[error("empty {0} pool, cannot form matched subsets")]
    EmptyPool(&'static str),

    #[error("division by zero while evaluating {0}")]
    DivisionByZero(&'static str),

    #[error("invalid density operator: {0}")]
    InvalidDensity(String),
}

pub(crate) fn domain(name: &'static str, value: f64, expected: &'static str) -> Error {
    Error::Domain {
        name,
        value,
        expected,
    }
}
