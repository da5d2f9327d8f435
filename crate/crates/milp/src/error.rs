use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("variable `{var}` has invalid bounds [{lower}, {upper}]")]
    Bounds { var: String, lower: f64, upper: f64 },
    #[error("binary variable `{0}` has bounds outside [0, 1]")]
    BinaryBounds(String),
    #[error("non-finite {0}")]
    NonFinite(String),
    #[error("constraint `{constraint}` references undeclared variable #{index}")]
    UnknownVariable { constraint: String, index: usize },
    #[error("fixed value {value} of `{var}` lies outside its bounds")]
    FixedOutOfBounds { var: String, value: f64 },
    #[error("fixing variables violates `{constraint}` by {violation}")]
    FixedInfeasible { constraint: String, violation: f64 },
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("invalid model: {0}")]
    Model(#[from] ModelError),
    #[error("LP engine failure: {0}")]
    Engine(String),
    #[error("invalid option: {0}")]
    Options(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
