use thiserror::Error;

/// Errors raised by the toolkit.
///
/// The CLI maps these onto exit codes, see [`Error::exit_code`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("validation error in `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("variant error: operation requires the {expected} variant")]
    Variant { expected: &'static str },

    #[error("menu is empty")]
    EmptyMenu,

    #[error("no affordable menu item for point `{point}`")]
    NoAffordableItem { point: String },

    #[error("input contract is not feasible: {0}")]
    InfeasibleInput(String),

    #[error("assumption violated: {0}")]
    AssumptionViolated(String),

    #[error("family mismatch: {0}")]
    FamilyMismatch(String),

    #[error("grid error: {0}")]
    Grid(String),

    #[error("search space too large: {size} nodes exceeds cap {cap}")]
    TooLarge { size: u128, cap: u128 },

    #[error("no feasible contract exists on this grid")]
    Infeasible,

    #[error("no metric available for abstract allocations (add a `distance` table)")]
    NoMetric,

    #[error("menus in the sequence tail have no common item")]
    EmptyTail,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Short kind name, e.g. `ValidationError`, for diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Schema(_) => "SchemaError",
            Error::Validation { .. } => "ValidationError",
            Error::Shape(_) => "ShapeError",
            Error::Variant { .. } => "VariantError",
            Error::EmptyMenu => "EmptyMenu",
            Error::NoAffordableItem { .. } => "NoAffordableItem",
            Error::InfeasibleInput(_) => "InfeasibleInput",
            Error::AssumptionViolated(_) => "AssumptionViolated",
            Error::FamilyMismatch(_) => "FamilyMismatch",
            Error::Grid(_) => "GridError",
            Error::TooLarge { .. } => "TooLarge",
            Error::Infeasible => "Infeasible",
            Error::NoMetric => "NoMetric",
            Error::EmptyTail => "EmptyTail",
            Error::InvalidArgument(_) => "InvalidArgument",
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::AssumptionViolated(_) => 2,
            Error::TooLarge { .. } => 3,
            _ => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
