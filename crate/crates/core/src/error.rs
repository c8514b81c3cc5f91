use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid effect word {0:?}")]
    InvalidWord(String),
    #[error("generators are dependent: {0}")]
    DependentGenerators(String),
    #[error("the identity word has no alias class")]
    IdentityWord,
    #[error("invalid generator: {0}")]
    InvalidGenerator(String),
    #[error("no blocking scheme with {blocks} blocks avoids the main effects")]
    InfeasibleBlocking { blocks: usize },
    #[error("tube count violation: {0}")]
    TubeCountViolation(String),
    #[error("inconsistent unit lattice: {0}")]
    InconsistentLattice(String),
    #[error("missing responses in selected rows: {0}")]
    MissingInSelectedRows(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("need at least {needed} effects for a pseudo standard error, got {got}")]
    TooFewEffects { needed: usize, got: usize },
    #[error("REML did not converge after {iterations} iterations: {detail}")]
    NonConvergence { iterations: usize, detail: String },
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("unknown term {0:?}")]
    UnknownTerm(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {message}")]
    Parse { context: String, message: String },
}

impl Error {
    /// Stable machine-readable name, printed by the CLI on failure.
    pub fn name(&self) -> &'static str {
        match self {
            Error::InvalidWord(_) => "InvalidWord",
            Error::DependentGenerators(_) => "DependentGenerators",
            Error::IdentityWord => "IdentityWord",
            Error::InvalidGenerator(_) => "InvalidGenerator",
            Error::InfeasibleBlocking { .. } => "InfeasibleBlocking",
            Error::TubeCountViolation(_) => "TubeCountViolation",
            Error::InconsistentLattice(_) => "InconsistentLattice",
            Error::MissingInSelectedRows(_) => "MissingInSelectedRows",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::TooFewEffects { .. } => "TooFewEffects",
            Error::NonConvergence { .. } => "NonConvergence",
            Error::DegenerateData(_) => "DegenerateData",
            Error::UnknownTerm(_) => "UnknownTerm",
            Error::Invalid(_) => "Invalid",
            Error::Io { .. } => "Io",
            Error::Parse { .. } => "Parse",
        }
    }

    /// Process exit code: 2 validation, 3 numerical non-convergence, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonConvergence { .. } => 3,
            Error::Io { .. } | Error::Parse { .. } => 4,
            _ => 2,
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub fn parse(context: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.to_string(),
        }
    }
}
