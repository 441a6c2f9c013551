use std::path::PathBuf;

/// Failure classes used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureClass {
    Parse,
    Validation,
    Convergence,
    Arithmetic,
}

impl FailureClass {
    pub fn exit_code(self) -> i32 {
        match self {
            FailureClass::Parse => 2,
            FailureClass::Validation => 3,
            FailureClass::Convergence => 4,
            FailureClass::Arithmetic => 5,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("negative discriminant {discriminant:e}: eigenvalues are not real")]
    NegativeDiscriminant { discriminant: f64 },

    #[error("b entry is zero at index {index}")]
    ZeroB { index: usize },

    #[error("b*d = a*theta at index {index}: continued-fraction coefficients undefined")]
    DegenerateIndex { index: usize },

    #[error("singular approximant: denominator vanishes at index {index}")]
    SingularApproximant { index: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate spectrum: rho = rho1 = {rho}")]
    DegenerateSpectrum { rho: f64 },

    #[error("contraction rate {rate} is not below 1")]
    NonContractive { rate: f64 },

    #[error(
        "tail at index {index} not certified within depth cap {depth}: best value {best}, bound {err_bound:e}"
    )]
    Convergence {
        index: usize,
        best: f64,
        err_bound: f64,
        depth: usize,
    },

    #[error("log2 scale overflow")]
    ScaleOverflow,

    #[error("oracle depth {requested} exceeds cap {cap}")]
    CapExceeded { requested: usize, cap: usize },

    #[error("limit matrix fails hypotheses: {0}")]
    Validation(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn class(&self) -> FailureClass {
        match self {
            Error::Parse { .. } | Error::InvalidArgument(_) | Error::Io(_) => FailureClass::Parse,
            Error::Validation(_) => FailureClass::Validation,
            Error::Convergence { .. } | Error::NonContractive { .. } => FailureClass::Convergence,
            Error::NegativeDiscriminant { .. }
            | Error::ZeroB { .. }
            | Error::DegenerateIndex { .. }
            | Error::SingularApproximant { .. }
            | Error::Domain(_)
            | Error::DegenerateSpectrum { .. }
            | Error::ScaleOverflow
            | Error::CapExceeded { .. } => FailureClass::Arithmetic,
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.class().exit_code()
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
