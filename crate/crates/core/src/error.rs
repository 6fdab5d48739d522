use thiserror::Error;

/// Errors raised anywhere in the key-rate pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (defect {0:.3e})")]
    NotHermitian(f64),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("linear system is singular (pivot ratio {0:.3e})")]
    Singular(f64),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("single-photon subspace is empty (projected weight {0:.3e})")]
    EmptySubspace(f64),

    #[error("gamma matrix is singular or ill-conditioned (condition number {0:.3e})")]
    SingularGamma(f64),

    #[error("detection statistics are unphysical (clipped eigenvalue mass {0:.3e})")]
    UnphysicalStats(f64),

    #[error("no key-basis detections (p_det00 = {0:.3e})")]
    NoDetections(f64),

    #[error("argument {0} outside [0, 1]")]
    DomainError(f64),

    #[error("invalid phase errors: {0}")]
    InvalidPhaseErrors(String),

    #[error("semidefinite program is infeasible: {0}")]
    SdpInfeasible(String),

    #[error("semidefinite solver failed: {0}")]
    NumericalTrouble(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable tag, used in the status column of scan output.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NotHermitian(_) => "not_hermitian",
            Error::Dimension(_) => "dimension",
            Error::Singular(_) => "singular",
            Error::InvalidState(_) => "invalid_state",
            Error::InvalidParams(_) => "invalid_params",
            Error::EmptySubspace(_) => "empty_subspace",
            Error::SingularGamma(_) => "singular_gamma",
            Error::UnphysicalStats(_) => "unphysical_stats",
            Error::NoDetections(_) => "no_detections",
            Error::DomainError(_) => "domain_error",
            Error::InvalidPhaseErrors(_) => "invalid_phase_errors",
            Error::SdpInfeasible(_) => "sdp_infeasible",
            Error::NumericalTrouble(_) => "numerical_trouble",
            Error::Config(_) => "invalid_config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }

    /// Process exit code for the CLI: 2 invalid config, 3 singular or
    /// unphysical inputs, 4 solver failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::InvalidParams(_)
            | Error::InvalidState(_)
            | Error::Dimension(_)
            | Error::Io(_)
            | Error::Json(_)
            | Error::Csv(_) => 2,
            Error::NotHermitian(_)
            | Error::Singular(_)
            | Error::EmptySubspace(_)
            | Error::SingularGamma(_)
            | Error::UnphysicalStats(_)
            | Error::NoDetections(_)
            | Error::DomainError(_)
            | Error::InvalidPhaseErrors(_) => 3,
            Error::SdpInfeasible(_) | Error::NumericalTrouble(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
