use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Config,
    Numeric,
    Io,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Config => "CONFIG",
            Category::Numeric => "NUMERIC",
            Category::Io => "IO",
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("config: {0}")]
    Config(String),
    #[error("weight is not admissible: {0}")]
    NotAdmissible(String),
    #[error("convolution matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error("eigensolver failed: {0}")]
    Eigensolver(String),
    #[error("eigenvalue {omega:.3e} lies in the ambiguous band around the zero-mode cutoff {cutoff:.3e}")]
    ZeroFilterAmbiguity { omega: f64, cutoff: f64 },
    #[error("symmetry operator unavailable: {0}")]
    SymmetryUnavailable(String),
    #[error("symmetry violation: {0}")]
    SymmetryViolation(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("no Dirac point: {0}")]
    NoDiracPoint(String),
    #[error("band crossing inside the sampled radius: {0}")]
    BandCrossing(String),
    #[error("time step {dt} exceeds the stability bound {bound}")]
    StepTooLarge { dt: f64, bound: f64 },
    #[error("solution blew up at step {step} (t = {time})")]
    Blowup { step: usize, time: f64 },
    #[error("Newton iteration failed after {iterations} steps: {reason}")]
    NewtonFailure { iterations: usize, reason: String, log: Vec<(usize, f64)> },
    #[error("domain too small: {0}")]
    DomainTooSmall(String),
    #[error("format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("image: {0}")]
    Image(#[from] image::ImageError),
}

impl Error {
    pub fn category(&self) -> Category {
        match self {
            Error::InvalidInput(_) | Error::Config(_) | Error::Format(_) => Category::Config,
            Error::Io(_) | Error::Image(_) => Category::Io,
            _ => Category::Numeric,
        }
    }
}
