use thiserror::Error;

/// Errors produced by basis construction, sampling, assembly, solves and studies.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("requested {requested} modes but only {available} are available")]
    NotEnoughModes { requested: usize, available: usize },

    #[error("negative covariance eigenvalue sigma_{index} = {value}")]
    NegativeSigma { index: usize, value: f64 },

    #[error("regularity index beta = {0} outside [0, 2]")]
    BetaOutOfRange(f64),

    #[error("degenerate element {0} (zero measure)")]
    DegenerateElement(usize),

    #[error(
        "mode {mode} is unresolvable: it needs {required} quadrature points per direction, the maximum is {max}"
    )]
    UnresolvableMode { mode: usize, required: usize, max: usize },

    #[error("Lipschitz constant {lip} is not below the Poincare constant {gamma}")]
    NotContractive { lip: f64, gamma: f64 },

    #[error("Picard iteration stalled after {iterations} iterations (last increment {increment:e})")]
    PicardNotConverged { iterations: usize, increment: f64 },

    #[error("conjugate gradient stalled after {iterations} iterations (relative residual {residual:e})")]
    CgNotConverged { iterations: usize, residual: f64 },

    #[error("ill-posed problem: rho = {rho} must be below 2 - d/2 = {bound}")]
    IllPosed { rho: f64, bound: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("solve failed at level {level} (N = {n_modes}), sample {sample}: {source}")]
    SolveFailed {
        level: usize,
        n_modes: usize,
        sample: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::PicardNotConverged { .. }
            | Error::CgNotConverged { .. }
            | Error::UnresolvableMode { .. }
            | Error::DegenerateElement(_) => true,
            Error::SolveFailed { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
