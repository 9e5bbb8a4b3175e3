use num_complex::Complex64;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what} did not converge")]
    NoConvergence { what: String },

    #[error("integration step underflow at z = {z}")]
    StepUnderflow { z: Complex64 },

    #[error("solution overflow at z = {z}; enable overflow rescaling")]
    Overflow { z: Complex64 },

    #[error("eigenvalues of L({z}) do not pair into doubles (worst pair gap {gap:e})")]
    Pairing { z: Complex64, gap: f64 },

    #[error("branch matching along the path stays ambiguous near z = {z}")]
    AmbiguousMatching { z: Complex64 },

    #[error("{kind} root count mismatch on [{lo}, {hi}]: contour count {expected}, located {found}")]
    RootCount {
        kind: &'static str,
        lo: f64,
        hi: f64,
        expected: i64,
        found: i64,
    },

    #[error("phase tracking failed near {0}")]
    PhaseTracking(Complex64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn no_convergence(what: impl Into<String>) -> Self {
        Error::NoConvergence { what: what.into() }
    }

    /// True for errors caused by bad input rather than numerical trouble.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidPotential(_) | Error::InvalidArgument(_) | Error::Io(_) | Error::Json(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
