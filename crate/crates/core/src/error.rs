use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid size {0} is odd; the Fourier backend needs an even number of nodes")]
    OddGridSize(usize),
    #[error("grid size {0} is below the minimum of 8 nodes per cell")]
    GridTooSmall(usize),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("leading coefficient drops to {value:e} at x = {x:e}, below the ellipticity constant {c0:e}")]
    EllipticityViolated { x: f64, value: f64, c0: f64 },
    #[error("perturbation is not Hermitian (defect {defect:e})")]
    NonSymmetricPerturbation { defect: f64 },
    #[error("grid functions live on different discretizations")]
    DiscretizationMismatch,
    #[error("no spectral gap above the ground level at theta0 (gap {gap:e})")]
    DegenerateEdge { gap: f64 },
    #[error("corrector solve is ill-conditioned (gap {gap:e})")]
    IllConditionedSolve { gap: f64 },
    #[error("coefficient {name} has imaginary part {imag:e}")]
    NonRealCoefficient { name: &'static str, imag: f64 },
    #[error("eps = {eps} is outside the admissible range (|eps * s| <= {t_max})")]
    EpsOutOfRange { eps: f64, t_max: f64 },
    #[error("precondition not met: {0}")]
    PreconditionNotMet(String),
    #[error("boundary coefficient is not real (imaginary part {imag:e} at x = {x})")]
    A1Violated { x: f64, imag: f64 },
    #[error("operator order {0} is not supported here (only m = 1)")]
    UnsupportedOrder(usize),
    #[error("assumption failed: {0}")]
    AssumptionFailed(String),
    #[error("supercell of {total} nodes exceeds the limit of {limit}")]
    SupercellTooLarge { total: usize, limit: usize },
    #[error("{count} configurations exceed the enumeration cap of {cap}")]
    CombinatorialBlowup { count: u128, cap: u128 },
    #[error("only {usable} points above the precision floor; at least {needed} are needed")]
    InsufficientData { usable: usize, needed: usize },
    #[error("eigensolver did not converge after {0} iterations")]
    NoConvergence(usize),
    #[error("singular linear system")]
    SingularSystem,
    #[error("output failed: {0}")]
    Io(String),
}

impl Error {
    /// Whether the error reports a violated modelling assumption (as opposed
    /// to bad input or a numerical breakdown).
    pub fn is_assumption_failure(&self) -> bool {
        matches!(
            self,
            Error::EllipticityViolated { .. }
                | Error::DegenerateEdge { .. }
                | Error::A1Violated { .. }
                | Error::UnsupportedOrder(_)
                | Error::AssumptionFailed(_)
                | Error::PreconditionNotMet(_)
        )
    }

    /// Whether the error comes from invalid input rather than computation.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::OddGridSize(_)
                | Error::GridTooSmall(_)
                | Error::InvalidInput(_)
                | Error::NonSymmetricPerturbation { .. }
                | Error::EpsOutOfRange { .. }
                | Error::SupercellTooLarge { .. }
                | Error::CombinatorialBlowup { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
