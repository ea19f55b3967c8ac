use thiserror::Error;

/// Errors raised by every evaluation path in the crate.
///
/// Each variant names the originating module so that a front end can report
/// where a failure came from without inspecting call stacks.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("[{module}] invalid geometry: {reason}")]
    InvalidGeometry { module: &'static str, reason: String },

    #[error("[{module}] invalid parameter: {reason}")]
    InvalidParameter { module: &'static str, reason: String },

    #[error("[{module}] field and source points coincide")]
    CoincidentPoints { module: &'static str },

    #[error("[analytic] point ({rho}, {z}) lies on the conducting plate")]
    OnPlate { rho: f64, z: f64 },

    #[error("[interactions] charge at z = {z} lies on a material surface")]
    OnSurface { z: f64 },

    #[error("[{module}] point at z = {z} is outside the region of validity")]
    OutOfRegion { module: &'static str, z: f64 },

    #[error("[{module}] no convergence after {panels} panels (estimate {estimate:e}, error {abs_err:e})")]
    NoConvergence {
        module: &'static str,
        panels: usize,
        estimate: f64,
        abs_err: f64,
    },

    #[error("[nonlocal] wavenumber must be positive, got {0}")]
    NonPositiveWavenumber(f64),

    #[error("[nonlocal] distance must be positive, got {0}")]
    NonPositiveDistance(f64),

    #[error("[interactions] {operation} is not available for {geometry}")]
    UnsupportedGeometry {
        operation: &'static str,
        geometry: &'static str,
    },

    #[error("[born] point ({x}, {y}, {z}) lies inside the polarizable body")]
    PointInsideBody { x: f64, y: f64, z: f64 },

    #[error("[oracle] linear solver stalled after {iterations} iterations (residual {residual:e})")]
    SolverDiverged { iterations: usize, residual: f64 },

    #[error("[oracle] source at z = {z} sits on a permittivity interface")]
    SourceOnInterface { z: f64 },

    #[error("[interactions] finite-difference force error {estimate:e} exceeds 1% of |F| = {magnitude:e}; reduce the step")]
    StepTooLarge { estimate: f64, magnitude: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Module the error originated from.
    pub fn module(&self) -> &'static str {
        match self {
            Error::InvalidGeometry { module, .. }
            | Error::InvalidParameter { module, .. }
            | Error::CoincidentPoints { module }
            | Error::OutOfRegion { module, .. }
            | Error::NoConvergence { module, .. } => module,
            Error::OnPlate { .. } => "analytic",
            Error::OnSurface { .. } | Error::UnsupportedGeometry { .. } | Error::StepTooLarge { .. } => {
                "interactions"
            }
            Error::NonPositiveWavenumber(_) | Error::NonPositiveDistance(_) => "nonlocal",
            Error::PointInsideBody { .. } => "born",
            Error::SolverDiverged { .. } | Error::SourceOnInterface { .. } => "oracle",
        }
    }

    /// True for failures of an iterative numerical method, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NoConvergence { .. } | Error::SolverDiverged { .. })
    }

    pub(crate) fn invalid(module: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            module,
            reason: reason.into(),
        }
    }
}
