//! Crate-wide error type.

use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Clone, Debug)]
pub enum Error {
    /// A stencil touched a node slot that has never been populated.
    UnsetNode { j: i32 },
    /// |X_sigma| fell below the degenerate-parametrization threshold.
    DegenerateParametrization { j: i32, len: f64 },
    /// Operation requires a closed curve.
    NotClosed,
    /// Operation requires an open curve.
    NotOpen,
    /// Curve has too few nodes for the requested stencil or operation.
    TooFewNodes { needed: usize, got: usize },
    /// Curve is not (numerically) arc-length parameterized.
    NotArcLength { max_rel_spread: f64 },
    /// Curve topologies do not match.
    TopologyMismatch,
    /// Nonpositive mobility coefficient.
    NonpositiveCoefficient { name: &'static str, value: f64 },
    /// Unsupported finite-difference order.
    BadDerivativeOrder { order: u32 },
    /// Newton iteration failed to reach the residual tolerance.
    NewtonNoConvergence {
        iterations: usize,
        residual_norm: f64,
        history: Vec<f64>,
    },
    /// The finite-difference Jacobian is singular to working precision.
    SingularJacobian,
    /// Residual evaluation produced non-finite entries.
    NonFiniteResidual { rows: Vec<usize> },
    /// Invalid time step.
    BadTimeStep { dt: f64 },
    /// Invalid junction angle configuration.
    BadAngles { theta12: f64, theta13: f64 },
    /// Laplace variable outside the right half plane.
    BadLaplaceVariable { re: f64 },
    /// Energy ratio m outside (0, 2).
    BadEnergyRatio { m: f64 },
    /// The Cartesian formulation left its single-valued validity regime.
    CartesianRegime { max_slope: f64, limit: f64 },
    /// Invalid run configuration.
    Config(String),
    /// Solver failure during a run, tagged with the failing step.
    SolverAtStep { step: usize, source: Box<Error> },
    /// Filesystem / serialization problems from the run harness.
    Io(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::UnsetNode { j } => write!(f, "node {j} is not populated (unset ghost?)"),
            Error::DegenerateParametrization { j, len } => {
                write!(f, "degenerate parametrization at node {j}: |X_sigma| = {len:e}")
            }
            Error::NotClosed => write!(f, "operation requires a closed curve"),
            Error::NotOpen => write!(f, "operation requires an open curve"),
            Error::TooFewNodes { needed, got } => {
                write!(f, "curve too small: need at least {needed} nodes, got {got}")
            }
            Error::NotArcLength { max_rel_spread } => write!(
                f,
                "curve is not arc-length parameterized (relative chord spread {max_rel_spread:e}); regrid first"
            ),
            Error::TopologyMismatch => write!(f, "curve topologies do not match"),
            Error::NonpositiveCoefficient { name, value } => {
                write!(f, "coefficient {name} must be positive, got {value}")
            }
            Error::BadDerivativeOrder { order } => {
                write!(f, "unsupported derivative order {order} (expected 1..=4)")
            }
            Error::NewtonNoConvergence {
                iterations,
                residual_norm,
                ..
            } => write!(
                f,
                "Newton did not converge after {iterations} iterations (residual {residual_norm:e})"
            ),
            Error::SingularJacobian => write!(f, "singular Jacobian in Newton solve"),
            Error::NonFiniteResidual { rows } => {
                write!(f, "residual has non-finite entries at rows {rows:?}")
            }
            Error::BadTimeStep { dt } => write!(f, "time step must be positive, got {dt}"),
            Error::BadAngles { theta12, theta13 } => {
                write!(f, "junction angles must lie in (0, pi): {theta12}, {theta13}")
            }
            Error::BadLaplaceVariable { re } => {
                write!(f, "Laplace variable must satisfy Re(z) > 0, got Re(z) = {re}")
            }
            Error::BadEnergyRatio { m } => write!(f, "energy ratio m must lie in (0, 2), got {m}"),
            Error::CartesianRegime { max_slope, limit } => write!(
                f,
                "surface slope {max_slope:.3} exceeds {limit}: the height-function formulation \
                 is outside its single-valued regime; use the parametric formulations"
            ),
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::SolverAtStep { step, source } => {
                write!(f, "solver failed at step {step}: {source}")
            }
            Error::Io(msg) => write!(f, "i/o error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
