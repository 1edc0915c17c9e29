use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("direction is not a unit vector (|u| = {norm})")]
    NonUnitDirection { norm: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid body: {0}")]
    InvalidBody(String),
    #[error("projection did not converge after {iterations} iterations")]
    ConvergenceFailure { iterations: usize },
    #[error("Hausdorff bracket [{lo}, {hi}] did not reach the requested resolution")]
    ResolutionNotMet { lo: f64, hi: f64 },
    #[error("parallel shell has zero estimated volume")]
    DegenerateShell,
    #[error("Vandermonde solve residual {residual:e} exceeds tolerance")]
    IllConditioned { residual: f64 },
    #[error("face enumeration limited to {limit}: {what}")]
    FaceEnumerationOverflow { limit: usize, what: String },
    #[error("measure has {count} atoms, cap is {cap}")]
    TooManyAtoms { count: usize, cap: usize },
    #[error("simplex solver stalled after {pivots} pivots")]
    SolverStall { pivots: usize },
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("closed form {closed} and quadrature {quadrature} disagree")]
    QuadratureMismatch { closed: f64, quadrature: f64 },
    #[error(
        "adaptive quadrature failed to reach tolerance (estimate {estimate}, error {error:e})"
    )]
    QuadratureFailure { estimate: f64, error: f64 },
    #[error("perturbation ladder is not shrinking at step {step}")]
    LadderNotShrinking { step: usize },
    #[error("measure spaces differ")]
    SpaceMismatch,
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
