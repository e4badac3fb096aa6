use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid upper half-plane point: tau = ({tau1}, {tau2}) needs finite tau1 and tau2 > 0")]
    InvalidTau { tau1: f64, tau2: f64 },

    #[error("quadratic differential coefficient must be finite and nonzero")]
    ZeroDifferential,

    #[error("curve class (0, 0) is not a closed curve")]
    TrivialCurve,

    #[error("not an orientation-preserving marking: det(B) = {det}")]
    NotOrientationPreserving { det: i64 },

    #[error("degenerate/orientation-reversing affine representative: |a| = {a_abs}, |b| = {b_abs}")]
    DegenerateAffine { a_abs: f64, b_abs: f64 },

    #[error("{op}: differential lives on tau = {found:?}, expected tau = {expected:?}")]
    WrongSurface {
        op: &'static str,
        found: (f64, f64),
        expected: (f64, f64),
    },

    #[error("{op}: {invariant} violated: measured {measured:e}, bound {bound:e}")]
    Tolerance {
        op: &'static str,
        invariant: &'static str,
        measured: f64,
        bound: f64,
    },

    #[error("invalid Beltrami path: |t * mu| = {0} must be < 1")]
    InvalidBeltrami(f64),

    #[error("{op}: step {step} does not fit inside the path at t = {t}")]
    StepOutsidePath { op: &'static str, t: f64, step: f64 },

    #[error("invalid cylinder data: {0}")]
    InvalidChain(String),

    #[error("divergent or undeclared chain norm: {0}")]
    Divergent(String),

    #[error("inconsistent tail metadata: {0}")]
    Metadata(String),

    #[error("expression error: {0}")]
    Expr(String),

    #[error("invalid grid form: {0}")]
    InvalidForm(String),

    #[error("linear solve did not converge: residual {residual:e} after {iterations} iterations")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("schema error: {0}")]
    Schema(String),
}

impl Error {
    /// Numerical-tolerance failures as opposed to bad input.
    pub fn is_tolerance(&self) -> bool {
        matches!(self, Error::Tolerance { .. } | Error::NoConvergence { .. })
    }
}
