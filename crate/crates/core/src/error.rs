//! Crate-wide error type.

use thiserror::Error;

/// Everything that can go wrong while building or analyzing history sets.
#[derive(Debug, Error)]
pub enum Error {
    /// Matrix data is not square.
    #[error("matrix is not square: {rows} x {cols}")]
    NotSquare { rows: usize, cols: usize },

    /// Matrix or vector contains a NaN or infinity.
    #[error("matrix or vector contains a non-finite entry")]
    NonFinite,

    /// Two objects that must share a dimension do not.
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    /// Hermiticity deviation exceeded the tolerance.
    #[error("not Hermitian: max |A - A^dag| = {deviation:.3e} > {tolerance:.3e}")]
    NotHermitian { deviation: f64, tolerance: f64 },

    /// Idempotence or eigenvalue test for a projector failed.
    #[error("not a projector: {reason}, deviation {deviation:.3e} > {tolerance:.3e}")]
    NotProjector {
        reason: &'static str,
        deviation: f64,
        tolerance: f64,
    },

    /// Density-matrix trace is not one.
    #[error("density matrix trace is {trace:.12} instead of 1")]
    TraceNotOne { trace: f64 },

    /// Density matrix has an eigenvalue below the negativity tolerance.
    #[error("density matrix eigenvalue {value:.3e} is below -{tolerance:.3e}")]
    NegativeEigenvalue { value: f64, tolerance: f64 },

    /// State vector is not normalized.
    #[error("state vector norm is {norm:.12} instead of 1")]
    NotNormalized { norm: f64 },

    /// Attempt to normalize a vector of negligible norm.
    #[error("cannot normalize a vector of norm {norm:.3e}")]
    ZeroVector { norm: f64 },

    /// Operator expected to be unitary is not.
    #[error("not unitary: max |U^dag U - I| = {deviation:.3e} > {tolerance:.3e}")]
    NotUnitary { deviation: f64, tolerance: f64 },

    /// Projector family does not sum to the identity.
    #[error("family at t = {time} does not sum to identity: deviation {deviation:.3e}")]
    CompletenessViolation { time: f64, deviation: f64 },

    /// Two projectors in one family are not mutually exclusive.
    #[error(
        "family at t = {time} is not exclusive: |P_{a} P_{b}| = {deviation:.3e}"
    )]
    ExclusivityViolation {
        time: f64,
        a: usize,
        b: usize,
        deviation: f64,
    },

    /// Family labels do not match the projector count.
    #[error("family has {projectors} projectors but {labels} labels")]
    LabelCountMismatch { projectors: usize, labels: usize },

    /// A family is empty.
    #[error("a projector family must contain at least one projector")]
    EmptyFamily,

    /// Family times decrease along the schedule or start before t0.
    #[error("family times must be nondecreasing and >= t0")]
    NonMonotoneTimes,

    /// Two families scheduled at the same time fail to commute.
    #[error(
        "families {first} and {second} share time t = {time} but do not commute \
         (max residual {deviation:.3e})"
    )]
    SimultaneousFamiliesDontCommute {
        first: usize,
        second: usize,
        time: f64,
        deviation: f64,
    },

    /// A history index is out of range for the set.
    #[error("history index is out of range: component {component} has {got}, family has {len} alternatives")]
    IndexOutOfRange {
        component: usize,
        got: usize,
        len: usize,
    },

    /// A history index has the wrong number of components.
    #[error("history index has {got} components, set has {expected} families")]
    IndexLengthMismatch { got: usize, expected: usize },

    /// A partition of histories is not disjoint and exhaustive.
    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    /// A coarse graining request is malformed.
    #[error("invalid coarse graining: {0}")]
    InvalidCoarseGraining(String),

    /// Two history sets that must share rho, H, and t0 do not.
    #[error("history sets disagree on shared context: {0}")]
    MismatchedContext(&'static str),

    /// Decoherence-matrix axioms violated beyond tolerance.
    #[error("decoherence matrix violates {axiom}: deviation {deviation:.3e} > {tolerance:.3e}")]
    AxiomViolation {
        axiom: &'static str,
        deviation: f64,
        tolerance: f64,
    },

    /// Probabilities requested for a set that is not even weakly decoherent.
    #[error("set is not decoherent: max |Re D| off-diagonal = {max_weak_violation:.3e}")]
    NotDecoherent { max_weak_violation: f64 },

    /// Operation requires medium decoherence.
    #[error("set is not medium decoherent: max |D| off-diagonal = {max_medium_violation:.3e}")]
    NotMediumDecoherent { max_medium_violation: f64 },

    /// Operation requires strong decoherence (records).
    #[error("set is not strongly decoherent: {reason}")]
    NotStronglyDecoherent { reason: String },

    /// The state of the history set is not pure but a pure-state path was
    /// requested.
    #[error("initial state is not pure (or does not match the supplied vector)")]
    ImpureState,

    /// Supplied state vector does not reproduce the set's density matrix.
    #[error("state vector does not match rho: max deviation {deviation:.3e}")]
    StateMismatch { deviation: f64 },

    /// Candidate record subspaces overlap.
    #[error("branch subspaces are not orthogonal: max overlap {deviation:.3e}")]
    SubspacesNotOrthogonal { deviation: f64 },

    /// Extracted records fail the defining identity C_alpha rho = R_alpha rho.
    #[error("record verification failed: residual {residual:.3e} > {tolerance:.3e}")]
    VerificationFailed { residual: f64, tolerance: f64 },

    /// A time argument falls outside the interval the operation supports.
    #[error("time {t} is outside the admissible range [{lo}, {hi}]")]
    TimeOutOfRange { t: f64, lo: f64, hi: f64 },

    /// Entropy input has an eigenvalue below the clamp window.
    #[error("eigenvalue {value:.3e} is below the entropy clamp tolerance")]
    EigenvalueBelowTolerance { value: f64 },

    /// Maximum-entropy solver failed to reach the residual target.
    #[error(
        "solver did not converge: residual {final_residual:.3e} after {iterations} iterations"
    )]
    NotConverged {
        iterations: usize,
        final_residual: f64,
    },

    /// Model constructor received invalid parameters.
    #[error("invalid model parameters: {0}")]
    InvalidModelParams(String),

    /// A model's internal self-check failed; indicates a bug.
    #[error("model self-check failed: {0}")]
    ModelSelfCheck(String),

    /// LAPACK routine returned a nonzero info code.
    #[error("LAPACK {routine} failed with info = {info}")]
    LapackFailure { routine: &'static str, info: i32 },
}

pub type Result<T> = std::result::Result<T, Error>;
