//! Default numerical tolerances.
//!
//! All thresholds are absolute unless stated otherwise. Constructors that
//! validate take an explicit tolerance through their `with_tolerance`
//! variants; the plain constructors use the defaults below.

/// Hermiticity, idempotence, unit-trace, and normalization checks.
pub const ETA_HERM: f64 = 1e-9;

/// Eigendecomposition residuals and unitarity checks.
pub const ETA_EIG: f64 = 1e-10;

/// Threshold below which a norm is treated as exactly zero (vanishing
/// histories, zero chains, zero probabilities).
pub const ETA_ZERO: f64 = 1e-12;

/// Default decoherence tolerance used to classify off-diagonal suppression.
pub const DECOHERENCE: f64 = 1e-8;

/// Default maximum-entropy solver residual target (max absolute constraint
/// violation of the reconstructed state).
pub const SOLVER_RESIDUAL: f64 = 1e-8;

/// Default maximum-entropy solver iteration cap.
pub const SOLVER_MAX_ITER: usize = 10_000;

/// Relative cutoff for rank decisions (singular values and Gram reduction),
/// measured against the largest singular value of the same decomposition.
pub const RANK_CUTOFF_REL: f64 = 1e-10;

/// Frobenius-distance threshold for matching projectors between two record
/// bases when comparing equivalence-class keys.
pub const KEY_MATCH: f64 = 1e-8;
