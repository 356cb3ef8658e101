//! Finite-dimensional toolkit for decoherent-histories quantum mechanics.
//!
//! A *history* is a time-ordered sequence of projective alternatives. Given a
//! Hamiltonian `H`, an initial state `rho` at time `t0`, and a schedule of
//! projector families, the crate builds chain operators
//!
//! ```text
//! C_alpha = P^n_{alpha_n}(t_n) ... P^1_{alpha_1}(t_1),
//! P^k_a(t) = exp(i H (t - t0)) Phat^k_a exp(-i H (t - t0)),
//! ```
//!
//! and the decoherence functional `D(alpha', alpha) = Tr(C_alpha' rho C_alpha^dag)`.
//! On top of that sit classification of interference suppression (weak,
//! medium), record operators and fullness analysis for strong decoherence,
//! and entropy-based classicality diagnostics built from Schrodinger-picture
//! chains and maximum-entropy reconstruction.
//!
//! Dense `ndarray` storage throughout; the intended operating range is
//! dimension <= 256 for generic paths, with structured fast paths (pure
//! states, tensor-product projectors) reaching a few thousand.
//!
//! Modules:
//! - [`operator`]: role-tagged matrix types and numerical primitives.
//! - [`history`]: scheduled projector families, history sets, chain operators,
//!   coarse graining.
//! - [`decoherence`]: decoherence matrices, classification, probability sum
//!   rules.
//! - [`records`]: branch vectors, record extraction, fullness, refinement.
//! - [`classicality`]: Schrodinger chains, formal probabilities, maximum
//!   entropy reconstruction.
//! - [`models`]: ready-made model systems with documented expectations.

pub mod classicality;
pub mod decoherence;
pub mod error;
pub mod history;
pub mod models;
pub mod operator;
pub mod records;
pub mod tol;

/// Crate version, for embedding in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use error::{Error, Result};
pub use operator::{
    commutator, entropy, eig_hermitian, multiply, propagator, tensor, to_heisenberg, C64,
    DensityMatrix, HermEig, HermitianOperator, Operator, Projector, StateVector,
};
pub use history::{
    chain_operator, coarse_grain, coarse_grain_family, is_coarse_graining_of, reassign_times,
    reassign_times_fixed_heisenberg, sum_identity_check, ClassOperator, HistoryIndex, HistorySet,
    Partition, ScheduledFamily, SumIdentityReport,
};
pub use decoherence::{
    check_sum_rules, classify, cross_set_decoherence, decoherence_matrix,
    decoherence_matrix_with_tolerance, probabilities, CrossSetMatrix, DecoherenceLevel,
    DecoherenceMatrix, DecoherenceReport, ProbabilityTable, SumRuleReport,
};
pub use records::{
    branch_vectors, check_strong, extract_records_impure, extract_records_pure,
    implication_chain_report, interpolate_repeat, interpolate_resolution, is_full, refine_to_full,
    same_equivalence_class, BranchSet, ComplementPolicy, EquivalenceClassKey, FullnessReport,
    ImplicationReport, RecordSet, StrongReport, TriState,
};
pub use classicality::{
    build_constraints, classicality_report, formal_probabilities, maxent, s_hat,
    schrodinger_chains, schrodinger_projector, ClassicalityReport, ConstraintSystem,
    ConstraintTag, ConvergenceInfo, SchrodingerChain, SolverMethod, SolverOptions,
};
pub use models::{
    environment_model, measurement_model, random_model, unitary_transport, zxz_model, Expected,
    ModelBundle,
};
