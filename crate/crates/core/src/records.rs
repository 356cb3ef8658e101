//! Branch vectors, record operators, strong decoherence, fullness, and
//! refinement of history sets.
//!
//! For a pure initial state the chain operators split the state into branch
//! vectors `|b_alpha> = C_alpha |psi>`. Medium decoherence makes the branches
//! orthogonal, and projectors onto the branch directions act as *records*:
//! orthogonal, exhaustive projectors `R_alpha` with
//!
//! ```text
//! C_alpha rho = R_alpha rho        (strong decoherence).
//! ```
//!
//! A set is *full* when its records resolve the whole space into rank-1
//! pieces: d nonvanishing branches in dimension d. Full sets are classified
//! by the basis their records single out (the equivalence-class key); any
//! set can be refined to a full one by appending a final family built from
//! its branch directions and a completion of them.
//!
//! The complement policy is fixed and reproducible: the projector onto the
//! orthogonal complement of all branch directions is assigned to the
//! lexicographically first vanishing history, or summed into the first
//! history's record when nothing vanishes.

use std::fmt;

use ndarray::{Array1, Array2};
use ndarray_linalg::SVD;

use crate::decoherence::{classify, decoherence_matrix_with_tolerance, DecoherenceLevel};
use crate::error::{Error, Result};
use crate::history::{HistoryIndex, HistorySet, ScheduledFamily};
use crate::operator::{fix_phase, inner, vec_norm, C64, Operator, Projector, StateVector};
use crate::tol;

// ---------------------------------------------------------------------------
// Branch vectors
// ---------------------------------------------------------------------------

/// The branch decomposition of a pure state over a set's histories.
#[derive(Clone, Debug)]
pub struct BranchSet {
    indices: Vec<HistoryIndex>,
    vectors: Vec<Array1<C64>>,
    norms: Vec<f64>,
    /// Largest |<b_i, b_j>| over distinct nonvanishing pairs.
    max_offdiag: f64,
    /// Largest normalized overlap over distinct nonvanishing pairs.
    max_normalized_overlap: f64,
}

impl BranchSet {
    pub fn indices(&self) -> &[HistoryIndex] {
        &self.indices
    }

    pub fn vectors(&self) -> &[Array1<C64>] {
        &self.vectors
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    /// A branch vanishes when its squared norm (its would-be probability)
    /// falls below the zero threshold.
    pub fn is_vanishing(&self, i: usize) -> bool {
        self.norms[i] * self.norms[i] <= tol::ETA_ZERO
    }

    /// Positions of the nonvanishing branches, in index order.
    pub fn nonvanishing(&self) -> Vec<usize> {
        (0..self.vectors.len())
            .filter(|&i| !self.is_vanishing(i))
            .collect()
    }

    pub fn max_offdiag(&self) -> f64 {
        self.max_offdiag
    }

    pub fn max_normalized_overlap(&self) -> f64 {
        self.max_normalized_overlap
    }

    /// True when every distinct pair of branches is orthogonal within `eta`
    /// (unnormalized, matching the decoherence-matrix entries).
    pub fn orthogonal(&self, eta: f64) -> bool {
        self.max_offdiag <= eta
    }
}

/// Decompose `psi` into branch vectors. `psi` must reproduce the set's
/// density matrix.
pub fn branch_vectors(hs: &HistorySet, psi: &StateVector) -> Result<BranchSet> {
    if psi.dim() != hs.dim() {
        return Err(Error::DimensionMismatch {
            left: hs.dim(),
            right: psi.dim(),
        });
    }
    let implied = Projector::from_state(psi);
    let dev = implied
        .as_operator()
        .max_abs_diff(hs.rho().as_operator());
    if dev > tol::ETA_HERM {
        return Err(Error::StateMismatch { deviation: dev });
    }
    let indices = hs.indices();
    let vectors: Vec<Array1<C64>> = indices
        .iter()
        .map(|idx| hs.apply_chain(idx, psi.amplitudes()))
        .collect();
    let norms: Vec<f64> = vectors.iter().map(vec_norm).collect();
    // Branches resum to the state (chains sum to the identity).
    let mut total = Array1::<C64>::zeros(hs.dim());
    for v in &vectors {
        total = total + v;
    }
    let resum_dev = vec_norm(&(&total - psi.amplitudes()));
    debug_assert!(resum_dev < 1e-8, "branches do not resum to psi: {resum_dev}");

    let mut max_offdiag: f64 = 0.0;
    let mut max_norm_overlap: f64 = 0.0;
    for i in 0..vectors.len() {
        if norms[i] * norms[i] <= tol::ETA_ZERO {
            continue;
        }
        for j in (i + 1)..vectors.len() {
            if norms[j] * norms[j] <= tol::ETA_ZERO {
                continue;
            }
            let ov = inner(&vectors[i], &vectors[j]).norm();
            max_offdiag = max_offdiag.max(ov);
            max_norm_overlap = max_norm_overlap.max(ov / (norms[i] * norms[j]));
        }
    }
    Ok(BranchSet {
        indices,
        vectors,
        norms,
        max_offdiag,
        max_normalized_overlap: max_norm_overlap,
    })
}

// ---------------------------------------------------------------------------
// Record sets
// ---------------------------------------------------------------------------

/// How the projector onto the complement of all branch directions is
/// assigned.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ComplementPolicy {
    /// Attach the complement to the lexicographically first vanishing
    /// history; if none vanishes, sum it into the first history's record.
    ToVanishing,
}

impl fmt::Display for ComplementPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ComplementPolicy::ToVanishing => write!(f, "to-vanishing"),
        }
    }
}

/// Orthogonal, exhaustive record projectors, one per history.
#[derive(Clone, Debug)]
pub struct RecordSet {
    indices: Vec<HistoryIndex>,
    projectors: Vec<Projector>,
    policy: ComplementPolicy,
    vanishing: Vec<bool>,
}

impl RecordSet {
    /// Validate mutual orthogonality and exhaustiveness (sum = identity)
    /// within the decoherence tolerance.
    pub fn new(
        indices: Vec<HistoryIndex>,
        projectors: Vec<Projector>,
        policy: ComplementPolicy,
    ) -> Result<Self> {
        if indices.len() != projectors.len() {
            return Err(Error::DimensionMismatch {
                left: indices.len(),
                right: projectors.len(),
            });
        }
        assert!(!projectors.is_empty(), "empty record set");
        let dim = projectors[0].dim();
        let mut sum = Operator::zeros(dim);
        for (i, p) in projectors.iter().enumerate() {
            sum = sum.add(p.as_operator())?;
            for q in projectors.iter().skip(i + 1) {
                let dev = p.as_operator().matmul(q.as_operator())?.max_norm();
                if dev > tol::DECOHERENCE {
                    return Err(Error::SubspacesNotOrthogonal { deviation: dev });
                }
            }
        }
        let sum_dev = sum.max_abs_diff(&Operator::identity(dim));
        if sum_dev > tol::DECOHERENCE * dim as f64 {
            return Err(Error::CompletenessViolation {
                time: f64::NAN,
                deviation: sum_dev,
            });
        }
        let vanishing = vec![false; projectors.len()];
        Ok(Self {
            indices,
            projectors,
            policy,
            vanishing,
        })
    }

    /// Construction path for extracted records whose orthogonality and
    /// exhaustiveness hold by construction.
    fn new_unchecked(
        indices: Vec<HistoryIndex>,
        projectors: Vec<Projector>,
        policy: ComplementPolicy,
        vanishing: Vec<bool>,
    ) -> Self {
        Self {
            indices,
            projectors,
            policy,
            vanishing,
        }
    }

    pub fn indices(&self) -> &[HistoryIndex] {
        &self.indices
    }

    pub fn projectors(&self) -> &[Projector] {
        &self.projectors
    }

    pub fn policy(&self) -> ComplementPolicy {
        self.policy
    }

    /// True for histories whose branch (or chain image) vanished; their
    /// record carries no probability.
    pub fn vanishing(&self) -> &[bool] {
        &self.vanishing
    }

    pub fn len(&self) -> usize {
        self.projectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projectors.is_empty()
    }
}

/// Extract records from the branch decomposition of a pure state. Requires
/// the nonvanishing branches to be mutually orthogonal (medium decoherence,
/// which for pure states is also strong).
pub fn extract_records_pure(hs: &HistorySet, psi: &StateVector) -> Result<RecordSet> {
    let branches = branch_vectors(hs, psi)?;
    if !branches.orthogonal(tol::DECOHERENCE) {
        return Err(Error::NotMediumDecoherent {
            max_medium_violation: branches.max_offdiag(),
        });
    }
    let dim = hs.dim();
    let n = branches.vectors().len();
    let mut projectors: Vec<Projector> = Vec::with_capacity(n);
    let mut vanishing = vec![false; n];
    let mut dirs: Vec<Array1<C64>> = Vec::new();
    for i in 0..n {
        if branches.is_vanishing(i) {
            vanishing[i] = true;
            projectors.push(Projector::zero(dim));
        } else {
            let dir = branches.vectors()[i].mapv(|z| z / branches.norms()[i]);
            let psi_dir = StateVector::new(dir.clone()).map_err(|_| Error::ZeroVector {
                norm: branches.norms()[i],
            })?;
            projectors.push(Projector::from_state(&psi_dir));
            dirs.push(dir);
        }
    }
    // Complement of the branch directions.
    let completion = complete_basis(&dirs, dim);
    let leftover = &completion[dirs.len()..];
    if !leftover.is_empty() {
        let mut cols = Array2::zeros((dim, leftover.len()));
        for (j, v) in leftover.iter().enumerate() {
            cols.column_mut(j).assign(v);
        }
        let q = Projector::from_orthonormal_columns(&cols)?;
        let target = (0..n).find(|&i| vanishing[i]).unwrap_or(0);
        projectors[target] = Projector::sum_of_orthogonal(&[projectors[target].clone(), q])?;
    }
    Ok(RecordSet::new_unchecked(
        branches.indices().to_vec(),
        projectors,
        ComplementPolicy::ToVanishing,
        vanishing,
    ))
}

// ---------------------------------------------------------------------------
// Strong decoherence
// ---------------------------------------------------------------------------

/// Residual of the strong-decoherence identity.
#[derive(Clone, Debug)]
pub struct StrongReport {
    /// `max_alpha max-entry |C_alpha rho - R_alpha rho|`.
    pub residual: f64,
    pub strong: bool,
    pub tolerance: f64,
}

/// Check `C_alpha rho = R_alpha rho` for every history at the decoherence
/// tolerance.
pub fn check_strong(hs: &HistorySet, records: &RecordSet) -> Result<StrongReport> {
    if records.indices() != hs.indices().as_slice() {
        return Err(Error::MismatchedContext(
            "record set indices do not match the history set",
        ));
    }
    let mut residual: f64 = 0.0;
    if hs.rho().is_pure() {
        let psi = hs.rho().recover_pure_state()?;
        let psi_max = psi
            .amplitudes()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        for (i, idx) in hs.indices().iter().enumerate() {
            let b = hs.apply_chain(idx, psi.amplitudes());
            let r_psi = records.projectors()[i].as_operator().apply(psi.amplitudes());
            let diff = &b - &r_psi;
            let dmax = diff.iter().map(|z| z.norm()).fold(0.0, f64::max);
            // C rho - R rho = (b - R psi) psi^dag for rho = |psi><psi|.
            residual = residual.max(dmax * psi_max);
        }
    } else {
        let rho = hs.rho().as_operator();
        for (i, idx) in hs.indices().iter().enumerate() {
            let c_rho = hs.chain_matrix(idx)?.matmul(rho)?;
            let r_rho = records.projectors()[i].as_operator().matmul(rho)?;
            residual = residual.max(c_rho.max_abs_diff(&r_rho));
        }
    }
    Ok(StrongReport {
        residual,
        strong: residual <= tol::DECOHERENCE,
        tolerance: tol::DECOHERENCE,
    })
}

/// Extract candidate records for a general (possibly impure) state from the
/// column spans of `C_alpha rho`, then verify them. The span construction is
/// a sufficient heuristic: failure to verify does not prove that no records
/// exist.
pub fn extract_records_impure(hs: &HistorySet) -> Result<RecordSet> {
    let dim = hs.dim();
    let rho = hs.rho().as_operator();
    let indices = hs.indices();
    let mut spans: Vec<Array2<C64>> = Vec::with_capacity(indices.len());
    let mut vanishing = vec![false; indices.len()];
    for (i, idx) in indices.iter().enumerate() {
        let m = hs.chain_matrix(idx)?.matmul(rho)?;
        if m.max_norm() <= tol::ETA_ZERO {
            vanishing[i] = true;
            spans.push(Array2::zeros((dim, 0)));
            continue;
        }
        let (u, s, _) = m
            .data()
            .svd(true, false)
            .map_err(|_| Error::LapackFailure {
                routine: "svd",
                info: -1,
            })?;
        let u = u.expect("left singular vectors requested");
        let smax = s.iter().cloned().fold(0.0, f64::max);
        let rank = s
            .iter()
            .take_while(|&&sv| sv > tol::RANK_CUTOFF_REL * smax)
            .count();
        if rank == 0 {
            vanishing[i] = true;
            spans.push(Array2::zeros((dim, 0)));
        } else {
            spans.push(u.slice(ndarray::s![.., ..rank]).to_owned());
        }
    }
    // Mutual orthogonality of the candidate subspaces.
    let mut worst: f64 = 0.0;
    for i in 0..spans.len() {
        if spans[i].ncols() == 0 {
            continue;
        }
        for j in (i + 1)..spans.len() {
            if spans[j].ncols() == 0 {
                continue;
            }
            let overlap = spans[i].t().mapv(|z| z.conj()).dot(&spans[j]);
            let dev = overlap.iter().map(|z| z.norm()).fold(0.0, f64::max);
            worst = worst.max(dev);
        }
    }
    if worst > tol::DECOHERENCE {
        return Err(Error::SubspacesNotOrthogonal { deviation: worst });
    }
    let mut projectors: Vec<Projector> = spans
        .iter()
        .map(|cols| {
            if cols.ncols() == 0 {
                Ok(Projector::zero(dim))
            } else {
                Projector::from_orthonormal_columns(cols)
            }
        })
        .collect::<Result<_>>()?;
    // Complement policy, as in the pure case.
    let dirs: Vec<Array1<C64>> = spans
        .iter()
        .flat_map(|cols| cols.columns().into_iter().map(|c| c.to_owned()).collect::<Vec<_>>())
        .collect();
    let completion = complete_basis(&dirs, dim);
    let leftover = &completion[dirs.len()..];
    if !leftover.is_empty() {
        let mut cols = Array2::zeros((dim, leftover.len()));
        for (j, v) in leftover.iter().enumerate() {
            cols.column_mut(j).assign(v);
        }
        let q = Projector::from_orthonormal_columns(&cols)?;
        let target = (0..projectors.len())
            .find(|&i| vanishing[i])
            .unwrap_or(0);
        projectors[target] = Projector::sum_of_orthogonal(&[projectors[target].clone(), q])?;
    }
    let records = RecordSet::new_unchecked(
        indices,
        projectors,
        ComplementPolicy::ToVanishing,
        vanishing,
    );
    let strong = check_strong(hs, &records)?;
    if !strong.strong {
        return Err(Error::VerificationFailed {
            residual: strong.residual,
            tolerance: strong.tolerance,
        });
    }
    Ok(records)
}

// ---------------------------------------------------------------------------
// Implication chain
// ---------------------------------------------------------------------------

/// Truth value that distinguishes "not established" from "disproved".
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TriState {
    True,
    False,
    Undetermined,
}

impl fmt::Display for TriState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TriState::True => write!(f, "true"),
            TriState::False => write!(f, "false"),
            TriState::Undetermined => write!(f, "undetermined"),
        }
    }
}

/// Joint status of strong, medium, and weak decoherence for one set.
#[derive(Clone, Debug)]
pub struct ImplicationReport {
    pub weak: bool,
    pub medium: bool,
    pub strong: TriState,
    pub max_weak_violation: f64,
    pub max_medium_violation: f64,
    pub strong_residual: Option<f64>,
    /// Strong implies medium implies weak; true when the computed statuses
    /// respect that ordering (they always should).
    pub monotone: bool,
}

/// Evaluate weak, medium, and strong decoherence together. Known records may
/// be supplied; otherwise they are extracted (pure route or impure span
/// route). For impure states whose span candidates fail verification, strong
/// decoherence is reported undetermined, never disproved.
pub fn implication_chain_report(
    hs: &HistorySet,
    records: Option<&RecordSet>,
) -> Result<ImplicationReport> {
    let d = decoherence_matrix_with_tolerance(hs, tol::DECOHERENCE)?;
    let cls = classify(&d, tol::DECOHERENCE);
    let weak = cls.level >= DecoherenceLevel::Weak;
    let medium = cls.level >= DecoherenceLevel::Medium;

    let (strong, strong_residual) = match records {
        Some(r) => {
            let rep = check_strong(hs, r)?;
            (
                if rep.strong { TriState::True } else { TriState::False },
                Some(rep.residual),
            )
        }
        None => {
            if hs.rho().is_pure() {
                // Pure states: orthogonal branches are records, so strong and
                // medium coincide.
                if medium {
                    let psi = hs.rho().recover_pure_state()?;
                    let recs = extract_records_pure(hs, &psi)?;
                    let rep = check_strong(hs, &recs)?;
                    (
                        if rep.strong { TriState::True } else { TriState::False },
                        Some(rep.residual),
                    )
                } else {
                    (TriState::False, None)
                }
            } else {
                match extract_records_impure(hs) {
                    Ok(recs) => {
                        let rep = check_strong(hs, &recs)?;
                        (
                            if rep.strong { TriState::True } else { TriState::False },
                            Some(rep.residual),
                        )
                    }
                    // Overlapping chain images rule records out.
                    Err(Error::SubspacesNotOrthogonal { .. }) => (TriState::False, None),
                    // A failed candidate does not disprove existence.
                    Err(Error::VerificationFailed { .. }) => (TriState::Undetermined, None),
                    Err(e) => return Err(e),
                }
            }
        }
    };

    let monotone = !(strong == TriState::True && !medium) && !(medium && !weak);
    Ok(ImplicationReport {
        weak,
        medium,
        strong,
        max_weak_violation: cls.max_weak_violation,
        max_medium_violation: cls.max_medium_violation,
        strong_residual,
        monotone,
    })
}

// ---------------------------------------------------------------------------
// Fullness and equivalence classes
// ---------------------------------------------------------------------------

/// The basis a full set's records single out, up to ordering.
#[derive(Clone, Debug)]
pub struct EquivalenceClassKey {
    basis: Vec<Projector>,
}

impl EquivalenceClassKey {
    pub fn basis(&self) -> &[Projector] {
        &self.basis
    }
}

/// Greedy projector matching under the Frobenius norm: every record of `a`
/// must find a distinct record of `b` within the key-matching tolerance.
pub fn same_equivalence_class(a: &EquivalenceClassKey, b: &EquivalenceClassKey) -> bool {
    if a.basis.len() != b.basis.len() {
        return false;
    }
    let mut used = vec![false; b.basis.len()];
    'outer: for p in &a.basis {
        for (j, q) in b.basis.iter().enumerate() {
            if used[j] {
                continue;
            }
            let dist = p
                .as_operator()
                .sub(q.as_operator())
                .map(|d| d.frobenius_norm())
                .unwrap_or(f64::INFINITY);
            if dist < tol::KEY_MATCH {
                used[j] = true;
                continue 'outer;
            }
        }
        return false;
    }
    true
}

/// Fullness status of a strongly decoherent set.
#[derive(Clone, Debug)]
pub struct FullnessReport {
    pub full: bool,
    /// Number of histories with nonvanishing branches (pure) or chain images
    /// (impure).
    pub nonvanishing: usize,
    pub dim: usize,
    /// Present exactly when the set is full.
    pub key: Option<EquivalenceClassKey>,
}

/// Decide whether a set is full: its records resolve the space into `dim`
/// rank-1 orthogonal pieces. Errors with `NotStronglyDecoherent` when the
/// prerequisite fails.
pub fn is_full(hs: &HistorySet) -> Result<FullnessReport> {
    let dim = hs.dim();
    if hs.rho().is_pure() {
        let psi = hs.rho().recover_pure_state()?;
        let branches = branch_vectors(hs, &psi)?;
        if !branches.orthogonal(tol::DECOHERENCE) {
            return Err(Error::NotStronglyDecoherent {
                reason: format!(
                    "branches overlap by {:.3e}",
                    branches.max_offdiag()
                ),
            });
        }
        let nonvanishing = branches.nonvanishing();
        let full = nonvanishing.len() == dim;
        let key = if full {
            let basis = nonvanishing
                .iter()
                .map(|&i| {
                    let dir = branches.vectors()[i].mapv(|z| z / branches.norms()[i]);
                    StateVector::new(dir).map(|v| Projector::from_state(&v))
                })
                .collect::<Result<Vec<_>>>()?;
            Some(EquivalenceClassKey { basis })
        } else {
            None
        };
        Ok(FullnessReport {
            full,
            nonvanishing: nonvanishing.len(),
            dim,
            key,
        })
    } else {
        let records = match extract_records_impure(hs) {
            Ok(r) => r,
            Err(Error::SubspacesNotOrthogonal { deviation }) => {
                return Err(Error::NotStronglyDecoherent {
                    reason: format!("chain images overlap by {deviation:.3e}"),
                })
            }
            Err(Error::VerificationFailed { residual, .. }) => {
                return Err(Error::NotStronglyDecoherent {
                    reason: format!("record verification residual {residual:.3e}"),
                })
            }
            Err(e) => return Err(e),
        };
        let live: Vec<usize> = (0..records.len())
            .filter(|&i| !records.vanishing()[i])
            .collect();
        let full = live.len() == dim && live.iter().all(|&i| records.projectors()[i].rank() == 1);
        let key = if full {
            Some(EquivalenceClassKey {
                basis: live
                    .iter()
                    .map(|&i| records.projectors()[i].clone())
                    .collect(),
            })
        } else {
            None
        };
        Ok(FullnessReport {
            full,
            nonvanishing: live.len(),
            dim,
            key,
        })
    }
}

// ---------------------------------------------------------------------------
// Refinement to a full set
// ---------------------------------------------------------------------------

/// Append a final rank-1 family that makes a medium-decoherent pure set
/// full, while preserving the original histories' probabilities as block
/// sums.
///
/// The appended family consists of the branch directions and an orthonormal
/// completion; the completion vectors are mixed (by a discrete Fourier
/// rotation) with the first branch direction so that every new alternative
/// receives support from the state. Coarse graining the appended family away
/// therefore reproduces the original probabilities exactly, and the refined
/// set has `dim` nonvanishing branches. For an already-full set the appended
/// family is the record basis itself.
pub fn refine_to_full(hs: &HistorySet, psi: &StateVector) -> Result<HistorySet> {
    let branches = branch_vectors(hs, psi)?;
    if !branches.orthogonal(tol::DECOHERENCE) {
        return Err(Error::NotStronglyDecoherent {
            reason: format!("branches overlap by {:.3e}", branches.max_offdiag()),
        });
    }
    let dim = hs.dim();
    let live = branches.nonvanishing();
    assert!(!live.is_empty(), "state has no nonvanishing branch");
    let dirs: Vec<Array1<C64>> = live
        .iter()
        .map(|&i| branches.vectors()[i].mapv(|z| z / branches.norms()[i]))
        .collect();
    let completion = complete_basis(&dirs, dim);
    let extras = completion[dirs.len()..].to_vec();

    // Mix the completion into the first branch direction so no appended
    // alternative is orthogonal to the state.
    let mut group = vec![dirs[0].clone()];
    group.extend(extras);
    let mixed = dft_mix(&group);

    let mut new_dirs: Vec<Array1<C64>> = mixed;
    new_dirs.extend(dirs[1..].iter().cloned());
    debug_assert_eq!(new_dirs.len(), dim);

    let t_last = hs
        .families()
        .last()
        .map(|f| f.time())
        .unwrap_or(hs.t0());
    for &t_new in &[t_last, t_last + 1.0] {
        // Store the Schrodinger form of each appended direction.
        let dt = t_new - hs.t0();
        let projectors: Vec<Projector> = new_dirs
            .iter()
            .map(|dir| {
                let stored = hs.evolve(dir, dt);
                StateVector::new(stored).map(|v| Projector::from_state(&v))
            })
            .collect::<Result<_>>()?;
        let labels = (0..dim).map(|j| format!("r{j}")).collect();
        let family = ScheduledFamily::new_unchecked(t_new, projectors, labels);
        let mut families = hs.families().to_vec();
        families.push(family);
        match HistorySet::new(
            hs.hamiltonian().clone(),
            hs.t0(),
            hs.rho().clone(),
            families,
        ) {
            Ok(set) => return Ok(set),
            Err(Error::SimultaneousFamiliesDontCommute { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    unreachable!("appending strictly after the last family cannot collide");
}

/// Orthonormal basis of `dim` vectors starting with `dirs` (assumed
/// orthonormal), completed deterministically from the standard basis by
/// Gram-Schmidt with re-orthogonalization. Standard basis vectors whose
/// residual against the accumulated span falls below 1e-6 are skipped.
fn complete_basis(dirs: &[Array1<C64>], dim: usize) -> Vec<Array1<C64>> {
    let mut basis: Vec<Array1<C64>> = dirs.to_vec();
    for i in 0..dim {
        if basis.len() == dim {
            break;
        }
        let mut r: Array1<C64> = Array1::zeros(dim);
        r[i] = C64::new(1.0, 0.0);
        for _ in 0..2 {
            for b in basis.iter() {
                let c = inner(b, &r);
                r = r - b.mapv(|z| z * c);
            }
        }
        let n = vec_norm(&r);
        if n >= 1e-6 {
            let mut unit = r.mapv(|z| z / n);
            fix_phase(&mut unit);
            basis.push(unit);
        }
    }
    assert_eq!(
        basis.len(),
        dim,
        "orthonormal completion failed to reach full dimension"
    );
    basis
}

/// Mix `m` orthonormal vectors by the unitary DFT: `f_j = sum_l
/// omega^{jl} u_l / sqrt(m)`. The result is again orthonormal and every
/// output overlaps every input with weight `1/m`.
fn dft_mix(group: &[Array1<C64>]) -> Vec<Array1<C64>> {
    let m = group.len();
    let dim = group[0].len();
    let scale = 1.0 / (m as f64).sqrt();
    (0..m)
        .map(|j| {
            let mut f: Array1<C64> = Array1::zeros(dim);
            for (l, u) in group.iter().enumerate() {
                let ang = 2.0 * std::f64::consts::PI * (j * l) as f64 / m as f64;
                let w = C64::from_polar(scale, ang);
                f = f + u.mapv(|z| z * w);
            }
            f
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Interpolation
// ---------------------------------------------------------------------------

/// Insert a repetition of the family bracketing `t_new`: the new family's
/// Heisenberg projectors at `t_new` equal those of the family at the start of
/// the bracket, so the decoherence matrix is unchanged up to the index
/// bookkeeping (the inserted component must repeat the bracketed outcome for
/// a chain to survive).
pub fn interpolate_repeat(hs: &HistorySet, t_new: f64) -> Result<HistorySet> {
    let n = hs.n_families();
    let times: Vec<f64> = hs.families().iter().map(|f| f.time()).collect();
    let k = (0..n.saturating_sub(1))
        .rev()
        .find(|&k| times[k] - 1e-12 <= t_new && t_new <= times[k + 1] + 1e-12);
    let k = match k {
        Some(k) => k,
        None => {
            return Err(Error::TimeOutOfRange {
                t: t_new,
                lo: times.first().copied().unwrap_or(hs.t0()),
                hi: times.last().copied().unwrap_or(hs.t0()),
            })
        }
    };
    // Stored form of the repeated family at the new time:
    // Phat' = e^{-iH(t_new - t_k)} Phat e^{iH(t_new - t_k)}.
    let w = hs.propagator_matrix(t_new - times[k]);
    let repeated = hs.family(k).conjugated(&w, t_new)?;
    let mut families = hs.families().to_vec();
    families.insert(k + 1, repeated);
    HistorySet::new(
        hs.hamiltonian().clone(),
        hs.t0(),
        hs.rho().clone(),
        families,
    )
}

/// Insert, at `t_new` after the first `k` families (1-based prefix length),
/// a rank-1 family built from the normalized prefix-resolved vectors
/// `P^k ... P^1 |psi>` and an orthonormal completion. Requires the
/// nonvanishing resolved vectors to be orthogonal. Nonzero branches are
/// unchanged: each resolved vector is an eigenvector of exactly one new
/// alternative, and the completion directions carry no amplitude.
pub fn interpolate_resolution(
    hs: &HistorySet,
    psi: &StateVector,
    t_new: f64,
    k: usize,
) -> Result<HistorySet> {
    let n = hs.n_families();
    if k == 0 || k > n {
        return Err(Error::InvalidCoarseGraining(format!(
            "prefix length {k} out of range 1..={n}"
        )));
    }
    let times: Vec<f64> = hs.families().iter().map(|f| f.time()).collect();
    let lo = times[k - 1];
    let hi = if k < n { times[k] } else { f64::INFINITY };
    if t_new < lo - 1e-12 || t_new > hi + 1e-12 {
        return Err(Error::TimeOutOfRange { t: t_new, lo, hi });
    }
    // Check psi against rho, as in branch_vectors.
    let implied = Projector::from_state(psi);
    let dev = implied.as_operator().max_abs_diff(hs.rho().as_operator());
    if dev > tol::ETA_HERM {
        return Err(Error::StateMismatch { deviation: dev });
    }

    // Resolved vectors over the prefix alternatives.
    let mut resolved: Vec<Array1<C64>> = Vec::new();
    let mut comps = vec![0usize; k];
    'outer: loop {
        resolved.push(hs.apply_prefix(&comps, psi.amplitudes()));
        let mut pos = k;
        loop {
            if pos == 0 {
                break 'outer;
            }
            pos -= 1;
            comps[pos] += 1;
            if comps[pos] < hs.family(pos).len() {
                break;
            }
            comps[pos] = 0;
        }
    }
    let mut dirs: Vec<Array1<C64>> = Vec::new();
    let mut worst: f64 = 0.0;
    let norms: Vec<f64> = resolved.iter().map(vec_norm).collect();
    for i in 0..resolved.len() {
        if norms[i] * norms[i] <= tol::ETA_ZERO {
            continue;
        }
        for j in (i + 1)..resolved.len() {
            if norms[j] * norms[j] <= tol::ETA_ZERO {
                continue;
            }
            worst = worst.max(inner(&resolved[i], &resolved[j]).norm());
        }
        dirs.push(resolved[i].mapv(|z| z / norms[i]));
    }
    if worst > tol::DECOHERENCE {
        return Err(Error::NotMediumDecoherent {
            max_medium_violation: worst,
        });
    }
    let dim = hs.dim();
    let basis = complete_basis(&dirs, dim);

    let dt = t_new - hs.t0();
    let projectors: Vec<Projector> = basis
        .iter()
        .map(|dir| {
            let stored = hs.evolve(dir, dt);
            StateVector::new(stored).map(|v| Projector::from_state(&v))
        })
        .collect::<Result<_>>()?;
    let labels = (0..dim).map(|j| format!("q{j}")).collect();
    let family = ScheduledFamily::new_unchecked(t_new, projectors, labels);
    let mut families = hs.families().to_vec();
    families.insert(k, family);
    HistorySet::new(
        hs.hamiltonian().clone(),
        hs.t0(),
        hs.rho().clone(),
        families,
    )
}
