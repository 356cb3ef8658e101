//! Decoherence functional, classification of interference suppression, and
//! probability sum rules.
//!
//! The decoherence matrix of a history set collects
//!
//! ```text
//! D(alpha', alpha) = Tr( C_alpha' rho C_alpha^dag ),
//! ```
//!
//! rows indexed by `alpha'`, columns by `alpha`, both in lexicographic order.
//! For a pure initial state `rho = |psi><psi|` the same matrix is assembled
//! from branch vectors `|b_alpha> = C_alpha |psi>` as `D(alpha', alpha) =
//! <b_alpha | b_alpha'>`, which only ever touches matrix-vector products and
//! therefore scales to large dimension. The two routes agree to tight
//! tolerance and are cross-checked in the test suite.
//!
//! Classification:
//! - *weak*: off-diagonal real parts vanish within tolerance (enough for the
//!   diagonal to obey probability sum rules);
//! - *medium*: off-diagonal entries vanish entirely within tolerance.

use std::fmt;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::history::{coarse_grain, HistoryIndex, HistorySet, Partition};
use crate::operator::{inner, C64, Operator};
use crate::tol;

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

/// How strongly interference between distinct histories is suppressed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum DecoherenceLevel {
    /// Off-diagonal terms survive; probabilities are inconsistent.
    None,
    /// Re D vanishes off the diagonal.
    Weak,
    /// D vanishes off the diagonal.
    Medium,
}

impl fmt::Display for DecoherenceLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecoherenceLevel::None => write!(f, "none"),
            DecoherenceLevel::Weak => write!(f, "weak"),
            DecoherenceLevel::Medium => write!(f, "medium"),
        }
    }
}

/// The decoherence functional over a set (or a coarse graining of one),
/// validated against its defining axioms at construction.
#[derive(Clone, Debug)]
pub struct DecoherenceMatrix {
    indices: Vec<HistoryIndex>,
    labels: Vec<String>,
    entries: Array2<C64>,
    tolerance: f64,
}

impl DecoherenceMatrix {
    /// Wrap and validate: Hermiticity, nonnegative diagonal, total sum one,
    /// all within `tolerance`.
    pub fn new(
        indices: Vec<HistoryIndex>,
        labels: Vec<String>,
        entries: Array2<C64>,
        tolerance: f64,
    ) -> Result<Self> {
        let n = indices.len();
        assert_eq!(labels.len(), n, "label count mismatch");
        assert_eq!(entries.nrows(), n, "entry row count mismatch");
        assert_eq!(entries.ncols(), n, "entry column count mismatch");
        let mut herm_dev: f64 = 0.0;
        for r in 0..n {
            for c in r..n {
                herm_dev = herm_dev.max((entries[(r, c)] - entries[(c, r)].conj()).norm());
            }
        }
        if herm_dev > tolerance {
            return Err(Error::AxiomViolation {
                axiom: "Hermiticity",
                deviation: herm_dev,
                tolerance,
            });
        }
        let mut diag_dev: f64 = 0.0;
        for r in 0..n {
            diag_dev = diag_dev.max((-entries[(r, r)].re).max(0.0));
        }
        if diag_dev > tolerance {
            return Err(Error::AxiomViolation {
                axiom: "nonnegative diagonal",
                deviation: diag_dev,
                tolerance,
            });
        }
        let total: C64 = entries.iter().sum();
        let sum_dev = (total - C64::new(1.0, 0.0)).norm();
        if sum_dev > tolerance * (n as f64).max(1.0) {
            return Err(Error::AxiomViolation {
                axiom: "unit total sum",
                deviation: sum_dev,
                tolerance,
            });
        }
        Ok(Self {
            indices,
            labels,
            entries,
            tolerance,
        })
    }

    pub fn indices(&self) -> &[HistoryIndex] {
        &self.indices
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn entries(&self) -> &Array2<C64> {
        &self.entries
    }

    pub fn entry(&self, r: usize, c: usize) -> C64 {
        self.entries[(r, c)]
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Tolerance the matrix was validated (and will be classified) with.
    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }
}

/// Classification outcome plus the violation magnitudes behind it.
#[derive(Clone, Debug)]
pub struct DecoherenceReport {
    pub level: DecoherenceLevel,
    /// Largest off-diagonal |Re D|.
    pub max_weak_violation: f64,
    /// Largest off-diagonal |D|.
    pub max_medium_violation: f64,
    /// `|D(r,c)| / sqrt(D(r,r) D(c,c))`, zero whenever either diagonal entry
    /// is below 1e-12.
    pub normalized_overlaps: Array2<f64>,
}

impl DecoherenceReport {
    /// Largest normalized overlap between two distinct histories.
    pub fn max_offdiag_overlap(&self) -> f64 {
        let n = self.normalized_overlaps.nrows();
        let mut worst: f64 = 0.0;
        for r in 0..n {
            for c in 0..n {
                if r != c {
                    worst = worst.max(self.normalized_overlaps[(r, c)]);
                }
            }
        }
        worst
    }
}

/// Probabilities for the histories of a (at least weakly) decoherent set.
#[derive(Clone, Debug)]
pub struct ProbabilityTable {
    indices: Vec<HistoryIndex>,
    labels: Vec<String>,
    values: Vec<f64>,
}

impl ProbabilityTable {
    pub fn indices(&self) -> &[HistoryIndex] {
        &self.indices
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn get(&self, idx: &HistoryIndex) -> Option<f64> {
        self.indices
            .iter()
            .position(|i| i == idx)
            .map(|p| self.values[p])
    }
}

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

/// Chain branch vectors `|b_alpha> = C_alpha |psi>` for every history.
fn branch_vectors_raw(hs: &HistorySet, psi: &Array1<C64>) -> Vec<Array1<C64>> {
    hs.indices()
        .iter()
        .map(|idx| hs.apply_chain(idx, psi))
        .collect()
}

/// Assemble the decoherence entries. Pure states take the branch-vector
/// route; general states take the trace route over dense chain matrices.
fn raw_entries(hs: &HistorySet) -> Result<Array2<C64>> {
    let indices = hs.indices();
    let n = indices.len();
    let mut entries = Array2::zeros((n, n));
    if hs.rho().is_pure() {
        let psi = hs.rho().recover_pure_state()?;
        let branches = branch_vectors_raw(hs, psi.amplitudes());
        for r in 0..n {
            for c in 0..n {
                // D(alpha', alpha) = <b_alpha | b_alpha'>.
                entries[(r, c)] = inner(&branches[c], &branches[r]);
            }
        }
    } else {
        let chains: Vec<Operator> = indices
            .iter()
            .map(|idx| hs.chain_matrix(idx))
            .collect::<Result<_>>()?;
        let rho = hs.rho().as_operator();
        for r in 0..n {
            let m = chains[r].matmul(rho)?;
            for c in 0..n {
                // Tr(M C^dag) as a Frobenius inner product.
                let mut acc = C64::new(0.0, 0.0);
                for (x, y) in m.data().iter().zip(chains[c].data().iter()) {
                    acc += x * y.conj();
                }
                entries[(r, c)] = acc;
            }
        }
    }
    Ok(entries)
}

/// Decoherence matrix of a history set at the default tolerance.
pub fn decoherence_matrix(hs: &HistorySet) -> Result<DecoherenceMatrix> {
    decoherence_matrix_with_tolerance(hs, tol::DECOHERENCE)
}

/// Decoherence matrix of a history set at a caller-chosen tolerance.
pub fn decoherence_matrix_with_tolerance(
    hs: &HistorySet,
    tolerance: f64,
) -> Result<DecoherenceMatrix> {
    let indices = hs.indices();
    let labels = indices.iter().map(|i| hs.history_label(i)).collect();
    let entries = raw_entries(hs)?;
    DecoherenceMatrix::new(indices, labels, entries, tolerance)
}

// ---------------------------------------------------------------------------
// Classification and probabilities
// ---------------------------------------------------------------------------

/// Classify off-diagonal suppression at tolerance `tolerance`.
pub fn classify(d: &DecoherenceMatrix, tolerance: f64) -> DecoherenceReport {
    let n = d.len();
    let mut max_weak: f64 = 0.0;
    let mut max_medium: f64 = 0.0;
    let mut overlaps = Array2::zeros((n, n));
    for r in 0..n {
        for c in 0..n {
            let z = d.entry(r, c);
            if r != c {
                max_weak = max_weak.max(z.re.abs());
                max_medium = max_medium.max(z.norm());
            }
            let (pr, pc) = (d.entry(r, r).re, d.entry(c, c).re);
            overlaps[(r, c)] = if pr < tol::ETA_ZERO || pc < tol::ETA_ZERO {
                0.0
            } else {
                z.norm() / (pr * pc).sqrt()
            };
        }
    }
    let level = if max_medium <= tolerance {
        DecoherenceLevel::Medium
    } else if max_weak <= tolerance {
        DecoherenceLevel::Weak
    } else {
        DecoherenceLevel::None
    };
    DecoherenceReport {
        level,
        max_weak_violation: max_weak,
        max_medium_violation: max_medium,
        normalized_overlaps: overlaps,
    }
}

/// Diagonal of the decoherence matrix as probabilities. Requires at least
/// weak decoherence at the matrix's own tolerance; values are clamped to
/// [0, 1] (they already lie within tolerance of it by the axioms).
pub fn probabilities(d: &DecoherenceMatrix) -> Result<ProbabilityTable> {
    let report = classify(d, d.tolerance());
    if report.level == DecoherenceLevel::None {
        return Err(Error::NotDecoherent {
            max_weak_violation: report.max_weak_violation,
        });
    }
    let values = (0..d.len())
        .map(|r| d.entry(r, r).re.clamp(0.0, 1.0))
        .collect();
    Ok(ProbabilityTable {
        indices: d.indices().to_vec(),
        labels: d.labels().to_vec(),
        values,
    })
}

// ---------------------------------------------------------------------------
// Sum rules under coarse graining
// ---------------------------------------------------------------------------

/// Outcome of checking the superposition law across a partition.
#[derive(Clone, Debug)]
pub struct SumRuleReport {
    /// Largest deviation of `Dbar(b', b)` (computed independently from class
    /// operators) from the double block sum of the fine-grained entries.
    pub superposition_max_dev: f64,
    pub fine_level: DecoherenceLevel,
    pub coarse_level: DecoherenceLevel,
    /// When both gradings admit probabilities: largest deviation of a block's
    /// coarse probability from the sum of its members' fine probabilities.
    pub prob_blocksum_max_dev: Option<f64>,
    /// The coarse decoherence matrix, indexed by block representatives.
    pub coarse: DecoherenceMatrix,
}

/// Verify the superposition law `Dbar(b', b) = sum_{a' in b'} sum_{a in b}
/// D(a', a)` for a partition, and the probability sum rules when the levels
/// permit. The superposition deviation is reported for every set, decoherent
/// or not.
pub fn check_sum_rules(
    hs: &HistorySet,
    partition: &Partition,
    tolerance: f64,
) -> Result<SumRuleReport> {
    let fine = decoherence_matrix_with_tolerance(hs, tolerance)?;
    let nb = partition.n_blocks();

    // Independent coarse functional. Pure route sums branch vectors per
    // block before taking inner products; general route sums dense chains.
    let mut coarse_entries = Array2::<C64>::zeros((nb, nb));
    if hs.rho().is_pure() {
        let psi = hs.rho().recover_pure_state()?;
        let mut block_branches: Vec<Array1<C64>> = Vec::with_capacity(nb);
        for block in partition.blocks() {
            let mut acc = Array1::<C64>::zeros(hs.dim());
            for idx in block {
                acc = acc + hs.apply_chain(idx, psi.amplitudes());
            }
            block_branches.push(acc);
        }
        for r in 0..nb {
            for c in 0..nb {
                coarse_entries[(r, c)] = inner(&block_branches[c], &block_branches[r]);
            }
        }
    } else {
        let classes = coarse_grain(hs, partition)?;
        let rho = hs.rho().as_operator();
        for r in 0..nb {
            let m = classes[r].matrix().matmul(rho)?;
            for c in 0..nb {
                let mut acc = C64::new(0.0, 0.0);
                for (x, y) in m.data().iter().zip(classes[c].matrix().data().iter()) {
                    acc += x * y.conj();
                }
                coarse_entries[(r, c)] = acc;
            }
        }
    }

    // Fine-entry block sums, compared against the independent coarse matrix.
    let fine_pos: std::collections::BTreeMap<&HistoryIndex, usize> = fine
        .indices()
        .iter()
        .enumerate()
        .map(|(p, i)| (i, p))
        .collect();
    let mut superposition_max_dev: f64 = 0.0;
    for (r, block_r) in partition.blocks().iter().enumerate() {
        for (c, block_c) in partition.blocks().iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for ir in block_r {
                for ic in block_c {
                    acc += fine.entry(fine_pos[ir], fine_pos[ic]);
                }
            }
            superposition_max_dev =
                superposition_max_dev.max((acc - coarse_entries[(r, c)]).norm());
        }
    }

    let coarse_indices: Vec<HistoryIndex> = partition
        .blocks()
        .iter()
        .map(|b| b[0].clone())
        .collect();
    let coarse_labels: Vec<String> = partition
        .blocks()
        .iter()
        .map(|b| {
            b.iter()
                .map(|i| hs.history_label(i))
                .collect::<Vec<_>>()
                .join("+")
        })
        .collect();
    let coarse = DecoherenceMatrix::new(
        coarse_indices,
        coarse_labels,
        coarse_entries,
        tolerance,
    )?;

    let fine_report = classify(&fine, tolerance);
    let coarse_report = classify(&coarse, tolerance);
    let prob_blocksum_max_dev = if fine_report.level >= DecoherenceLevel::Weak
        && coarse_report.level >= DecoherenceLevel::Weak
    {
        let fine_p = probabilities(&fine)?;
        let coarse_p = probabilities(&coarse)?;
        let mut dev: f64 = 0.0;
        for (b, block) in partition.blocks().iter().enumerate() {
            let sum: f64 = block
                .iter()
                .map(|i| fine_p.values()[fine_pos[i]])
                .sum();
            dev = dev.max((sum - coarse_p.values()[b]).abs());
        }
        Some(dev)
    } else {
        None
    };

    Ok(SumRuleReport {
        superposition_max_dev,
        fine_level: fine_report.level,
        coarse_level: coarse_report.level,
        prob_blocksum_max_dev,
        coarse,
    })
}

// ---------------------------------------------------------------------------
// Cross-set functional
// ---------------------------------------------------------------------------

/// Rectangular decoherence functional between the histories of two sets that
/// share dynamics, initial condition, and initial time. Not classified: the
/// matrix is not Hermitian or normalized in general.
#[derive(Clone, Debug)]
pub struct CrossSetMatrix {
    pub row_indices: Vec<HistoryIndex>,
    pub col_indices: Vec<HistoryIndex>,
    pub entries: Array2<C64>,
}

/// `D(alpha' in a, alpha in b) = Tr(C^a_alpha' rho C^b_alpha^dag)`.
pub fn cross_set_decoherence(a: &HistorySet, b: &HistorySet) -> Result<CrossSetMatrix> {
    if !a.same_context(b, 1e-12) {
        return Err(Error::MismatchedContext(
            "cross-set functional requires identical rho, H, and t0",
        ));
    }
    let rows = a.indices();
    let cols = b.indices();
    let mut entries = Array2::zeros((rows.len(), cols.len()));
    if a.rho().is_pure() {
        let psi = a.rho().recover_pure_state()?;
        let row_branches = branch_vectors_raw(a, psi.amplitudes());
        let col_branches = branch_vectors_raw(b, psi.amplitudes());
        for r in 0..rows.len() {
            for c in 0..cols.len() {
                entries[(r, c)] = inner(&col_branches[c], &row_branches[r]);
            }
        }
    } else {
        let row_chains: Vec<Operator> = rows
            .iter()
            .map(|i| a.chain_matrix(i))
            .collect::<Result<_>>()?;
        let col_chains: Vec<Operator> = cols
            .iter()
            .map(|i| b.chain_matrix(i))
            .collect::<Result<_>>()?;
        let rho = a.rho().as_operator();
        for r in 0..rows.len() {
            let m = row_chains[r].matmul(rho)?;
            for c in 0..cols.len() {
                let mut acc = C64::new(0.0, 0.0);
                for (x, y) in m.data().iter().zip(col_chains[c].data().iter()) {
                    acc += x * y.conj();
                }
                entries[(r, c)] = acc;
            }
        }
    }
    Ok(CrossSetMatrix {
        row_indices: rows,
        col_indices: cols,
        entries,
    })
}
