//! Scheduled projector families, history sets, chain operators, and coarse
//! graining.
//!
//! A `HistorySet` fixes the dynamical context (Hamiltonian, initial time,
//! initial state) and an ordered schedule of exhaustive, mutually exclusive
//! projector families. Families store Schrodinger-picture projectors; the
//! corresponding Heisenberg operators `P^k(t_k) = e^{iH(t_k-t0)} Phat^k
//! e^{-iH(t_k-t0)}` are produced on demand. Chain operators multiply the
//! Heisenberg projectors latest-leftmost:
//!
//! ```text
//! C_alpha = P^n_{alpha_n}(t_n) ... P^1_{alpha_1}(t_1).
//! ```
//!
//! The Hamiltonian eigendecomposition is computed once per set, lazily, and
//! shared; chains applied to vectors go through eigenbasis matrix-vector
//! products only, which is what the pure-state decoherence path relies on at
//! large dimension.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::OnceLock;

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::operator::{
    eig_hermitian_data, unitary_from_eig, C64, DensityMatrix, HermEig, HermitianOperator,
    Operator, Projector,
};
use crate::tol;

/// Times closer than this are treated as simultaneous.
const TIME_EPS: f64 = 1e-12;

// ---------------------------------------------------------------------------
// ScheduledFamily
// ---------------------------------------------------------------------------

/// An exhaustive set of mutually exclusive projectors attached to one time.
/// Projectors are stored in the Schrodinger picture.
#[derive(Clone, Debug)]
pub struct ScheduledFamily {
    time: f64,
    projectors: Vec<Projector>,
    labels: Vec<String>,
}

impl ScheduledFamily {
    /// Validate completeness (sum = identity) and pairwise exclusivity, with
    /// the default tolerance. Labels default to "0", "1", ...
    pub fn new(time: f64, projectors: Vec<Projector>) -> Result<Self> {
        let labels = (0..projectors.len()).map(|i| i.to_string()).collect();
        Self::with_labels(time, projectors, labels)
    }

    pub fn with_labels(time: f64, projectors: Vec<Projector>, labels: Vec<String>) -> Result<Self> {
        Self::with_tolerance(time, projectors, labels, tol::ETA_HERM)
    }

    pub fn with_tolerance(
        time: f64,
        projectors: Vec<Projector>,
        labels: Vec<String>,
        eta: f64,
    ) -> Result<Self> {
        if projectors.is_empty() {
            return Err(Error::EmptyFamily);
        }
        if labels.len() != projectors.len() {
            return Err(Error::LabelCountMismatch {
                projectors: projectors.len(),
                labels: labels.len(),
            });
        }
        let dim = projectors[0].dim();
        for p in &projectors {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch {
                    left: dim,
                    right: p.dim(),
                });
            }
        }
        // Exclusivity first: overlapping alternatives always break the sum
        // too, and the pairwise diagnostic is the more useful one.
        for a in 0..projectors.len() {
            for b in (a + 1)..projectors.len() {
                let dev = projectors[a]
                    .as_operator()
                    .matmul(projectors[b].as_operator())?
                    .max_norm();
                if dev > eta {
                    return Err(Error::ExclusivityViolation {
                        time,
                        a,
                        b,
                        deviation: dev,
                    });
                }
            }
        }
        // Completeness.
        let mut sum = Operator::zeros(dim);
        for p in &projectors {
            sum = sum.add(p.as_operator())?;
        }
        let dev = sum.max_abs_diff(&Operator::identity(dim));
        if dev > eta {
            return Err(Error::CompletenessViolation {
                time,
                deviation: dev,
            });
        }
        Ok(Self {
            time,
            projectors,
            labels,
        })
    }

    /// Construct without the O(m^2 d^3) validation pass, for families whose
    /// exhaustiveness and exclusivity hold exactly by construction (tensor
    /// products of validated small families, unitary conjugates of validated
    /// families).
    pub(crate) fn new_unchecked(time: f64, projectors: Vec<Projector>, labels: Vec<String>) -> Self {
        debug_assert_eq!(projectors.len(), labels.len());
        Self {
            time,
            projectors,
            labels,
        }
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn len(&self) -> usize {
        self.projectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projectors.is_empty()
    }

    pub fn projectors(&self) -> &[Projector] {
        &self.projectors
    }

    pub fn projector(&self, a: usize) -> &Projector {
        &self.projectors[a]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn dim(&self) -> usize {
        self.projectors[0].dim()
    }

    /// Same family re-attached to a different time.
    pub fn at_time(&self, time: f64) -> Self {
        Self {
            time,
            projectors: self.projectors.clone(),
            labels: self.labels.clone(),
        }
    }

    /// Conjugate every projector by `u` (assumed unitary), keeping labels.
    pub(crate) fn conjugated(&self, u: &Operator, time: f64) -> Result<Self> {
        let projectors = self
            .projectors
            .iter()
            .map(|p| p.conjugate_unitary(u))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            time,
            projectors,
            labels: self.labels.clone(),
        })
    }
}

/// Validated family constructor (free-function form).
pub fn make_family(time: f64, projectors: Vec<Projector>) -> Result<ScheduledFamily> {
    ScheduledFamily::new(time, projectors)
}

// ---------------------------------------------------------------------------
// HistoryIndex
// ---------------------------------------------------------------------------

/// One alternative per family, identifying a single history.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HistoryIndex {
    alphas: Vec<usize>,
}

impl HistoryIndex {
    pub fn new(alphas: Vec<usize>) -> Self {
        Self { alphas }
    }

    pub fn components(&self) -> &[usize] {
        &self.alphas
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }
}

impl fmt::Display for HistoryIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.alphas.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

impl From<Vec<usize>> for HistoryIndex {
    fn from(alphas: Vec<usize>) -> Self {
        Self { alphas }
    }
}

// ---------------------------------------------------------------------------
// HistorySet
// ---------------------------------------------------------------------------

/// A complete description of a set of alternative histories: dynamics,
/// initial condition, and the projector schedule.
#[derive(Debug)]
pub struct HistorySet {
    hamiltonian: HermitianOperator,
    t0: f64,
    rho: DensityMatrix,
    families: Vec<ScheduledFamily>,
    ham_eig: OnceLock<HermEig>,
}

impl Clone for HistorySet {
    fn clone(&self) -> Self {
        Self {
            hamiltonian: self.hamiltonian.clone(),
            t0: self.t0,
            rho: self.rho.clone(),
            families: self.families.clone(),
            // Share the cached eigensystem when it exists.
            ham_eig: match self.ham_eig.get() {
                Some(e) => {
                    let lock = OnceLock::new();
                    let _ = lock.set(e.clone());
                    lock
                }
                None => OnceLock::new(),
            },
        }
    }
}

impl HistorySet {
    /// Validate dimensional consistency, a nondecreasing schedule starting at
    /// or after `t0`, and pairwise commutation of families that share a time.
    pub fn new(
        hamiltonian: HermitianOperator,
        t0: f64,
        rho: DensityMatrix,
        families: Vec<ScheduledFamily>,
    ) -> Result<Self> {
        let dim = hamiltonian.dim();
        if rho.dim() != dim {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: rho.dim(),
            });
        }
        for f in &families {
            if f.dim() != dim {
                return Err(Error::DimensionMismatch {
                    left: dim,
                    right: f.dim(),
                });
            }
        }
        let mut prev = t0;
        for f in &families {
            if f.time() < prev - TIME_EPS {
                return Err(Error::NonMonotoneTimes);
            }
            prev = prev.max(f.time());
        }
        // Families sharing a time must commute pairwise, otherwise the chain
        // product would depend on an arbitrary ordering convention.
        for i in 0..families.len() {
            for j in (i + 1)..families.len() {
                if (families[i].time() - families[j].time()).abs() > TIME_EPS {
                    continue;
                }
                let mut worst: f64 = 0.0;
                for p in families[i].projectors() {
                    for q in families[j].projectors() {
                        let pq = p.as_operator().matmul(q.as_operator())?;
                        let qp = q.as_operator().matmul(p.as_operator())?;
                        worst = worst.max(pq.max_abs_diff(&qp));
                    }
                }
                if worst > tol::ETA_HERM {
                    return Err(Error::SimultaneousFamiliesDontCommute {
                        first: i,
                        second: j,
                        time: families[i].time(),
                        deviation: worst,
                    });
                }
            }
        }
        Ok(Self {
            hamiltonian,
            t0,
            rho,
            families,
            ham_eig: OnceLock::new(),
        })
    }

    pub fn hamiltonian(&self) -> &HermitianOperator {
        &self.hamiltonian
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn rho(&self) -> &DensityMatrix {
        &self.rho
    }

    pub fn families(&self) -> &[ScheduledFamily] {
        &self.families
    }

    pub fn family(&self, k: usize) -> &ScheduledFamily {
        &self.families[k]
    }

    pub fn n_families(&self) -> usize {
        self.families.len()
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    /// Replace the initial state (dimension checked).
    pub fn with_rho(&self, rho: DensityMatrix) -> Result<Self> {
        if rho.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: rho.dim(),
            });
        }
        let mut out = self.clone();
        out.rho = rho;
        Ok(out)
    }

    /// Cached eigensystem of the Hamiltonian. The decomposition of a
    /// validated Hermitian matrix only fails on a numerical fault, which is
    /// treated as unrecoverable.
    pub(crate) fn ham_eig(&self) -> &HermEig {
        self.ham_eig.get_or_init(|| {
            eig_hermitian_data(self.hamiltonian.as_operator().data())
                .expect("Hamiltonian eigendecomposition failed")
        })
    }

    /// `e^{-iH dt} v` through the cached eigenbasis (three matrix-vector
    /// products, no d^3 work).
    pub(crate) fn evolve(&self, v: &Array1<C64>, dt: f64) -> Array1<C64> {
        if dt == 0.0 {
            return v.clone();
        }
        let eig = self.ham_eig();
        let vdag_v = eig.eigenvectors.t().mapv(|z| z.conj()).dot(v);
        let phased = Array1::from_iter(
            eig.eigenvalues
                .iter()
                .zip(vdag_v.iter())
                .map(|(&w, &c)| c * C64::new(0.0, -w * dt).exp()),
        );
        eig.eigenvectors.dot(&phased)
    }

    /// Dense propagator `e^{-iH dt}` from the cached eigensystem.
    pub fn propagator_matrix(&self, dt: f64) -> Operator {
        unitary_from_eig(self.ham_eig(), dt)
    }

    /// Heisenberg projector `P^k_a(t_k)` as a dense matrix.
    pub fn heisenberg_projector(&self, k: usize, a: usize) -> Result<Projector> {
        let fam = &self.families[k];
        let dt = fam.time() - self.t0;
        if dt == 0.0 {
            return Ok(fam.projector(a).clone());
        }
        // e^{iH dt} = propagator(-dt)
        let u = self.propagator_matrix(-dt);
        fam.projector(a).conjugate_unitary(&u)
    }

    /// Apply `P^k_a(t_k)` to a vector using eigenbasis transport only.
    pub(crate) fn apply_heisenberg(&self, k: usize, a: usize, v: &Array1<C64>) -> Array1<C64> {
        let fam = &self.families[k];
        let dt = fam.time() - self.t0;
        let inner = self.evolve(v, dt);
        let projected = fam.projector(a).as_operator().apply(&inner);
        self.evolve(&projected, -dt)
    }

    /// Apply the truncated chain `P^k(t_k) ... P^1(t_1)` for the first
    /// `comps.len()` families to a vector.
    pub(crate) fn apply_prefix(&self, comps: &[usize], v: &Array1<C64>) -> Array1<C64> {
        let mut cur = v.clone();
        for (k, &a) in comps.iter().enumerate() {
            cur = self.apply_heisenberg(k, a, &cur);
        }
        cur
    }

    /// Apply the full chain operator `C_alpha` to a vector.
    pub(crate) fn apply_chain(&self, idx: &HistoryIndex, v: &Array1<C64>) -> Array1<C64> {
        self.apply_prefix(idx.components(), v)
    }

    /// Dense chain operator matrix, multiplying Heisenberg projectors
    /// latest-leftmost. Intended for the generic operating range; at large
    /// dimension prefer the vector paths.
    pub fn chain_matrix(&self, idx: &HistoryIndex) -> Result<Operator> {
        self.validate_index(idx)?;
        let mut acc = Operator::identity(self.dim());
        for (k, &a) in idx.components().iter().enumerate() {
            let p = self.heisenberg_projector(k, a)?;
            // Left-multiply so later families end up leftmost.
            acc = p.as_operator().matmul(&acc)?;
        }
        Ok(acc)
    }

    /// Every history index, ordered lexicographically (last component varies
    /// fastest). A set with no families has the single empty index.
    pub fn indices(&self) -> Vec<HistoryIndex> {
        let mut out = Vec::with_capacity(self.index_count());
        let mut cur = vec![0usize; self.families.len()];
        loop {
            out.push(HistoryIndex::new(cur.clone()));
            // Odometer increment.
            let mut k = self.families.len();
            loop {
                if k == 0 {
                    return out;
                }
                k -= 1;
                cur[k] += 1;
                if cur[k] < self.families[k].len() {
                    break;
                }
                cur[k] = 0;
            }
        }
    }

    pub fn index_count(&self) -> usize {
        self.families.iter().map(|f| f.len()).product()
    }

    pub fn validate_index(&self, idx: &HistoryIndex) -> Result<()> {
        if idx.len() != self.families.len() {
            return Err(Error::IndexLengthMismatch {
                got: idx.len(),
                expected: self.families.len(),
            });
        }
        for (k, &a) in idx.components().iter().enumerate() {
            if a >= self.families[k].len() {
                return Err(Error::IndexOutOfRange {
                    component: k,
                    got: a,
                    len: self.families[k].len(),
                });
            }
        }
        Ok(())
    }

    /// Human-readable label for a history: family labels joined by "|".
    pub fn history_label(&self, idx: &HistoryIndex) -> String {
        idx.components()
            .iter()
            .enumerate()
            .map(|(k, &a)| self.families[k].labels()[a].clone())
            .collect::<Vec<_>>()
            .join("|")
    }

    /// True when the two sets share dynamics, initial condition, and initial
    /// time to within `eps`.
    pub(crate) fn same_context(&self, other: &HistorySet, eps: f64) -> bool {
        self.dim() == other.dim()
            && (self.t0 - other.t0).abs() <= eps
            && self
                .hamiltonian
                .as_operator()
                .max_abs_diff(other.hamiltonian.as_operator())
                <= eps
            && self
                .rho
                .as_operator()
                .max_abs_diff(other.rho.as_operator())
                <= eps
    }
}

/// Chain operator for a single history.
pub fn chain_operator(hs: &HistorySet, idx: &HistoryIndex) -> Result<ClassOperator> {
    let matrix = hs.chain_matrix(idx)?;
    let mut members = BTreeSet::new();
    members.insert(idx.clone());
    Ok(ClassOperator { matrix, members })
}

// ---------------------------------------------------------------------------
// ClassOperator
// ---------------------------------------------------------------------------

/// A class operator: the sum of chain operators over a block of histories.
/// A single history is the block of size one.
#[derive(Clone, Debug)]
pub struct ClassOperator {
    matrix: Operator,
    members: BTreeSet<HistoryIndex>,
}

impl ClassOperator {
    pub fn matrix(&self) -> &Operator {
        &self.matrix
    }

    pub fn members(&self) -> &BTreeSet<HistoryIndex> {
        &self.members
    }

    /// Lexicographically first member, used as the class's display handle.
    pub fn representative(&self) -> &HistoryIndex {
        self.members.iter().next().expect("class has members")
    }
}

// ---------------------------------------------------------------------------
// Sum-to-identity diagnostic
// ---------------------------------------------------------------------------

/// Result of checking `sum_alpha C_alpha = 1`.
#[derive(Clone, Debug)]
pub struct SumIdentityReport {
    /// Largest deviation found.
    pub max_deviation: f64,
    /// Per-family deviation of `sum_a Phat^k_a` from the identity.
    pub per_family: Vec<f64>,
    /// Whether the explicit sum over every chain operator was formed. When
    /// false (large dimension or huge index sets), the bound comes from the
    /// per-family sums, which the chain sum telescopes through.
    pub exhaustive: bool,
}

/// Verify that chain operators over the whole set sum to the identity.
pub fn sum_identity_check(hs: &HistorySet) -> Result<SumIdentityReport> {
    let dim = hs.dim();
    let id = Operator::identity(dim);
    let mut per_family = Vec::with_capacity(hs.n_families());
    for f in hs.families() {
        let mut sum = Operator::zeros(dim);
        for p in f.projectors() {
            sum = sum.add(p.as_operator())?;
        }
        per_family.push(sum.max_abs_diff(&id));
    }
    let exhaustive = dim <= 256 && hs.index_count() <= 4096;
    let max_deviation = if exhaustive {
        let mut total = Operator::zeros(dim);
        for idx in hs.indices() {
            total = total.add(&hs.chain_matrix(&idx)?)?;
        }
        total.max_abs_diff(&id)
    } else {
        per_family.iter().cloned().fold(0.0, f64::max)
    };
    Ok(SumIdentityReport {
        max_deviation,
        per_family,
        exhaustive,
    })
}

// ---------------------------------------------------------------------------
// Partition
// ---------------------------------------------------------------------------

/// A partition of a set's histories into disjoint, exhaustive blocks. Block
/// order is preserved as given; members are kept sorted within each block.
#[derive(Clone, Debug)]
pub struct Partition {
    blocks: Vec<Vec<HistoryIndex>>,
}

impl Partition {
    pub fn new(hs: &HistorySet, blocks: Vec<Vec<HistoryIndex>>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for block in &blocks {
            if block.is_empty() {
                return Err(Error::InvalidPartition("empty block".into()));
            }
            for idx in block {
                hs.validate_index(idx)?;
                if !seen.insert(idx.clone()) {
                    return Err(Error::InvalidPartition(format!(
                        "history {idx} appears in more than one block"
                    )));
                }
            }
        }
        let total = hs.index_count();
        if seen.len() != total {
            return Err(Error::InvalidPartition(format!(
                "blocks cover {} of {} histories",
                seen.len(),
                total
            )));
        }
        let blocks = blocks
            .into_iter()
            .map(|mut b| {
                b.sort();
                b
            })
            .collect();
        Ok(Self { blocks })
    }

    /// The identity partition: one block per history.
    pub fn singletons(hs: &HistorySet) -> Self {
        Self {
            blocks: hs.indices().into_iter().map(|i| vec![i]).collect(),
        }
    }

    /// The trivial partition: a single block holding every history.
    pub fn merge_all(hs: &HistorySet) -> Self {
        Self {
            blocks: vec![hs.indices()],
        }
    }

    /// Group histories by their component for family `k` (blocks ordered by
    /// alternative). This is the history-level shadow of ignoring every other
    /// family's outcome.
    pub fn by_component(hs: &HistorySet, k: usize) -> Self {
        let m = hs.family(k).len();
        let mut blocks: Vec<Vec<HistoryIndex>> = vec![Vec::new(); m];
        for idx in hs.indices() {
            blocks[idx.components()[k]].push(idx);
        }
        Self { blocks }
    }

    /// Group histories by the coarse value of component `k` under an
    /// alternative-level grouping: the history-level shadow of a family
    /// coarse graining. Components other than `k` stay distinct, and blocks
    /// come in the index order of the coarse-grained set itself (last
    /// component fastest), so block `b` matches history `b` of
    /// [`coarse_grain_family`] with the same `groups`.
    pub fn by_component_groups(hs: &HistorySet, k: usize, groups: &[Vec<usize>]) -> Result<Self> {
        let m = hs.family(k).len();
        let mut owner = vec![usize::MAX; m];
        for (g, group) in groups.iter().enumerate() {
            for &a in group {
                if a >= m || owner[a] != usize::MAX {
                    return Err(Error::InvalidCoarseGraining(format!(
                        "alternative {a} of family {k} is missing or repeated"
                    )));
                }
                owner[a] = g;
            }
        }
        if owner.iter().any(|&o| o == usize::MAX) {
            return Err(Error::InvalidCoarseGraining(format!(
                "groups do not cover family {k}"
            )));
        }
        // Strides of the coarse index space, last component fastest.
        let sizes: Vec<usize> = (0..hs.n_families())
            .map(|i| if i == k { groups.len() } else { hs.family(i).len() })
            .collect();
        let mut strides = vec![1usize; sizes.len()];
        for i in (0..sizes.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * sizes[i + 1];
        }
        let n_blocks: usize = sizes.iter().product();
        let mut blocks: Vec<Vec<HistoryIndex>> = vec![Vec::new(); n_blocks.max(1)];
        for idx in hs.indices() {
            let pos: usize = idx
                .components()
                .iter()
                .enumerate()
                .map(|(i, &c)| {
                    let coarse = if i == k { owner[c] } else { c };
                    coarse * strides[i]
                })
                .sum();
            blocks[pos].push(idx);
        }
        Ok(Self { blocks })
    }

    pub fn blocks(&self) -> &[Vec<HistoryIndex>] {
        &self.blocks
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }
}

// ---------------------------------------------------------------------------
// Coarse graining
// ---------------------------------------------------------------------------

/// History-level coarse graining: class operators for each partition block,
/// `C_block = sum_{alpha in block} C_alpha`.
pub fn coarse_grain(hs: &HistorySet, partition: &Partition) -> Result<Vec<ClassOperator>> {
    let dim = hs.dim();
    let mut out = Vec::with_capacity(partition.n_blocks());
    for block in partition.blocks() {
        let mut matrix = Operator::zeros(dim);
        for idx in block {
            matrix = matrix.add(&hs.chain_matrix(idx)?)?;
        }
        out.push(ClassOperator {
            matrix,
            members: block.iter().cloned().collect(),
        });
    }
    Ok(out)
}

/// Family-level coarse graining: merge alternatives of family `k` according
/// to `groups` (a partition of `0..family(k).len()`), producing a new history
/// set whose family `k` projectors are the corresponding sums.
pub fn coarse_grain_family(
    hs: &HistorySet,
    k: usize,
    groups: &[Vec<usize>],
) -> Result<HistorySet> {
    if k >= hs.n_families() {
        return Err(Error::InvalidCoarseGraining(format!(
            "family index {k} out of range"
        )));
    }
    let fam = hs.family(k);
    // Reuse the partition validation for coverage/disjointness.
    Partition::by_component_groups(hs, k, groups)?;
    let mut projectors = Vec::with_capacity(groups.len());
    let mut labels = Vec::with_capacity(groups.len());
    for group in groups {
        let parts: Vec<Projector> = group.iter().map(|&a| fam.projector(a).clone()).collect();
        projectors.push(Projector::sum_of_orthogonal(&parts)?);
        labels.push(
            group
                .iter()
                .map(|&a| fam.labels()[a].clone())
                .collect::<Vec<_>>()
                .join("+"),
        );
    }
    let mut families = hs.families().to_vec();
    // Sums of a validated exclusive family stay exhaustive and exclusive.
    families[k] = ScheduledFamily::new_unchecked(fam.time(), projectors, labels);
    HistorySet::new(
        hs.hamiltonian().clone(),
        hs.t0(),
        hs.rho().clone(),
        families,
    )
}

/// True iff `a` is a coarse graining of `b`: same dynamical context, and each
/// of `a`'s families lives at a time carrying a family of `b` whose
/// projectors sum (in subsets) to `a`'s projectors.
pub fn is_coarse_graining_of(a: &HistorySet, b: &HistorySet) -> bool {
    if !a.same_context(b, TIME_EPS) {
        return false;
    }
    'fams: for fa in a.families() {
        for fb in b.families() {
            if (fa.time() - fb.time()).abs() > TIME_EPS {
                continue;
            }
            if family_is_sum_of(fa, fb) {
                continue 'fams;
            }
        }
        return false;
    }
    true
}

/// Each projector of `fa` must equal the sum of the `fb` projectors it
/// contains (P contains Q iff PQ = Q), and those subsets must tile `fb`.
fn family_is_sum_of(fa: &ScheduledFamily, fb: &ScheduledFamily) -> bool {
    let dim = fa.dim();
    let mut used = vec![false; fb.len()];
    for p in fa.projectors() {
        let mut sum = Operator::zeros(dim);
        for (j, q) in fb.projectors().iter().enumerate() {
            let pq = match p.as_operator().matmul(q.as_operator()) {
                Ok(m) => m,
                Err(_) => return false,
            };
            if pq.max_abs_diff(q.as_operator()) <= tol::ETA_HERM * 10.0 {
                if used[j] {
                    return false;
                }
                used[j] = true;
                sum = match sum.add(q.as_operator()) {
                    Ok(m) => m,
                    Err(_) => return false,
                };
            }
        }
        if sum.max_abs_diff(p.as_operator()) > tol::ETA_HERM * 10.0 {
            return false;
        }
    }
    used.iter().all(|&u| u)
}

// ---------------------------------------------------------------------------
// Time reassignment
// ---------------------------------------------------------------------------

/// Re-schedule the families at new times, keeping the stored
/// Schrodinger-picture projectors fixed. With a nonzero Hamiltonian this
/// changes the Heisenberg chains (and hence the decoherence matrix).
pub fn reassign_times(hs: &HistorySet, new_times: &[f64]) -> Result<HistorySet> {
    if new_times.len() != hs.n_families() {
        return Err(Error::DimensionMismatch {
            left: new_times.len(),
            right: hs.n_families(),
        });
    }
    let families = hs
        .families()
        .iter()
        .zip(new_times.iter())
        .map(|(f, &t)| f.at_time(t))
        .collect();
    HistorySet::new(hs.hamiltonian().clone(), hs.t0(), hs.rho().clone(), families)
}

/// Re-schedule the families at new times, keeping the *Heisenberg* operators
/// fixed: the stored projectors are re-derived so that each family's
/// Heisenberg projector at its new time equals the old one. The decoherence
/// matrix is invariant under this operation; Schrodinger-picture quantities
/// (formal probabilities, their entropy) generally are not.
pub fn reassign_times_fixed_heisenberg(hs: &HistorySet, new_times: &[f64]) -> Result<HistorySet> {
    if new_times.len() != hs.n_families() {
        return Err(Error::DimensionMismatch {
            left: new_times.len(),
            right: hs.n_families(),
        });
    }
    let mut families = Vec::with_capacity(hs.n_families());
    for (k, (f, &t_new)) in hs.families().iter().zip(new_times.iter()).enumerate() {
        let _ = k;
        // Phat' = e^{-iH(t'-t)} Phat e^{iH(t'-t)}.
        let w = hs.propagator_matrix(t_new - f.time());
        families.push(f.conjugated(&w, t_new)?);
    }
    HistorySet::new(hs.hamiltonian().clone(), hs.t0(), hs.rho().clone(), families)
}
