//! Bundled example systems with independently known diagnostics.
//!
//! Each constructor returns a [`ModelBundle`]: a ready-to-analyze history
//! set, a map of expected diagnostic values with a note on how each was
//! derived, and (where the physics provides them) explicit record
//! projectors. Constructors self-check their own invariants and refuse
//! parameters outside the supported ranges.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::history::{HistorySet, ScheduledFamily};
use crate::operator::{
    propagator, tensor, C64, DensityMatrix, HermitianOperator, Operator, Projector, StateVector,
};
use crate::records::{ComplementPolicy, RecordSet};
use crate::tol;

/// An expected diagnostic value together with the independent reasoning
/// that produced it.
#[derive(Clone, Copy, Debug)]
pub struct Expected {
    pub value: f64,
    pub oracle: &'static str,
}

/// A model system packaged with its known answers.
#[derive(Clone, Debug)]
pub struct ModelBundle {
    pub set: HistorySet,
    pub expected: BTreeMap<String, Expected>,
    pub records: Option<RecordSet>,
}

fn qubit_z() -> [Projector; 2] {
    crate::operator::qubit_z_projectors()
}

fn qubit_x() -> [Projector; 2] {
    crate::operator::qubit_x_projectors()
}

// ---------------------------------------------------------------------------
// Two-slit-with-apparatus measurement model
// ---------------------------------------------------------------------------

/// A qubit measured in the z basis and then in the x basis, each outcome
/// copied into its own two-level apparatus (dimension 8 total).
///
/// The copying steps are generated by projector Hamiltonians acting over
/// unit time: `exp(-i pi P)` flips the target apparatus exactly on the
/// flagged subspace. All dynamics is folded into the projectors (the set's
/// own Hamiltonian is zero), so the two measured families address
/// noncommuting system observables while the apparatus pointers record both
/// outcomes orthogonally: the set decoheres exactly with probabilities
/// `|a|^2/2, |a|^2/2, |b|^2/2, |b|^2/2`.
pub fn measurement_model(a: C64, b: C64) -> Result<ModelBundle> {
    let norm = a.norm_sqr() + b.norm_sqr();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidModelParams(format!(
            "|a|^2 + |b|^2 = {norm}, expected 1"
        )));
    }
    let [pz0, pz1] = qubit_z();
    let [px, pmx] = qubit_x();
    let id2 = Projector::identity(2);

    // Copy step 1: flip apparatus 1 when the system is in |1>.
    let flag_z = pz1.tensor(&Projector::from_state(&minus_state())).tensor(&id2);
    let gen_z = flag_z
        .as_operator()
        .scale(C64::new(std::f64::consts::PI, 0.0));
    let e1 = propagator(&HermitianOperator::symmetrize(gen_z), 1.0)?;
    // Copy step 2: flip apparatus 2 when the system is in |->.
    let flag_x = Projector::from_state(&minus_state())
        .tensor(&id2)
        .tensor(&Projector::from_state(&minus_state()));
    let gen_x = flag_x
        .as_operator()
        .scale(C64::new(std::f64::consts::PI, 0.0));
    let e2 = propagator(&HermitianOperator::symmetrize(gen_x), 1.0)?.matmul(&e1)?;

    for (name, u) in [("e1", &e1), ("e2", &e2)] {
        let dev = u.unitarity_deviation();
        if dev > 1e-12 {
            return Err(Error::ModelSelfCheck(format!(
                "copy step {name} not unitary: deviation {dev:.3e}"
            )));
        }
    }

    // Families in the all-dynamics-in-the-operators picture.
    let sys_z: Vec<Projector> = [pz0.clone(), pz1.clone()]
        .iter()
        .map(|p| {
            p.tensor(&id2)
                .tensor(&id2)
                .conjugate_unitary(&e1.adjoint())
        })
        .collect::<Result<_>>()?;
    let sys_x: Vec<Projector> = [px.clone(), pmx.clone()]
        .iter()
        .map(|p| {
            p.tensor(&id2)
                .tensor(&id2)
                .conjugate_unitary(&e2.adjoint())
        })
        .collect::<Result<_>>()?;
    // The z copy commutes with the z projectors, so family 1 is untouched.
    let plain_z = pz0.tensor(&id2).tensor(&id2);
    if sys_z[0]
        .as_operator()
        .max_abs_diff(plain_z.as_operator())
        > 1e-12
    {
        return Err(Error::ModelSelfCheck(
            "z family should commute with its own copy step".into(),
        ));
    }

    let fam1 = ScheduledFamily::with_labels(
        1.0,
        sys_z.clone(),
        vec!["0".into(), "1".into()],
    )?;
    let fam2 = ScheduledFamily::with_labels(
        2.0,
        sys_x.clone(),
        vec!["+".into(), "-".into()],
    )?;

    // Pointer observables read at the end of the evolution.
    let q1: Vec<Projector> = [pz0.clone(), pz1.clone()]
        .iter()
        .map(|p| id2.tensor(p).tensor(&id2).conjugate_unitary(&e2.adjoint()))
        .collect::<Result<_>>()?;
    // Apparatus 2 shows 0 for "+" and 1 for "-".
    let q2: Vec<Projector> = [pz0.clone(), pz1.clone()]
        .iter()
        .map(|p| id2.tensor(&id2).tensor(p).conjugate_unitary(&e2.adjoint()))
        .collect::<Result<_>>()?;
    for s in 0..2 {
        for m in 0..2 {
            let comm = crate::operator::commutator(q1[s].as_operator(), q2[m].as_operator())?;
            if comm.max_norm() > 1e-12 {
                return Err(Error::ModelSelfCheck(
                    "pointer projectors must commute".into(),
                ));
            }
        }
    }

    let psi_sys = StateVector::new(Array1::from_vec(vec![a, b])).map_err(|_| {
        Error::InvalidModelParams("system amplitudes do not normalize".into())
    })?;
    let zero = StateVector::basis_state(2, 0);
    let psi = psi_sys.tensor(&zero).tensor(&zero);

    let hs = HistorySet::new(
        HermitianOperator::zero(8),
        0.0,
        DensityMatrix::pure(&psi),
        vec![fam1, fam2],
    )?;

    // Joint pointer records, one per history.
    let mut record_projs = Vec::new();
    for s in 0..2 {
        for x in 0..2 {
            let m = x; // "+" leaves apparatus 2 at 0, "-" flips it to 1
            let prod = q1[s]
                .as_operator()
                .matmul(q2[m].as_operator())?;
            record_projs.push(Projector::with_tolerance(prod, 1e-10)?);
        }
    }
    let records = RecordSet::new(hs.indices(), record_projs, ComplementPolicy::ToVanishing)?;

    let strong = crate::records::check_strong(&hs, &records)?;
    if strong.residual > 1e-10 {
        return Err(Error::ModelSelfCheck(format!(
            "pointer records fail the chain identity: residual {:.3e}",
            strong.residual
        )));
    }
    let noncomm = crate::operator::commutator(sys_z[0].as_operator(), sys_x[0].as_operator())?
        .max_norm();
    if noncomm < 0.1 {
        return Err(Error::ModelSelfCheck(format!(
            "measured families unexpectedly commute: {noncomm:.3e}"
        )));
    }

    let pa = a.norm_sqr();
    let pb = b.norm_sqr();
    let mut expected = BTreeMap::new();
    let halves = [
        ("p[0|+]", pa / 2.0),
        ("p[0|-]", pa / 2.0),
        ("p[1|+]", pb / 2.0),
        ("p[1|-]", pb / 2.0),
    ];
    for (k, v) in halves {
        expected.insert(
            k.to_string(),
            Expected {
                value: v,
                oracle: "z amplitude squared, halved by the unbiased x readout",
            },
        );
    }
    expected.insert(
        "strong_residual".into(),
        Expected {
            value: 0.0,
            oracle: "pointer projectors reproduce the chains exactly",
        },
    );
    expected.insert(
        "noncommutativity".into(),
        Expected {
            value: 0.5,
            oracle: "[P_z, P_x] on a qubit has largest entry 1/2",
        },
    );
    Ok(ModelBundle {
        set: hs,
        expected,
        records: Some(records),
    })
}

fn minus_state() -> StateVector {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    StateVector::new(Array1::from_vec(vec![C64::new(s, 0.0), C64::new(-s, 0.0)])).unwrap()
}

// ---------------------------------------------------------------------------
// Environment decoherence model
// ---------------------------------------------------------------------------

/// A qubit coupled to `n_env` environment qubits, probed in the z basis at
/// t = 1 and the x basis at t = 2.
///
/// The coupling `H = |1><1| (x) sum_j (theta/4) Y_j` rotates every
/// environment qubit conditionally on the system, so by t = 2 the two
/// z branches drag environment states with single-qubit overlap
/// `cos(theta/2)`. The largest normalized overlap between branches is
/// exactly `|cos(theta/2)|^n_env`: decoherence improves exponentially with
/// environment size and is exact at theta = pi.
pub fn environment_model(n_env: usize, theta: f64) -> Result<ModelBundle> {
    if n_env > 10 {
        return Err(Error::InvalidModelParams(format!(
            "n_env = {n_env} exceeds the supported maximum of 10"
        )));
    }
    if !(theta > 0.0 && theta <= std::f64::consts::PI + 1e-12) {
        return Err(Error::InvalidModelParams(format!(
            "theta = {theta} outside (0, pi]"
        )));
    }
    let d_env = 1usize << n_env;

    let y = crate::operator::pauli_y();
    let mut coupling = Operator::zeros(d_env);
    for j in 0..n_env {
        let left = Operator::identity(1 << j);
        let right = Operator::identity(1 << (n_env - 1 - j));
        let term = tensor(&tensor(&left, y.as_operator()), &right);
        coupling = coupling.add(&term)?;
    }
    let [_, pz1] = qubit_z();
    let h_full = tensor(
        pz1.as_operator(),
        &coupling.scale(C64::new(theta / 4.0, 0.0)),
    );
    let h = HermitianOperator::symmetrize(h_full);

    let id_env = Projector::identity(d_env);
    let [pz0, pz1] = qubit_z();
    let [px, pmx] = qubit_x();
    let fam_z = ScheduledFamily::new_unchecked(
        1.0,
        vec![pz0.tensor(&id_env), pz1.tensor(&id_env)],
        vec!["0".into(), "1".into()],
    );
    let fam_x = ScheduledFamily::new_unchecked(
        2.0,
        vec![px.tensor(&id_env), pmx.tensor(&id_env)],
        vec!["+".into(), "-".into()],
    );

    let s = std::f64::consts::FRAC_1_SQRT_2;
    let plus = StateVector::new(Array1::from_vec(vec![C64::new(s, 0.0), C64::new(s, 0.0)]))
        .unwrap();
    let env0 = StateVector::basis_state(d_env, 0);
    let psi = plus.tensor(&env0);

    let hs = HistorySet::new(h, 0.0, DensityMatrix::pure(&psi), vec![fam_z, fam_x])?;

    let overlap = (theta / 2.0).cos().abs().powi(n_env as i32);
    let mut expected = BTreeMap::new();
    expected.insert(
        "normalized_overlap".into(),
        Expected {
            value: overlap,
            oracle: "product of per-qubit overlaps cos(theta/2)",
        },
    );
    for k in ["p[0|+]", "p[0|-]", "p[1|+]", "p[1|-]"] {
        expected.insert(
            k.to_string(),
            Expected {
                value: 0.25,
                oracle: "|<s|+>|^2 |<x|s>|^2 = 1/4; the environment shifts nothing on the diagonal",
            },
        );
    }
    Ok(ModelBundle {
        set: hs,
        expected,
        records: None,
    })
}

// ---------------------------------------------------------------------------
// Random ensembles
// ---------------------------------------------------------------------------

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn random_hermitian(rng: &mut ChaCha8Rng, dim: usize) -> HermitianOperator {
    let a = Array2::from_shape_fn((dim, dim), |_| {
        C64::new(gaussian(rng), gaussian(rng)) / 2f64.sqrt()
    });
    let at = a.t().mapv(|z| z.conj());
    let sym = (&a + &at).mapv(|z| z / 2.0);
    HermitianOperator::symmetrize(Operator::new(sym).expect("finite by construction"))
}

/// Reproducible random history set: Gaussian-ensemble Hamiltonian, a pure or
/// Wishart-mixed state, and 1 to 3 projective families obtained by slicing
/// the eigenbases of further random Hermitian operators into contiguous
/// blocks. Identical arguments always produce the identical set.
pub fn random_model(seed: u64, dim: usize, n_times: usize) -> Result<ModelBundle> {
    if !(2..=16).contains(&dim) {
        return Err(Error::InvalidModelParams(format!(
            "dim = {dim} outside 2..=16"
        )));
    }
    if !(1..=3).contains(&n_times) {
        return Err(Error::InvalidModelParams(format!(
            "n_times = {n_times} outside 1..=3"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = random_hermitian(&mut rng, dim);

    let rho = if rng.gen_bool(0.5) {
        let amps = Array1::from_shape_fn(dim, |_| C64::new(gaussian(&mut rng), gaussian(&mut rng)));
        let psi = StateVector::from_unnormalized(amps)?;
        DensityMatrix::pure(&psi)
    } else {
        let w = Array2::from_shape_fn((dim, dim), |_| {
            C64::new(gaussian(&mut rng), gaussian(&mut rng))
        });
        let wt = w.t().mapv(|z| z.conj());
        let m = w.dot(&wt);
        let tr: C64 = (0..dim).map(|i| m[(i, i)]).sum();
        DensityMatrix::new(Operator::new(m.mapv(|z| z / tr.re))?)?
    };

    let mut times: Vec<f64> = (0..n_times).map(|_| rng.gen_range(0.5..3.0)).collect();
    times.sort_by(f64::total_cmp);
    for i in 1..times.len() {
        if times[i] - times[i - 1] < 1e-6 {
            times[i] = times[i - 1] + 0.1;
        }
    }

    let mut families = Vec::with_capacity(n_times);
    for &t in &times {
        let basis = random_hermitian(&mut rng, dim).eig()?;
        let vecs = &basis.eigenvectors;
        let max_blocks = dim.min(4);
        let n_blocks = rng.gen_range(2..=max_blocks);
        // Contiguous eigenvector blocks: choose distinct interior cuts.
        let mut cuts: Vec<usize> = Vec::new();
        while cuts.len() < n_blocks - 1 {
            let c = rng.gen_range(1..dim);
            if !cuts.contains(&c) {
                cuts.push(c);
            }
        }
        cuts.sort_unstable();
        let mut bounds = vec![0usize];
        bounds.extend(cuts);
        bounds.push(dim);
        let mut projectors = Vec::new();
        for w in bounds.windows(2) {
            let cols = vecs.slice(ndarray::s![.., w[0]..w[1]]).to_owned();
            projectors.push(Projector::from_orthonormal_columns(&cols)?);
        }
        let labels = (0..projectors.len()).map(|i| i.to_string()).collect();
        families.push(ScheduledFamily::new_unchecked(t, projectors, labels));
    }
    let hs = HistorySet::new(h, 0.0, rho, families)?;
    Ok(ModelBundle {
        set: hs,
        expected: BTreeMap::new(),
        records: None,
    })
}

// ---------------------------------------------------------------------------
// Unitary transport
// ---------------------------------------------------------------------------

/// Conjugate a whole set by a unitary: the state becomes `U rho U^dag` and
/// each family is rewritten so that its Heisenberg projectors are exactly
/// the originals conjugated by `U`. The decoherence functional is invariant;
/// state-independent diagnostics built from the stored projectors move
/// unless `U` commutes with the dynamics.
pub fn unitary_transport(hs: &HistorySet, u: &Operator) -> Result<HistorySet> {
    if u.dim() != hs.dim() {
        return Err(Error::DimensionMismatch {
            left: hs.dim(),
            right: u.dim(),
        });
    }
    let dev = u.unitarity_deviation();
    if dev > tol::ETA_HERM {
        return Err(Error::NotUnitary {
            deviation: dev,
            tolerance: tol::ETA_HERM,
        });
    }
    let rho = hs.rho().conjugate_unitary(u)?;
    let mut families = Vec::with_capacity(hs.n_families());
    for fam in hs.families() {
        let dt = fam.time() - hs.t0();
        let prop = hs.propagator_matrix(dt);
        // W(t) = e^{-iH dt} U e^{iH dt} turns stored-picture conjugation
        // into Heisenberg-picture conjugation by U.
        let w = prop.matmul(u)?.matmul(&prop.adjoint())?;
        families.push(fam.conjugated(&w, fam.time())?);
    }
    HistorySet::new(hs.hamiltonian().clone(), hs.t0(), rho, families)
}

// ---------------------------------------------------------------------------
// Alternating-basis demo set
// ---------------------------------------------------------------------------

/// Qubit under `H = field * sigma_y` probed z, x, z at t = 1, 2, 3 from
/// |+>. The stored chains run over mutually unbiased bases, so every formal
/// probability is 1/8 and the set entropy is exactly `3 ln 2`, independent
/// of `field`. Time reassignment diagnostics are sharpest here: holding the
/// stored projectors fixed keeps the entropy pinned, holding the Heisenberg
/// operators fixed moves it whenever `field != 0`.
pub fn zxz_model(field: f64) -> Result<ModelBundle> {
    if !field.is_finite() {
        return Err(Error::InvalidModelParams(format!(
            "field = {field} is not finite"
        )));
    }
    let h = HermitianOperator::symmetrize(
        crate::operator::pauli_y()
            .as_operator()
            .scale(C64::new(field, 0.0)),
    );
    let [pz0, pz1] = qubit_z();
    let [px, pmx] = qubit_x();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let plus = StateVector::new(Array1::from_vec(vec![C64::new(s, 0.0), C64::new(s, 0.0)]))
        .unwrap();
    let hs = HistorySet::new(
        h,
        0.0,
        DensityMatrix::pure(&plus),
        vec![
            ScheduledFamily::with_labels(1.0, vec![pz0.clone(), pz1.clone()], vec!["0".into(), "1".into()])?,
            ScheduledFamily::with_labels(2.0, vec![px, pmx], vec!["+".into(), "-".into()])?,
            ScheduledFamily::with_labels(3.0, vec![pz0, pz1], vec!["0".into(), "1".into()])?,
        ],
    )?;
    let mut expected = BTreeMap::new();
    expected.insert(
        "s_hat".into(),
        Expected {
            value: 3.0 * std::f64::consts::LN_2,
            oracle: "eight chains of equal weight across mutually unbiased bases",
        },
    );
    expected.insert(
        "sum_q".into(),
        Expected {
            value: 1.0,
            oracle: "pinching the identity through exhaustive families",
        },
    );
    Ok(ModelBundle {
        set: hs,
        expected,
        records: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classicality::{formal_probabilities, s_hat};
    use crate::decoherence::{classify, decoherence_matrix, probabilities, DecoherenceLevel};
    use crate::records::{check_strong, implication_chain_report, is_full, TriState};
    use approx::assert_abs_diff_eq;

    #[test]
    fn measurement_model_matches_permutation_oracle() {
        // Independent construction of the copy unitaries: explicit
        // controlled flips on computational and x bases.
        let dim = 8;
        let idx = |s: usize, a1: usize, a2: usize| s * 4 + a1 * 2 + a2;
        let mut cnot_z = Array2::<C64>::zeros((dim, dim));
        for s in 0..2 {
            for a1 in 0..2 {
                for a2 in 0..2 {
                    cnot_z[(idx(s, a1 ^ s, a2), idx(s, a1, a2))] = C64::new(1.0, 0.0);
                }
            }
        }
        // Controlled-on-|-> flip of apparatus 2.
        let [px, pmx] = qubit_x();
        let id2 = Operator::identity(2);
        let sx = crate::operator::pauli_x();
        let ctrl_x = tensor(&tensor(pmx.as_operator(), &id2), sx.as_operator())
            .add(&tensor(
                &tensor(px.as_operator(), &id2),
                &Operator::identity(2),
            ))
            .unwrap();
        let e2_oracle = ctrl_x.matmul(&Operator::new(cnot_z).unwrap()).unwrap();

        let a = C64::new(0.6, 0.0);
        let b = C64::from_polar(0.8, std::f64::consts::PI / 7.0);
        let bundle = measurement_model(a, b).unwrap();

        // The model's second family must equal the x projectors dragged
        // back through the oracle unitary.
        let [pxs, _] = qubit_x();
        let expected_fam2 = tensor(
            &tensor(pxs.as_operator(), &id2),
            &Operator::identity(2),
        );
        let dragged = e2_oracle
            .adjoint()
            .matmul(&expected_fam2)
            .unwrap()
            .matmul(&e2_oracle)
            .unwrap();
        let got = bundle.set.family(1).projector(0).as_operator().clone();
        assert!(got.max_abs_diff(&dragged) < 1e-12);

        // Probabilities against the amplitude bookkeeping.
        let d = decoherence_matrix(&bundle.set).unwrap();
        let p = probabilities(&d).unwrap();
        let pa = a.norm_sqr();
        let pb = b.norm_sqr();
        let want = [pa / 2.0, pa / 2.0, pb / 2.0, pb / 2.0];
        for (got, want) in p.values().iter().zip(want) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-10);
        }
        for (label, e) in &bundle.expected {
            if let Some(idx) = p
                .labels()
                .iter()
                .position(|l| format!("p[{l}]") == *label)
            {
                assert_abs_diff_eq!(p.values()[idx], e.value, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn measurement_model_records_are_strong_but_set_is_not_full() {
        let a = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let bundle = measurement_model(a, a).unwrap();
        let records = bundle.records.as_ref().unwrap();
        let rep = check_strong(&bundle.set, records).unwrap();
        assert!(rep.strong);
        assert!(rep.residual < 1e-10);
        let chain = implication_chain_report(&bundle.set, Some(records)).unwrap();
        assert!(chain.weak && chain.medium);
        assert_eq!(chain.strong, TriState::True);
        // Rank-2 records in dimension 8: strongly decoherent but not full.
        let fullness = is_full(&bundle.set).unwrap();
        assert!(!fullness.full);
        assert_eq!(fullness.nonvanishing, 4);
        assert_eq!(fullness.dim, 8);
        // The measured observables genuinely fail to commute.
        assert!(bundle.expected["noncommutativity"].value >= 0.1);
    }

    #[test]
    fn measurement_model_rejects_unnormalized_amplitudes() {
        let one = C64::new(1.0, 0.0);
        assert!(matches!(
            measurement_model(one, one),
            Err(Error::InvalidModelParams(_))
        ));
    }

    #[test]
    fn environment_overlap_is_a_qubit_product() {
        let theta = std::f64::consts::PI / 4.0;
        let bundle = environment_model(3, theta).unwrap();
        let d = decoherence_matrix(&bundle.set).unwrap();
        let cls = classify(&d, tol::DECOHERENCE);
        let max_ov = cls.max_offdiag_overlap();
        let want = (theta / 2.0).cos().powi(3);
        assert_abs_diff_eq!(max_ov, want, epsilon = 1e-10);
        assert_abs_diff_eq!(
            bundle.expected["normalized_overlap"].value,
            want,
            epsilon = 1e-15
        );
        assert_eq!(cls.level, DecoherenceLevel::None);
        // Diagonal unaffected by the environment.
        let p_diag: Vec<f64> = (0..4).map(|i| d.entry(i, i).re).collect();
        for v in p_diag {
            assert_abs_diff_eq!(v, 0.25, epsilon = 1e-10);
        }
    }

    #[test]
    fn environment_at_theta_pi_decoheres_exactly() {
        let bundle = environment_model(1, std::f64::consts::PI).unwrap();
        let d = decoherence_matrix(&bundle.set).unwrap();
        let cls = classify(&d, tol::DECOHERENCE);
        assert_eq!(cls.level, DecoherenceLevel::Medium);
        let p = probabilities(&d).unwrap();
        for v in p.values() {
            assert_abs_diff_eq!(*v, 0.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn environment_with_no_qubits_interferes_fully() {
        let bundle = environment_model(0, std::f64::consts::PI / 2.0).unwrap();
        assert_eq!(bundle.set.dim(), 2);
        let d = decoherence_matrix(&bundle.set).unwrap();
        let cls = classify(&d, tol::DECOHERENCE);
        assert_eq!(cls.level, DecoherenceLevel::None);
        assert_abs_diff_eq!(cls.max_offdiag_overlap(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn environment_model_rejects_bad_params() {
        assert!(matches!(
            environment_model(11, 1.0),
            Err(Error::InvalidModelParams(_))
        ));
        assert!(matches!(
            environment_model(2, 0.0),
            Err(Error::InvalidModelParams(_))
        ));
        assert!(matches!(
            environment_model(2, 4.0),
            Err(Error::InvalidModelParams(_))
        ));
    }

    #[test]
    fn random_model_is_reproducible_and_well_formed() {
        let b1 = random_model(42, 5, 2).unwrap();
        let b2 = random_model(42, 5, 2).unwrap();
        let d1 = decoherence_matrix(&b1.set).unwrap();
        let d2 = decoherence_matrix(&b2.set).unwrap();
        for (x, y) in d1.entries().iter().zip(d2.entries().iter()) {
            assert_eq!(x, y, "same seed must reproduce the functional exactly");
        }
        let q = formal_probabilities(&b1.set).unwrap();
        let total: f64 = q.iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);

        let b3 = random_model(43, 5, 2).unwrap();
        let d3 = decoherence_matrix(&b3.set).unwrap();
        let same = d1
            .entries()
            .iter()
            .zip(d3.entries().iter())
            .all(|(x, y)| x == y);
        assert!(!same, "different seeds should differ");
    }

    #[test]
    fn random_model_rejects_bad_params() {
        assert!(matches!(
            random_model(0, 1, 1),
            Err(Error::InvalidModelParams(_))
        ));
        assert!(matches!(
            random_model(0, 17, 1),
            Err(Error::InvalidModelParams(_))
        ));
        assert!(matches!(
            random_model(0, 4, 0),
            Err(Error::InvalidModelParams(_))
        ));
        assert!(matches!(
            random_model(0, 4, 4),
            Err(Error::InvalidModelParams(_))
        ));
    }

    #[test]
    fn transport_preserves_functional_and_moves_set_entropy() {
        let bundle = zxz_model(1.0).unwrap();
        // Generic unitary with no special alignment to the families or H.
        let u = propagator(&HermitianOperator::symmetrize(
            crate::operator::pauli_x().as_operator().scale(C64::new(0.7, 0.0)),
        ), 1.0)
        .unwrap()
        .matmul(
            &propagator(&HermitianOperator::symmetrize(
                crate::operator::pauli_z().as_operator().scale(C64::new(0.4, 0.0)),
            ), 1.0)
            .unwrap(),
        )
        .unwrap();
        let moved = unitary_transport(&bundle.set, &u).unwrap();
        let d0 = decoherence_matrix(&bundle.set).unwrap();
        let d1 = decoherence_matrix(&moved).unwrap();
        for (x, y) in d0.entries().iter().zip(d1.entries().iter()) {
            assert!((x - y).norm() < 1e-10, "functional must be invariant");
        }
        let s0 = s_hat(&bundle.set).unwrap();
        let s1 = s_hat(&moved).unwrap();
        assert!(
            (s0 - s1).abs() > 1e-3,
            "set entropy should move under a generic transport: {s0} vs {s1}"
        );
        // A transport that commutes with the dynamics keeps it fixed.
        let u_comm = propagator(bundle.set.hamiltonian(), 0.77).unwrap();
        let fixed = unitary_transport(&bundle.set, &u_comm).unwrap();
        assert_abs_diff_eq!(s_hat(&fixed).unwrap(), s0, epsilon = 1e-10);
    }

    #[test]
    fn transport_rejects_non_unitaries() {
        let bundle = zxz_model(0.0).unwrap();
        let bad = Operator::identity(2).scale(C64::new(2.0, 0.0));
        assert!(matches!(
            unitary_transport(&bundle.set, &bad),
            Err(Error::NotUnitary { .. })
        ));
    }

    #[test]
    fn zxz_expectations_hold() {
        let bundle = zxz_model(1.3).unwrap();
        let s = s_hat(&bundle.set).unwrap();
        assert_abs_diff_eq!(s, bundle.expected["s_hat"].value, epsilon = 1e-12);
        let q = formal_probabilities(&bundle.set).unwrap();
        let total: f64 = q.iter().sum();
        assert_abs_diff_eq!(total, bundle.expected["sum_q"].value, epsilon = 1e-12);
        assert!(matches!(zxz_model(f64::NAN), Err(Error::InvalidModelParams(_))));
    }
}
