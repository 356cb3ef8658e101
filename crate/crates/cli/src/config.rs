//! Configuration documents and their conversion into an analyzable problem.
//!
//! A document either references a built-in model by name or spells out the
//! system explicitly: dimension (or qubit count), Hamiltonian, initial state,
//! and a schedule of projector families. Complex scalars are `[re, im]`
//! pairs; matrices are flat row-major lists of such pairs.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

use ndarray::{Array1, Array2};
use serde::Deserialize;

use decohist_core::{
    environment_model, measurement_model, random_model, zxz_model, C64, DensityMatrix,
    HermitianOperator, HistorySet, Operator, Projector, RecordSet, ScheduledFamily, StateVector,
};

use crate::CliError;

/// A complex entry as serialized: `[re, im]`.
pub type Pair = [f64; 2];

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    /// Built-in model reference; mutually exclusive with the explicit fields.
    #[serde(default)]
    pub model: Option<ModelRef>,
    #[serde(default)]
    pub dimension: Option<usize>,
    /// Number of qubit factors; the dimension is 2^qubit_factors.
    #[serde(default)]
    pub qubit_factors: Option<u32>,
    /// Flat row-major dimension^2 list of [re, im] pairs.
    #[serde(default)]
    pub hamiltonian: Option<Vec<Pair>>,
    #[serde(default)]
    pub t0: Option<f64>,
    /// `"ind"`, `{"vector": [...]}`, or `{"density": [...]}`.
    #[serde(default)]
    pub initial_state: Option<InitialState>,
    #[serde(default)]
    pub families: Option<Vec<FamilyConfig>>,
    #[serde(default)]
    pub tolerances: Option<Tolerances>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub commands: Option<Vec<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelRef {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, ParamValue>,
}

/// Model parameters arrive either as plain numbers or as [re, im] pairs.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Real(f64),
    Complex(Pair),
}

impl ParamValue {
    pub fn as_complex(self) -> C64 {
        match self {
            ParamValue::Real(x) => C64::new(x, 0.0),
            ParamValue::Complex([re, im]) => C64::new(re, im),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum InitialState {
    Tag(String),
    Vector(VectorState),
    Density(DensityState),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorState {
    pub vector: Vec<Pair>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityState {
    pub density: Vec<Pair>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub time: f64,
    /// Explicit projector matrices, flat row-major.
    #[serde(default)]
    pub projectors: Option<Vec<Vec<Pair>>>,
    /// Named basis alternative; currently `"computational"`.
    #[serde(default)]
    pub basis: Option<String>,
    /// Grouping of basis indices into coarse alternatives; defaults to
    /// singletons. Only meaningful together with `basis`.
    #[serde(default)]
    pub groups: Option<Vec<Vec<usize>>>,
    #[serde(default)]
    pub labels: Option<Vec<String>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default)]
    pub decoherence: Option<f64>,
    #[serde(default)]
    pub solver: Option<f64>,
}

/// Everything the command pipeline needs, whether it came from a config file
/// or a model reference.
pub struct BuiltProblem {
    pub set: HistorySet,
    /// Records supplied by a model constructor, used instead of extraction.
    pub records: Option<RecordSet>,
    pub source: String,
    pub seed: Option<u64>,
}

fn to_matrix(flat: &[Pair], dim: usize, what: &str) -> Result<Array2<C64>, CliError> {
    if flat.len() != dim * dim {
        return Err(CliError::Validation(format!(
            "{what}: expected {} row-major [re, im] entries for dimension {dim}, got {}",
            dim * dim,
            flat.len()
        )));
    }
    let data: Vec<C64> = flat.iter().map(|&[re, im]| C64::new(re, im)).collect();
    Array2::from_shape_vec((dim, dim), data)
        .map_err(|e| CliError::Validation(format!("{what}: {e}")))
}

fn to_vector(flat: &[Pair], dim: usize, what: &str) -> Result<Array1<C64>, CliError> {
    if flat.len() != dim {
        return Err(CliError::Validation(format!(
            "{what}: expected {dim} [re, im] entries, got {}",
            flat.len()
        )));
    }
    Ok(Array1::from_vec(
        flat.iter().map(|&[re, im]| C64::new(re, im)).collect(),
    ))
}

fn validation(e: decohist_core::Error) -> CliError {
    CliError::Validation(e.to_string())
}

fn build_family(family: &FamilyConfig, dim: usize) -> Result<ScheduledFamily, CliError> {
    let projectors: Vec<Projector> = match (&family.projectors, &family.basis) {
        (Some(mats), None) => {
            if family.groups.is_some() {
                return Err(CliError::Parse(
                    "family key 'groups' is only valid together with 'basis'".into(),
                ));
            }
            mats.iter()
                .enumerate()
                .map(|(i, m)| {
                    let arr = to_matrix(m, dim, &format!("family projector {i}"))?;
                    let op = Operator::new(arr).map_err(validation)?;
                    Projector::new(op).map_err(validation)
                })
                .collect::<Result<_, _>>()?
        }
        (None, Some(name)) => {
            if name != "computational" {
                return Err(CliError::Parse(format!(
                    "unknown basis '{name}' (supported: computational)"
                )));
            }
            let groups: Vec<Vec<usize>> = family
                .groups
                .clone()
                .unwrap_or_else(|| (0..dim).map(|i| vec![i]).collect());
            let mut seen = vec![false; dim];
            for g in &groups {
                for &i in g {
                    if i >= dim {
                        return Err(CliError::Validation(format!(
                            "basis group index {i} exceeds dimension {dim}"
                        )));
                    }
                    if seen[i] {
                        return Err(CliError::Validation(format!(
                            "basis group index {i} repeats across groups"
                        )));
                    }
                    seen[i] = true;
                }
            }
            groups
                .iter()
                .map(|g| {
                    let mut arr = Array2::<C64>::zeros((dim, dim));
                    for &i in g {
                        arr[[i, i]] = C64::new(1.0, 0.0);
                    }
                    let op = Operator::new(arr).map_err(validation)?;
                    Projector::new(op).map_err(validation)
                })
                .collect::<Result<_, _>>()?
        }
        (Some(_), Some(_)) | (None, None) => {
            return Err(CliError::Parse(
                "each family needs exactly one of 'projectors' or 'basis'".into(),
            ));
        }
    };
    match &family.labels {
        Some(labels) => ScheduledFamily::with_labels(family.time, projectors, labels.clone())
            .map_err(validation),
        None => ScheduledFamily::new(family.time, projectors).map_err(validation),
    }
}

fn build_explicit(cfg: &ConfigDocument) -> Result<BuiltProblem, CliError> {
    let dim = match (cfg.dimension, cfg.qubit_factors) {
        (Some(d), None) => {
            if d == 0 {
                return Err(CliError::Validation("dimension must be positive".into()));
            }
            d
        }
        (None, Some(q)) => {
            if q == 0 || q > 11 {
                return Err(CliError::Validation(format!(
                    "qubit_factors = {q} outside the supported range 1..=11"
                )));
            }
            1usize << q
        }
        (None, None) => {
            return Err(CliError::Parse(
                "config needs exactly one of 'dimension' or 'qubit_factors'".into(),
            ));
        }
        (Some(_), Some(_)) => {
            return Err(CliError::Parse(
                "config keys 'dimension' and 'qubit_factors' are mutually exclusive".into(),
            ));
        }
    };

    let h_flat = cfg
        .hamiltonian
        .as_ref()
        .ok_or_else(|| CliError::Parse("missing config key 'hamiltonian'".into()))?;
    let hamiltonian = HermitianOperator::new(
        Operator::new(to_matrix(h_flat, dim, "hamiltonian")?).map_err(validation)?,
    )
    .map_err(validation)?;

    let state = cfg
        .initial_state
        .as_ref()
        .ok_or_else(|| CliError::Parse("missing config key 'initial_state'".into()))?;
    let rho = match state {
        InitialState::Tag(tag) if tag == "ind" => DensityMatrix::maximally_mixed(dim),
        InitialState::Tag(tag) => {
            return Err(CliError::Parse(format!(
                "unknown initial_state tag '{tag}' (supported: \"ind\")"
            )));
        }
        InitialState::Vector(v) => {
            let amps = to_vector(&v.vector, dim, "initial_state.vector")?;
            DensityMatrix::pure(&StateVector::new(amps).map_err(validation)?)
        }
        InitialState::Density(d) => DensityMatrix::new(
            Operator::new(to_matrix(&d.density, dim, "initial_state.density")?)
                .map_err(validation)?,
        )
        .map_err(validation)?,
    };

    let fam_specs = cfg
        .families
        .as_ref()
        .ok_or_else(|| CliError::Parse("missing config key 'families'".into()))?;
    if fam_specs.is_empty() {
        return Err(CliError::Validation(
            "config key 'families' must list at least one family".into(),
        ));
    }
    let families = fam_specs
        .iter()
        .map(|family| build_family(family, dim))
        .collect::<Result<Vec<_>, _>>()?;

    let set = HistorySet::new(hamiltonian, cfg.t0.unwrap_or(0.0), rho, families)
        .map_err(validation)?;
    Ok(BuiltProblem {
        set,
        records: None,
        source: "config".into(),
        seed: cfg.seed,
    })
}

fn real_param(
    params: &BTreeMap<String, C64>,
    key: &str,
    default: f64,
) -> Result<f64, CliError> {
    match params.get(key) {
        None => Ok(default),
        Some(z) if z.im == 0.0 => Ok(z.re),
        Some(z) => Err(CliError::Parse(format!(
            "model parameter '{key}' must be real, got imaginary part {}",
            z.im
        ))),
    }
}

fn int_param(
    params: &BTreeMap<String, C64>,
    key: &str,
    default: u64,
) -> Result<u64, CliError> {
    let x = real_param(params, key, default as f64)?;
    if x < 0.0 || x.fract() != 0.0 {
        return Err(CliError::Parse(format!(
            "model parameter '{key}' must be a nonnegative integer, got {x}"
        )));
    }
    Ok(x as u64)
}

fn reject_unknown(
    params: &BTreeMap<String, C64>,
    model: &str,
    allowed: &[&str],
) -> Result<(), CliError> {
    for key in params.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(CliError::Parse(format!(
                "unknown parameter '{key}' for model '{model}' (allowed: {})",
                allowed.join(", ")
            )));
        }
    }
    Ok(())
}

/// Instantiate a built-in model. `seed_flag` (from `--seed`) takes precedence
/// over a `seed` parameter for models that draw randomness.
pub fn build_model(
    name: &str,
    params: &BTreeMap<String, C64>,
    seed_flag: Option<u64>,
) -> Result<BuiltProblem, CliError> {
    let (bundle, seed) = match name {
        "measurement" => {
            reject_unknown(params, name, &["a", "b"])?;
            let a = params
                .get("a")
                .copied()
                .unwrap_or(C64::new(FRAC_1_SQRT_2, 0.0));
            let b = params
                .get("b")
                .copied()
                .unwrap_or(C64::new(FRAC_1_SQRT_2, 0.0));
            (measurement_model(a, b).map_err(validation)?, None)
        }
        "environment" => {
            reject_unknown(params, name, &["n_env", "theta"])?;
            let n_env = int_param(params, "n_env", 3)? as usize;
            let theta = real_param(params, "theta", FRAC_PI_4)?;
            (environment_model(n_env, theta).map_err(validation)?, None)
        }
        "random" => {
            reject_unknown(params, name, &["seed", "dim", "n_times"])?;
            let seed = match seed_flag {
                Some(s) => s,
                None => int_param(params, "seed", 0)?,
            };
            let dim = int_param(params, "dim", 4)? as usize;
            let n_times = int_param(params, "n_times", 2)? as usize;
            (
                random_model(seed, dim, n_times).map_err(validation)?,
                Some(seed),
            )
        }
        "zxz" => {
            reject_unknown(params, name, &["field"])?;
            let field = real_param(params, "field", 1.0)?;
            (zxz_model(field).map_err(validation)?, None)
        }
        other => {
            return Err(CliError::Parse(format!(
                "unknown model '{other}' (available: measurement, environment, random, zxz)"
            )));
        }
    };
    Ok(BuiltProblem {
        set: bundle.set,
        records: bundle.records,
        source: format!("model:{name}"),
        seed,
    })
}

/// Resolve a parsed config document into a problem.
pub fn build_from_config(
    cfg: &ConfigDocument,
    seed_flag: Option<u64>,
) -> Result<BuiltProblem, CliError> {
    if let Some(model) = &cfg.model {
        let explicit = cfg.dimension.is_some()
            || cfg.qubit_factors.is_some()
            || cfg.hamiltonian.is_some()
            || cfg.initial_state.is_some()
            || cfg.families.is_some();
        if explicit {
            return Err(CliError::Parse(
                "config key 'model' is mutually exclusive with explicit system keys \
                 (dimension, qubit_factors, hamiltonian, initial_state, families)"
                    .into(),
            ));
        }
        let params: BTreeMap<String, C64> = model
            .params
            .iter()
            .map(|(k, v)| (k.clone(), v.as_complex()))
            .collect();
        let mut built = build_model(&model.name, &params, seed_flag.or(cfg.seed))?;
        if built.seed.is_none() {
            built.seed = seed_flag.or(cfg.seed);
        }
        Ok(built)
    } else {
        let mut built = build_explicit(cfg)?;
        if seed_flag.is_some() {
            built.seed = seed_flag;
        }
        Ok(built)
    }
}

/// Parse a `k=v,k=v` parameter list from the command line. Values are floats
/// or `re:im` complex literals.
pub fn parse_param_list(raw: &str) -> Result<BTreeMap<String, C64>, CliError> {
    let mut out = BTreeMap::new();
    for piece in raw.split(',').filter(|p| !p.trim().is_empty()) {
        let (key, value) = piece.split_once('=').ok_or_else(|| {
            CliError::Parse(format!("malformed parameter '{piece}', expected k=v"))
        })?;
        let key = key.trim().to_string();
        let value = value.trim();
        let z = if let Some((re, im)) = value.split_once(':') {
            C64::new(
                re.parse::<f64>().map_err(|e| {
                    CliError::Parse(format!("parameter '{key}': bad real part '{re}': {e}"))
                })?,
                im.parse::<f64>().map_err(|e| {
                    CliError::Parse(format!("parameter '{key}': bad imaginary part '{im}': {e}"))
                })?,
            )
        } else {
            C64::new(
                value.parse::<f64>().map_err(|e| {
                    CliError::Parse(format!("parameter '{key}': bad value '{value}': {e}"))
                })?,
                0.0,
            )
        };
        if out.insert(key.clone(), z).is_some() {
            return Err(CliError::Parse(format!("parameter '{key}' given twice")));
        }
    }
    Ok(out)
}
