//! Report document assembly and rendering.
//!
//! The JSON report is fully deterministic for a fixed input except for the
//! single `meta.timestamp` string, which carries wall-clock data. Section
//! structs serialize in declaration order, so a report re-parses and
//! re-serializes byte-identically.

use serde::{Deserialize, Serialize};

use decohist_core::{
    check_strong, classicality_report, classify, decoherence_matrix_with_tolerance,
    extract_records_impure, extract_records_pure, implication_chain_report, is_full, probabilities,
    sum_identity_check, Error as CoreError, RecordSet, SolverOptions,
};

use crate::config::{BuiltProblem, Pair};
use crate::CliError;

/// Record projector matrices are embedded only up to this dimension; above it
/// the report keeps ranks and labels but drops the dense payload.
const MATRIX_EMBED_CAP: usize = 64;

/// Text tables print the magnitude matrix only up to this many histories.
const TEXT_MATRIX_CAP: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Command {
    Validate,
    Decohere,
    Records,
    Classicality,
}

impl Command {
    pub fn parse(name: &str) -> Result<Self, CliError> {
        match name {
            "validate" => Ok(Command::Validate),
            "decohere" => Ok(Command::Decohere),
            "records" => Ok(Command::Records),
            "classicality" => Ok(Command::Classicality),
            other => Err(CliError::Parse(format!(
                "unknown command '{other}' (available: validate, decohere, records, classicality)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Decohere => "decohere",
            Command::Records => "records",
            Command::Classicality => "classicality",
        }
    }
}

/// Normalize a requested command list: dedupe, fix execution order, and pull
/// in `decohere` whenever `records` is requested.
pub fn normalize_commands(requested: &[Command]) -> Vec<Command> {
    let mut list = requested.to_vec();
    if list.contains(&Command::Records) && !list.contains(&Command::Decohere) {
        list.push(Command::Decohere);
    }
    list.sort();
    list.dedup();
    list
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportDocument {
    pub meta: MetaSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validate: Option<ValidateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decohere: Option<DecohereSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub records: Option<RecordsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classicality: Option<ClassicalitySection>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetaSection {
    pub tool: String,
    pub version: String,
    pub core_version: String,
    pub source: String,
    pub seed: Option<u64>,
    pub tolerances: ToleranceEntry,
    pub commands: Vec<String>,
    /// `unix_ms=...;wall_ms=...`; the only nondeterministic field.
    pub timestamp: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceEntry {
    pub decoherence: f64,
    pub solver: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateSection {
    pub status: String,
    pub dimension: usize,
    pub n_families: usize,
    pub n_histories: usize,
    pub family_times: Vec<f64>,
    pub sum_identity_deviation: f64,
    pub exhaustive: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecohereSection {
    pub tolerance: f64,
    pub level: String,
    pub labels: Vec<String>,
    /// Flat row-major [re, im] entries of the decoherence matrix.
    pub matrix: Vec<Pair>,
    pub max_weak_violation: f64,
    pub max_medium_violation: f64,
    pub max_normalized_overlap: f64,
    /// Present when the set is at least weakly decoherent.
    pub probabilities: Option<Vec<LabeledValue>>,
    pub total_probability: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabeledValue {
    pub label: String,
    pub value: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordsSection {
    /// `supplied`, `extracted`, or `unavailable`.
    pub status: String,
    pub reason: Option<String>,
    pub policy: Option<String>,
    pub tolerance: f64,
    pub strong: Option<bool>,
    pub residual: Option<f64>,
    pub projectors: Option<Vec<RecordEntry>>,
    pub implication: ImplicationEntry,
    pub fullness: Option<FullnessEntry>,
    pub fullness_reason: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordEntry {
    pub label: String,
    pub rank: usize,
    pub vanishing: bool,
    /// Dense payload, omitted above the embed cap.
    pub matrix: Option<Vec<Pair>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImplicationEntry {
    pub weak: bool,
    pub medium: bool,
    /// `true`, `false`, or `undetermined`.
    pub strong: String,
    pub max_weak_violation: f64,
    pub max_medium_violation: f64,
    pub strong_residual: Option<f64>,
    pub monotone: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FullnessEntry {
    pub full: bool,
    pub nonvanishing: usize,
    pub dimension: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalitySection {
    pub units: String,
    pub s_hat: f64,
    pub s_maxent: f64,
    pub s_rho: f64,
    pub q_hat: Vec<LabeledValue>,
    pub solver: SolverEntry,
    pub constraints: ConstraintCounts,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverEntry {
    pub method: String,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    pub tolerance: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintCounts {
    pub raw: usize,
    pub kept: usize,
}

fn validation(e: CoreError) -> CliError {
    CliError::Validation(e.to_string())
}

fn flatten(matrix: &ndarray::Array2<decohist_core::C64>) -> Vec<Pair> {
    matrix.iter().map(|z| [z.re, z.im]).collect()
}

pub fn build_validate(problem: &BuiltProblem) -> Result<ValidateSection, CliError> {
    let set = &problem.set;
    let report = sum_identity_check(set).map_err(validation)?;
    Ok(ValidateSection {
        status: "ok".into(),
        dimension: set.dim(),
        n_families: set.n_families(),
        n_histories: set.index_count(),
        family_times: set.families().iter().map(|f| f.time()).collect(),
        sum_identity_deviation: report.max_deviation,
        exhaustive: report.exhaustive,
    })
}

pub fn build_decohere(problem: &BuiltProblem, tolerance: f64) -> Result<DecohereSection, CliError> {
    let d = decoherence_matrix_with_tolerance(&problem.set, tolerance).map_err(validation)?;
    let report = classify(&d, tolerance);
    let (probs, total) = match probabilities(&d) {
        Ok(table) => {
            let rows = table
                .labels()
                .iter()
                .zip(table.values())
                .map(|(label, &value)| LabeledValue {
                    label: label.clone(),
                    value,
                })
                .collect();
            (Some(rows), Some(table.total()))
        }
        Err(CoreError::NotDecoherent { .. }) => (None, None),
        Err(e) => return Err(validation(e)),
    };
    let section = DecohereSection {
        tolerance,
        level: report.level.to_string(),
        labels: d.labels().to_vec(),
        matrix: flatten(d.entries()),
        max_weak_violation: report.max_weak_violation,
        max_medium_violation: report.max_medium_violation,
        max_normalized_overlap: report.max_offdiag_overlap(),
        probabilities: probs,
        total_probability: total,
    };
    Ok(section)
}

pub fn build_records(problem: &BuiltProblem, tolerance: f64) -> Result<RecordsSection, CliError> {
    let set = &problem.set;
    let (outcome, status) = match &problem.records {
        Some(rs) => (Ok(rs.clone()), "supplied"),
        None => {
            let attempt = if set.rho().is_pure() {
                let psi = set
                    .rho()
                    .pure_state()
                    .expect("pure density matrices carry their state vector")
                    .clone();
                extract_records_pure(set, &psi)
            } else {
                extract_records_impure(set)
            };
            (attempt, "extracted")
        }
    };
    let known: Option<&RecordSet> = outcome.as_ref().ok();
    let implication_report = implication_chain_report(set, known).map_err(validation)?;
    let implication = ImplicationEntry {
        weak: implication_report.weak,
        medium: implication_report.medium,
        strong: implication_report.strong.to_string(),
        max_weak_violation: implication_report.max_weak_violation,
        max_medium_violation: implication_report.max_medium_violation,
        strong_residual: implication_report.strong_residual,
        monotone: implication_report.monotone,
    };
    let (fullness, fullness_reason) = match is_full(set) {
        Ok(rep) => (
            Some(FullnessEntry {
                full: rep.full,
                nonvanishing: rep.nonvanishing,
                dimension: rep.dim,
            }),
            None,
        ),
        Err(e) => (None, Some(e.to_string())),
    };
    match outcome {
        Ok(rs) => {
            let strong = check_strong(set, &rs).map_err(validation)?;
            let embed = set.dim() <= MATRIX_EMBED_CAP;
            let projectors = rs
                .indices()
                .iter()
                .zip(rs.projectors())
                .zip(rs.vanishing())
                .map(|((idx, p), &vanishing)| RecordEntry {
                    label: set.history_label(idx),
                    rank: p.rank(),
                    vanishing,
                    matrix: embed.then(|| flatten(p.as_operator().data())),
                })
                .collect();
            Ok(RecordsSection {
                status: status.into(),
                reason: None,
                policy: Some(rs.policy().to_string()),
                tolerance,
                strong: Some(strong.strong),
                residual: Some(strong.residual),
                projectors: Some(projectors),
                implication,
                fullness,
                fullness_reason,
            })
        }
        Err(e @ (CoreError::SubspacesNotOrthogonal { .. }
        | CoreError::VerificationFailed { .. }
        | CoreError::NotMediumDecoherent { .. }
        | CoreError::NotStronglyDecoherent { .. })) => Ok(RecordsSection {
            status: "unavailable".into(),
            reason: Some(e.to_string()),
            policy: None,
            tolerance,
            strong: None,
            residual: None,
            projectors: None,
            implication,
            fullness,
            fullness_reason,
        }),
        Err(e) => Err(validation(e)),
    }
}

pub fn build_classicality(
    problem: &BuiltProblem,
    opts: &SolverOptions,
) -> Result<ClassicalitySection, CliError> {
    let set = &problem.set;
    let report = classicality_report(set, opts).map_err(validation)?;
    let labels: Vec<String> = set
        .indices()
        .iter()
        .map(|idx| set.history_label(idx))
        .collect();
    let q_hat = labels
        .into_iter()
        .zip(&report.q_hat)
        .map(|(label, &value)| LabeledValue { label, value })
        .collect();
    Ok(ClassicalitySection {
        units: "nats".into(),
        s_hat: report.s_hat,
        s_maxent: report.s_maxent,
        s_rho: report.s_rho,
        q_hat,
        solver: SolverEntry {
            method: match opts.method {
                decohist_core::SolverMethod::GradientDescent => "gradient-descent".into(),
                decohist_core::SolverMethod::Newton => "newton".into(),
            },
            iterations: report.solver.iterations,
            residual: report.solver.final_residual,
            converged: report.solver.converged,
            tolerance: opts.residual_tol,
        },
        constraints: ConstraintCounts {
            raw: report.raw_constraints,
            kept: report.kept_constraints,
        },
    })
}

/// Six significant digits, with negative zero normalized away.
fn sig6(x: f64) -> String {
    format!("{:.5e}", x + 0.0)
}

fn render_table(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(|r| r.len()).max().unwrap_or(0);
    let mut widths = vec![0usize; cols];
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.len());
        }
    }
    let mut out = String::new();
    for row in rows {
        let mut line = String::new();
        for (i, cell) in row.iter().enumerate() {
            if i > 0 {
                line.push_str("  ");
            }
            line.push_str(cell);
            if i + 1 < row.len() {
                for _ in cell.len()..widths[i] {
                    line.push(' ');
                }
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

/// Render the whole report as aligned text tables with six significant
/// digits. Deterministic for a fixed document.
pub fn emit_text(report: &ReportDocument) -> String {
    let mut out = String::new();
    let meta = &report.meta;
    out.push_str(&format!(
        "decohist {} (core {})\nsource: {}\n",
        meta.version, meta.core_version, meta.source
    ));
    if let Some(seed) = meta.seed {
        out.push_str(&format!("seed: {seed}\n"));
    }
    out.push_str(&format!(
        "tolerances: decoherence={} solver={}\n",
        sig6(meta.tolerances.decoherence),
        sig6(meta.tolerances.solver)
    ));
    out.push_str(&format!("commands: {}\n", meta.commands.join(", ")));

    if let Some(v) = &report.validate {
        out.push_str("\n== validate ==\n");
        let rows = vec![
            vec!["status".into(), v.status.clone()],
            vec!["dimension".into(), v.dimension.to_string()],
            vec!["families".into(), v.n_families.to_string()],
            vec!["histories".into(), v.n_histories.to_string()],
            vec![
                "family times".into(),
                v.family_times
                    .iter()
                    .map(|t| sig6(*t))
                    .collect::<Vec<_>>()
                    .join(" "),
            ],
            vec![
                "sum identity deviation".into(),
                sig6(v.sum_identity_deviation),
            ],
            vec!["exhaustive check".into(), v.exhaustive.to_string()],
        ];
        out.push_str(&render_table(&rows));
    }

    if let Some(d) = &report.decohere {
        out.push_str("\n== decohere ==\n");
        let rows = vec![
            vec!["level".into(), d.level.clone()],
            vec!["tolerance".into(), sig6(d.tolerance)],
            vec!["max |Re D| offdiag".into(), sig6(d.max_weak_violation)],
            vec!["max |D| offdiag".into(), sig6(d.max_medium_violation)],
            vec![
                "max normalized overlap".into(),
                sig6(d.max_normalized_overlap),
            ],
        ];
        out.push_str(&render_table(&rows));
        let n = d.labels.len();
        if n <= TEXT_MATRIX_CAP {
            out.push_str("\n|D| magnitudes:\n");
            let mut rows: Vec<Vec<String>> = Vec::with_capacity(n + 1);
            let mut header = vec![String::new()];
            header.extend(d.labels.iter().cloned());
            rows.push(header);
            for r in 0..n {
                let mut row = vec![d.labels[r].clone()];
                for c in 0..n {
                    let [re, im] = d.matrix[r * n + c];
                    row.push(sig6((re * re + im * im).sqrt()));
                }
                rows.push(row);
            }
            out.push_str(&render_table(&rows));
        } else {
            out.push_str(&format!(
                "\n|D| matrix of {n} x {n} entries omitted from text output; see the JSON report\n"
            ));
        }
        if let Some(probs) = &d.probabilities {
            out.push_str("\nprobabilities:\n");
            let mut rows: Vec<Vec<String>> = vec![vec!["history".into(), "p".into()]];
            for lv in probs {
                rows.push(vec![lv.label.clone(), sig6(lv.value)]);
            }
            if let Some(total) = d.total_probability {
                rows.push(vec!["total".into(), sig6(total)]);
            }
            out.push_str(&render_table(&rows));
        } else {
            out.push_str("\nprobabilities unavailable: the set is not weakly decoherent\n");
        }
    }

    if let Some(r) = &report.records {
        out.push_str("\n== records ==\n");
        let mut rows = vec![vec!["status".into(), r.status.clone()]];
        if let Some(reason) = &r.reason {
            rows.push(vec!["reason".into(), reason.clone()]);
        }
        if let Some(policy) = &r.policy {
            rows.push(vec!["complement policy".into(), policy.clone()]);
        }
        rows.push(vec!["tolerance".into(), sig6(r.tolerance)]);
        if let (Some(strong), Some(residual)) = (r.strong, r.residual) {
            rows.push(vec!["strong".into(), strong.to_string()]);
            rows.push(vec!["strong residual".into(), sig6(residual)]);
        }
        rows.push(vec![
            "implication".into(),
            format!(
                "weak={} medium={} strong={} monotone={}",
                r.implication.weak, r.implication.medium, r.implication.strong,
                r.implication.monotone
            ),
        ]);
        match &r.fullness {
            Some(f) => rows.push(vec![
                "fullness".into(),
                format!(
                    "full={} nonvanishing={} dimension={}",
                    f.full, f.nonvanishing, f.dimension
                ),
            ]),
            None => {
                if let Some(reason) = &r.fullness_reason {
                    rows.push(vec!["fullness unavailable".into(), reason.clone()]);
                }
            }
        }
        out.push_str(&render_table(&rows));
        if let Some(projectors) = &r.projectors {
            out.push_str("\nrecord projectors:\n");
            let mut rows: Vec<Vec<String>> =
                vec![vec!["history".into(), "rank".into(), "vanishing".into()]];
            for entry in projectors {
                rows.push(vec![
                    entry.label.clone(),
                    entry.rank.to_string(),
                    entry.vanishing.to_string(),
                ]);
            }
            out.push_str(&render_table(&rows));
        }
    }

    if let Some(c) = &report.classicality {
        out.push_str("\n== classicality ==\n");
        let rows = vec![
            vec!["units".into(), c.units.clone()],
            vec!["S_hat (set entropy)".into(), sig6(c.s_hat)],
            vec!["S_maxent".into(), sig6(c.s_maxent)],
            vec!["S(rho)".into(), sig6(c.s_rho)],
            vec![
                "solver".into(),
                format!(
                    "{} converged={} iterations={} residual={} tolerance={}",
                    c.solver.method,
                    c.solver.converged,
                    c.solver.iterations,
                    sig6(c.solver.residual),
                    sig6(c.solver.tolerance)
                ),
            ],
            vec![
                "constraints".into(),
                format!("raw={} kept={}", c.constraints.raw, c.constraints.kept),
            ],
        ];
        out.push_str(&render_table(&rows));
        out.push_str("\nformal probabilities:\n");
        let mut rows: Vec<Vec<String>> = vec![vec!["history".into(), "q_hat".into()]];
        for lv in &c.q_hat {
            rows.push(vec![lv.label.clone(), sig6(lv.value)]);
        }
        out.push_str(&render_table(&rows));
    }

    out
}
