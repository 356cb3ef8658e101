//! `decohist`: command-line front end for decoherent-histories analysis.
//!
//! Exit codes: 0 success, 1 usage/input/parse errors, 2 validation failures
//! (the configured system violates a structural requirement), 3 solver
//! non-convergence (a report is still produced).

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::error::ErrorKind;
use clap::{Parser, ValueEnum};

use decohist_core::{tol, SolverOptions};

use decohist_cli::config::{
    build_from_config, build_model, parse_param_list, BuiltProblem, ConfigDocument,
};
use decohist_cli::report::{
    build_classicality, build_decohere, build_records, build_validate, emit_text,
    normalize_commands, Command, MetaSection, ReportDocument, ToleranceEntry,
};
use decohist_cli::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Debug, Parser)]
#[command(
    name = "decohist",
    version,
    about = "Decoherent-histories analysis: decoherence matrices, records, classicality"
)]
struct Cli {
    /// Path to a JSON configuration document.
    #[arg(long, value_name = "PATH", conflicts_with = "model")]
    config: Option<PathBuf>,

    /// Built-in model: measurement, environment, random, or zxz.
    #[arg(long, value_name = "NAME")]
    model: Option<String>,

    /// Model parameters, e.g. a=0.6,b=0.8 or b=0.6:0.8 for complex re:im.
    #[arg(long, value_name = "K=V[,K=V...]", requires = "model")]
    param: Option<String>,

    /// Write the JSON report to this path (in addition to stdout).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Stdout rendering.
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,

    /// Decoherence classification tolerance; overrides the config value.
    #[arg(long, value_name = "X")]
    tol: Option<f64>,

    /// Maxent solver residual tolerance; overrides the config value.
    #[arg(long, value_name = "X")]
    solver_tol: Option<f64>,

    /// Seed for models that draw randomness; overrides config and params.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,

    /// Commands to run; defaults to the config list or the full pipeline.
    #[arg(long, value_delimiter = ',', value_name = "CMD[,CMD...]")]
    commands: Option<Vec<String>>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("decohist: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn parse_command_names(names: &[String]) -> Result<Vec<Command>, CliError> {
    names.iter().map(|n| Command::parse(n)).collect()
}

fn run(cli: &Cli) -> Result<ExitCode, CliError> {
    let started = Instant::now();

    let (problem, cfg): (BuiltProblem, Option<ConfigDocument>) = if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        let cfg: ConfigDocument = serde_json::from_str(&text)
            .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        let problem = build_from_config(&cfg, cli.seed)?;
        (problem, Some(cfg))
    } else if let Some(name) = &cli.model {
        let params = match &cli.param {
            Some(raw) => parse_param_list(raw)?,
            None => BTreeMap::new(),
        };
        (build_model(name, &params, cli.seed)?, None)
    } else {
        return Err(CliError::Usage(
            "one of --config PATH or --model NAME is required".into(),
        ));
    };

    let cfg_tols = cfg.as_ref().and_then(|c| c.tolerances.as_ref());
    let tol_dec = cli
        .tol
        .or_else(|| cfg_tols.and_then(|t| t.decoherence))
        .unwrap_or(tol::DECOHERENCE);
    let tol_solver = cli
        .solver_tol
        .or_else(|| cfg_tols.and_then(|t| t.solver))
        .unwrap_or(tol::SOLVER_RESIDUAL);
    if !(tol_dec > 0.0 && tol_dec.is_finite()) || !(tol_solver > 0.0 && tol_solver.is_finite()) {
        return Err(CliError::Validation(
            "tolerances must be positive finite numbers".into(),
        ));
    }

    let requested: Vec<Command> = match &cli.commands {
        Some(names) => parse_command_names(names)?,
        None => match cfg.as_ref().and_then(|c| c.commands.as_ref()) {
            Some(names) => parse_command_names(names)?,
            None => vec![
                Command::Validate,
                Command::Decohere,
                Command::Records,
                Command::Classicality,
            ],
        },
    };
    if requested.is_empty() {
        return Err(CliError::Parse("the command list is empty".into()));
    }
    let commands = normalize_commands(&requested);

    let solver_opts = SolverOptions {
        residual_tol: tol_solver,
        ..SolverOptions::default()
    };

    let mut validate = None;
    let mut decohere = None;
    let mut records = None;
    let mut classicality = None;
    for cmd in &commands {
        match cmd {
            Command::Validate => validate = Some(build_validate(&problem)?),
            Command::Decohere => decohere = Some(build_decohere(&problem, tol_dec)?),
            Command::Records => records = Some(build_records(&problem, tol_dec)?),
            Command::Classicality => {
                classicality = Some(build_classicality(&problem, &solver_opts)?)
            }
        }
    }
    let solver_failed = classicality.as_ref().is_some_and(|c| !c.solver.converged);

    let unix_ms = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0);
    let wall_ms = started.elapsed().as_secs_f64() * 1e3;
    let meta = MetaSection {
        tool: "decohist".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        core_version: decohist_core::VERSION.into(),
        source: problem.source.clone(),
        seed: problem.seed,
        tolerances: ToleranceEntry {
            decoherence: tol_dec,
            solver: tol_solver,
        },
        commands: commands.iter().map(|c| c.name().to_string()).collect(),
        timestamp: format!("unix_ms={unix_ms};wall_ms={wall_ms:.3}"),
    };
    let document = ReportDocument {
        meta,
        validate,
        decohere,
        records,
        classicality,
    };

    let mut json = serde_json::to_string_pretty(&document)
        .map_err(|e| CliError::Io(format!("report serialization failed: {e}")))?;
    json.push('\n');
    if let Some(path) = &cli.out {
        std::fs::write(path, &json)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    }
    match cli.format {
        Format::Json => print!("{json}"),
        Format::Text => print!("{}", emit_text(&document)),
    }

    if solver_failed {
        eprintln!("decohist: maxent solver did not reach its residual target; see the report");
        Ok(ExitCode::from(3))
    } else {
        Ok(ExitCode::SUCCESS)
    }
}
