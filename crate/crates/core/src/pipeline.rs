//! Runs scenarios end to end and writes their reports.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::branches::{compare, estimate_slopes, sample_branches, BranchTable, SampleOptions, ValidationReport};
use crate::config::{Config, Resolved, Scenario};
use crate::dift::{check_conditions, condition_report, eigen_samples, example, solve_branch, ConditionReport, DiftBranch, EigenBranchSample};
use crate::error::{Error, ErrorKind, Result};
use crate::geometry::normal_speed;
use crate::hadamard::{assemble_closed_form, assemble_quadrature, predict_slopes, PencilMatrices, SlopePrediction};

/// Entrywise agreement required between closed-form and quadrature `A`.
pub const AGREEMENT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Pencil assembly and slope prediction only.
    Predict,
    /// Prediction plus finite-element validation where enabled.
    Validate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    ValidationFailure,
    NumericalFailure,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::ValidationFailure => 1,
            Status::NumericalFailure => 3,
        }
    }
}

/// Machine-readable error object.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorObject {
    pub kind: &'static str,
    pub exit_code: i32,
    pub path: Option<String>,
    pub message: String,
}

pub fn exit_code(e: &Error) -> i32 {
    match e.kind() {
        ErrorKind::Schema | ErrorKind::Input => 2,
        ErrorKind::Validation => 1,
        ErrorKind::Numerical => 3,
    }
}

impl From<&Error> for ErrorObject {
    fn from(e: &Error) -> Self {
        let (kind, path) = match e {
            Error::Config { path, .. } => ("schema", Some(path.clone())),
            _ => match e.kind() {
                ErrorKind::Schema => ("schema", None),
                ErrorKind::Input => ("input", None),
                ErrorKind::Validation => ("validation", None),
                ErrorKind::Numerical => ("numerical", None),
            },
        };
        let message = match e {
            Error::Config { message, .. } => message.clone(),
            _ => e.to_string(),
        };
        Self {
            kind,
            exit_code: exit_code(e),
            path,
            message,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Agreement {
    pub max_difference: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioReport {
    /// The scenario with all defaults resolved.
    pub scenario: Scenario,
    pub mode: &'static str,
    pub seed: u64,
    pub lambda0: f64,
    pub closed_form: Option<PencilMatrices>,
    pub quadrature: Option<PencilMatrices>,
    pub agreement: Option<Agreement>,
    pub prediction: Option<SlopePrediction>,
    pub validation: Option<ValidationReport>,
    pub branches_csv: Option<String>,
    pub status: Status,
    pub error: Option<ErrorObject>,
    #[serde(skip)]
    pub table: Option<BranchTable>,
}

fn failure(e: &Error) -> (Status, Option<ErrorObject>) {
    let status = if exit_code(e) == 1 {
        Status::ValidationFailure
    } else {
        Status::NumericalFailure
    };
    (status, Some(e.into()))
}

fn fail(report: &mut ScenarioReport, e: &Error) {
    (report.status, report.error) = failure(e);
}

/// Runs one resolved scenario. Never fails: errors land in the report.
pub fn run_scenario(r: &Resolved, mode: Mode, seed: u64) -> ScenarioReport {
    let s = &r.scenario;
    let mut report = ScenarioReport {
        scenario: s.clone(),
        mode: match mode {
            Mode::Predict => "predict",
            Mode::Validate => "validate",
        },
        seed,
        lambda0: r.space.lambda0,
        closed_form: None,
        quadrature: None,
        agreement: None,
        prediction: None,
        validation: None,
        branches_csv: None,
        status: Status::Pass,
        error: None,
        table: None,
    };
    if let Err(e) = predict_into(r, &mut report) {
        fail(&mut report, &e);
        return report;
    }
    if report.agreement.as_ref().is_some_and(|a| !a.pass) {
        report.status = Status::NumericalFailure;
    }
    if mode == Mode::Validate && s.fem_enabled() {
        if let Err(e) = validate_into(r, seed, &mut report) {
            fail(&mut report, &e);
            return report;
        }
        if report.status == Status::Pass && report.validation.as_ref().is_some_and(|v| !v.pass) {
            report.status = Status::ValidationFailure;
        }
    }
    report
}

fn predict_into(r: &Resolved, report: &mut ScenarioReport) -> Result<()> {
    let s = &r.scenario;
    let speed = normal_speed(&s.domain, &r.family, &s.quadrature)?;
    if s.pipelines.closed_form {
        report.closed_form = Some(assemble_closed_form(&r.space, &speed)?);
    }
    if s.pipelines.quadrature {
        report.quadrature = Some(assemble_quadrature(&r.space, &speed)?);
    }
    if let (Some(c), Some(q)) = (&report.closed_form, &report.quadrature) {
        let d = c.max_a_difference(q);
        report.agreement = Some(Agreement {
            max_difference: d,
            tolerance: AGREEMENT_TOL,
            pass: d <= AGREEMENT_TOL,
        });
    }
    let matrices = report.closed_form.as_ref().or(report.quadrature.as_ref()).expect("one pipeline enabled");
    report.prediction = Some(predict_slopes(matrices)?);
    Ok(())
}

fn validate_into(r: &Resolved, seed: u64, report: &mut ScenarioReport) -> Result<()> {
    let s = &r.scenario;
    let table = sample_branches(&SampleOptions {
        domain: &s.domain,
        family: &r.family,
        lambda0: r.space.lambda0,
        multiplicity: r.space.dim(),
        window: s.window.expect("resolved"),
        t_grid: &s.t_grid,
        mesh_ladder: &s.mesh_ladder,
        count_hint: r.count_hint,
        seed,
    })?;
    let slopes = estimate_slopes(&table)?;
    let prediction = report.prediction.as_ref().expect("predicted first");
    report.validation = Some(compare(&s.id, prediction, &slopes, s.tolerances)?);
    report.branches_csv = Some(format!("{}.branches.csv", s.id));
    report.table = Some(table);
    Ok(())
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub mode: Mode,
    pub out_dir: PathBuf,
    pub workers: usize,
    pub quick: bool,
    /// Overrides the config seed.
    pub seed: Option<u64>,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub reports: Vec<ScenarioReport>,
    pub files: Vec<PathBuf>,
    pub exit_code: i32,
}

/// Validates every scenario up front (schema errors abort the run).
pub fn resolve_all(config: &Config, quick: bool) -> Result<Vec<Resolved>> {
    let mut ids = std::collections::BTreeSet::new();
    config
        .scenarios
        .iter()
        .enumerate()
        .map(|(i, s)| {
            if !ids.insert(s.id.clone()) {
                return Err(Error::Config {
                    path: format!("scenarios[{i}].id"),
                    message: format!("duplicate scenario id {:?}", s.id),
                });
            }
            let mut s = s.clone();
            if quick {
                s.quick();
            }
            s.resolve(i)
        })
        .collect()
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Runs every scenario of a parsed config in memory.
pub fn evaluate(config: &Config, mode: Mode, workers: usize, quick: bool, seed: Option<u64>) -> Result<Vec<ScenarioReport>> {
    let resolved = resolve_all(config, quick)?;
    let seed = seed.unwrap_or(config.seed);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Io(e.to_string()))?;
    Ok(pool.install(|| resolved.par_iter().map(|r| run_scenario(r, mode, seed)).collect()))
}

/// Runs a parsed config and writes `<id>.report.json` (and
/// `<id>.branches.csv` when validated) into the output directory.
pub fn run_config(config: &Config, opts: &RunOptions) -> Result<RunOutcome> {
    let reports = evaluate(config, opts.mode, opts.workers, opts.quick, opts.seed)?;
    fs::create_dir_all(&opts.out_dir).map_err(|e| Error::Io(format!("{}: {e}", opts.out_dir.display())))?;
    let mut files = Vec::new();
    for rep in &reports {
        let path = opts.out_dir.join(format!("{}.report.json", rep.scenario.id));
        write_file(&path, format!("{}\n", report_json(rep)?).as_bytes())?;
        files.push(path);
        if let Some(table) = &rep.table {
            let path = opts.out_dir.join(format!("{}.branches.csv", rep.scenario.id));
            let mut buf = Vec::new();
            table.write_csv(&mut buf)?;
            write_file(&path, &buf)?;
            files.push(path);
        }
    }
    let exit_code = overall_exit_code(&reports);
    Ok(RunOutcome {
        reports,
        files,
        exit_code,
    })
}

/// Numerical failures (3) outrank validation failures (1).
pub fn overall_exit_code(reports: &[ScenarioReport]) -> i32 {
    reports.iter().map(|r| r.status.exit_code()).max().unwrap_or(0)
}

pub fn report_json(report: &ScenarioReport) -> Result<String> {
    serde_json::to_string_pretty(report).map_err(|e| Error::Io(e.to_string()))
}

#[derive(Debug, Clone, Serialize)]
pub struct DiftReport {
    pub example: String,
    pub description: &'static str,
    pub t_grid: Vec<f64>,
    pub conditions: ConditionReport,
    pub branch: Option<DiftBranch>,
    pub eigen_branch: Option<Vec<EigenBranchSample>>,
    pub max_residual: Option<f64>,
    pub status: Status,
    pub error: Option<ErrorObject>,
}

/// Checks and continues a catalog example.
pub fn run_dift(name: &str) -> Result<DiftReport> {
    let ex = example(name)?;
    let conditions = condition_report(&ex.problem)?;
    let mut report = DiftReport {
        example: name.to_string(),
        description: ex.description,
        t_grid: ex.t_grid.clone(),
        conditions,
        branch: None,
        eigen_branch: None,
        max_residual: None,
        status: Status::Pass,
        error: None,
    };
    let outcome = check_conditions(&ex.problem).and_then(|_| solve_branch(&ex.problem, &ex.t_grid));
    match outcome {
        Ok(b) => {
            report.max_residual = Some(b.residuals.iter().cloned().fold(0.0, f64::max));
            report.eigen_branch = ex.chart.as_ref().map(|c| eigen_samples(c, &b));
            report.branch = Some(b);
        }
        Err(e) => (report.status, report.error) = failure(&e),
    }
    Ok(report)
}
