//! Command-line front end.
//!
//! Exit codes: 0 certified (and every check passed), 1 rejected certificate,
//! 2 bound-check failure or an iterate leaving the certified ball, 3 input or
//! runtime error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::certify::{certify, certify_problem, Certificate, LipschitzSource, DEFAULT_SEED};
use crate::error::{Error, Result};
use crate::majorant::MajorantParams;
use crate::newton::{solve, NewtonTrace, StopCriteria, StopReason};
use crate::problem::{NormKind, ProblemFile, BUILTINS};
use crate::verify::{full_verification, BoundReport, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_REJECTED: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 2;
pub const EXIT_ERROR: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "kantorovich", version, about = "Certified Newton solver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the convergence hypotheses and print the certificate.
    Certify(RunArgs),
    /// Certify, then run Newton's method from x0.
    Solve(RunArgs),
    /// Certify, solve, and audit every bound along the run.
    Verify(RunArgs),
    /// Tabulate the majorant sequence for given b and L.
    Majorant(MajorantArgs),
    /// List builtin problems.
    Problems(OutputArgs),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Table,
}

#[derive(Debug, Clone, Default, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Builtin problem name, or path to a problem file (JSON).
    #[arg(long)]
    pub problem: Option<String>,
    /// Problem parameter, KEY=VALUE; repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
    /// Base point, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<String>,
    /// Domain radius.
    #[arg(long = "R")]
    pub radius: Option<f64>,
    /// Lipschitz constant of F'(x0)^-1 F'.
    #[arg(long = "L")]
    pub lipschitz: Option<f64>,
    /// Residual bound, for certifying without a problem.
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub norm: Option<String>,
    #[arg(long = "kmax")]
    pub k_max: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sample count for each sampled check.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long = "majorant-tol")]
    pub majorant_tol: Option<f64>,
    #[arg(long = "step-tol")]
    pub step_tol: Option<f64>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct MajorantArgs {
    #[arg(long)]
    pub b: f64,
    #[arg(long = "L")]
    pub lipschitz: f64,
    #[arg(long = "kmax", default_value_t = 10)]
    pub k_max: usize,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CommandKind {
    Certify,
    Solve,
    Verify,
    Majorant,
    Problems,
}

/// Fully resolved configuration: problem file values with flags applied on top.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: CommandKind,
    pub problem: Option<ProblemFile>,
    pub b: Option<f64>,
    pub lipschitz: Option<f64>,
    pub radius: Option<f64>,
    pub norm: NormKind,
    pub stop: StopCriteria,
    pub verify: VerifyOptions,
    pub output: Option<PathBuf>,
    pub format: Format,
}

fn parse_params(items: &[String]) -> Result<Vec<(String, f64)>> {
    items
        .iter()
        .map(|item| {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::InvalidInput(format!("--param expects KEY=VALUE, got '{item}'")))?;
            let value = value
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("--param {key}: '{value}' is not a number")))?;
            Ok((key.trim().to_string(), value))
        })
        .collect()
}

fn parse_vector(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("x0: '{s}' is not a number")))
        })
        .collect()
}

fn load_problem(spec: &str) -> Result<ProblemFile> {
    let path = Path::new(spec);
    if spec.ends_with(".json") || path.is_file() {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("cannot read problem file {spec}: {e}")))?;
        ProblemFile::from_json(&text)
    } else {
        Ok(ProblemFile {
            name: spec.to_string(),
            ..Default::default()
        })
    }
}

impl RunConfig {
    pub fn from_args(command: CommandKind, args: &RunArgs) -> Result<Self> {
        let mut problem = args.problem.as_deref().map(load_problem).transpose()?;
        if let Some(file) = problem.as_mut() {
            for (key, value) in parse_params(&args.params)? {
                file.params.insert(key, value);
            }
            if let Some(x0) = &args.x0 {
                file.x0 = Some(parse_vector(x0)?);
            }
            if args.radius.is_some() {
                file.radius = args.radius;
            }
            if args.lipschitz.is_some() {
                file.lipschitz = args.lipschitz;
            }
        } else if !args.params.is_empty() || args.x0.is_some() {
            return Err(Error::InvalidInput("--param and --x0 require --problem".into()));
        }

        let norm = match (&args.norm, problem.as_ref().and_then(|p| p.norm)) {
            (Some(n), _) => n.parse()?,
            (None, Some(n)) => n,
            (None, None) => NormKind::Euclidean,
        };
        if let Some(file) = problem.as_mut() {
            file.norm = Some(norm);
        }

        let from_file = |f: fn(&ProblemFile) -> Option<f64>| problem.as_ref().and_then(f);
        let defaults = StopCriteria::default();
        let stop = StopCriteria {
            majorant_tol: args
                .majorant_tol
                .or(from_file(|p| p.majorant_tol))
                .unwrap_or(defaults.majorant_tol),
            step_tol: args.step_tol.or(from_file(|p| p.step_tol)).unwrap_or(defaults.step_tol),
            k_max: args
                .k_max
                .or(problem.as_ref().and_then(|p| p.k_max))
                .unwrap_or(defaults.k_max),
        };
        stop.validate()?;
        let verify = VerifyOptions {
            samples: args
                .samples
                .or(problem.as_ref().and_then(|p| p.samples))
                .unwrap_or(VerifyOptions::default().samples),
            seed: args
                .seed
                .or(problem.as_ref().and_then(|p| p.seed))
                .unwrap_or(DEFAULT_SEED),
        };

        let config = RunConfig {
            command,
            b: args.b,
            lipschitz: args.lipschitz.or(from_file(|p| p.lipschitz)),
            radius: args.radius.or(from_file(|p| p.radius)),
            problem,
            norm,
            stop,
            verify,
            output: args.out.output.clone(),
            format: args.out.format,
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        match (&self.problem, self.command) {
            (Some(_), _) if self.b.is_some() => Err(Error::InvalidInput(
                "--b cannot be combined with --problem; b is computed from F".into(),
            )),
            (None, CommandKind::Certify) => {
                if self.b.is_none() || self.lipschitz.is_none() || self.radius.is_none() {
                    Err(Error::InvalidInput(
                        "certify without --problem needs --b, --L and --R".into(),
                    ))
                } else {
                    Ok(())
                }
            }
            (None, CommandKind::Solve | CommandKind::Verify) => {
                Err(Error::InvalidInput("solve and verify need --problem".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Serialize)]
struct ProblemSummary {
    name: String,
    dim: usize,
    x0: Vec<f64>,
    #[serde(rename = "R")]
    radius: f64,
    norm: NormKind,
    params: std::collections::BTreeMap<String, f64>,
    l_source: &'static str,
}

/// Canonical JSON payload of a certify/solve/verify run.
#[derive(Debug, Serialize)]
pub struct RunReport {
    command: CommandKind,
    problem: Option<ProblemSummary>,
    certificate: Certificate,
    #[serde(skip_serializing_if = "Option::is_none")]
    trace: Option<NewtonTrace>,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<BoundReport>,
    exit_code: i32,
}

#[derive(Debug, Serialize)]
struct MajorantRow {
    k: usize,
    t_recursive: f64,
    t_closed_form: f64,
    gap: f64,
    rate_factor: f64,
}

#[derive(Debug, Serialize)]
struct MajorantTable {
    command: CommandKind,
    b: f64,
    #[serde(rename = "L")]
    lipschitz: f64,
    t_star: f64,
    t_star2: f64,
    theta: f64,
    strict: bool,
    rows: Vec<MajorantRow>,
}

/// A rendered command result.
#[derive(Debug)]
pub struct Outcome {
    pub json: String,
    pub table: String,
    pub exit_code: i32,
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

fn label<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value)
        .unwrap_or_default()
        .trim_matches('"')
        .to_string()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.10e}"))
}

fn certificate_table(out: &mut String, cert: &Certificate) {
    let _ = writeln!(out, "status              {}", label(&cert.status));
    if let Some(reason) = cert.reason {
        let _ = writeln!(out, "reason              {}", label(&reason));
    }
    let _ = writeln!(out, "b                   {:.10e}", cert.b);
    let _ = writeln!(out, "L                   {:.10e}", cert.lipschitz);
    let _ = writeln!(out, "R                   {:.10e}", cert.radius);
    let _ = writeln!(out, "t*                  {}", fmt_opt(cert.t_star));
    let _ = writeln!(out, "t**                 {}", fmt_opt(cert.t_star2));
    let _ = writeln!(out, "theta               {}", fmt_opt(cert.theta));
    let _ = writeln!(
        out,
        "uniqueness radius   {} ({})",
        fmt_opt(cert.uniqueness_radius),
        if cert.uniqueness_open { "open" } else { "closed" }
    );
    if let Some(rate) = cert.rate {
        let _ = writeln!(
            out,
            "rate                {} {}",
            label(&rate),
            fmt_opt(cert.quadratic_coefficient)
        );
    }
    for w in &cert.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    if !cert.predicted_gaps.is_empty() {
        let _ = writeln!(out, "{:>4}  {:>22}", "k", "t* - t_k");
        for (k, g) in cert.predicted_gaps.iter().enumerate() {
            let _ = writeln!(out, "{k:>4}  {g:>22.15e}");
        }
    }
}

fn run_report_table(r: &RunReport) -> String {
    let mut out = String::new();
    if let Some(p) = &r.problem {
        let _ = writeln!(
            out,
            "problem {} (n = {}, R = {}, norm = {}, L from {})",
            p.name, p.dim, p.radius, p.norm, p.l_source
        );
    }
    certificate_table(&mut out, &r.certificate);
    if let Some(trace) = &r.trace {
        let _ = writeln!(
            out,
            "\n{:>4}  {:>22}  {:>22}  {:>22}",
            "k", "|x_k - x0|", "|G(x_k)|", "|x_k+1 - x_k|"
        );
        for k in 0..trace.len() {
            let step = trace.step_norms.get(k).map_or("-".to_string(), |s| format!("{s:.15e}"));
            let _ = writeln!(
                out,
                "{k:>4}  {:>22.15e}  {:>22.15e}  {step:>22}",
                trace.distances_from_x0[k], trace.residual_norms[k]
            );
        }
        let _ = writeln!(out, "stop: {}", label(&trace.stop_reason));
    }
    if let Some(report) = &r.report {
        let _ = writeln!(
            out,
            "\nchecks: {} total, {} passed, {} failed",
            report.summary.total, report.summary.passed, report.summary.failed
        );
        for c in report.failures() {
            let _ = writeln!(
                out,
                "FAIL {} k={} lhs={:e} rhs={:e} margin={:e}",
                label(&c.id),
                c.k,
                c.lhs,
                c.rhs,
                c.margin
            );
        }
        for n in &report.notices {
            let _ = writeln!(out, "note: {n}");
        }
    }
    let _ = writeln!(out, "exit code {}", r.exit_code);
    out
}

fn run_problem(config: &RunConfig, file: &ProblemFile) -> Result<RunReport> {
    let ps = file.to_spec()?;
    let (source, l_source) = match config.lipschitz {
        Some(l) => (LipschitzSource::EstimateGuarded(l), "supplied"),
        None if ps.known_lipschitz.is_some() => (LipschitzSource::Known, "known"),
        None if ps.lipschitz_bound.is_some() => (LipschitzSource::Known, "bound"),
        None => (LipschitzSource::Known, "none"),
    };
    let summary = ProblemSummary {
        name: ps.name.clone(),
        dim: ps.dim,
        x0: ps.x0.as_slice().to_vec(),
        radius: ps.radius,
        norm: ps.norm,
        params: ps.params.clone(),
        l_source,
    };
    let fallback_l = config
        .lipschitz
        .or(ps.known_lipschitz)
        .or(ps.lipschitz_bound)
        .unwrap_or(f64::NAN);
    let (radius, norm) = (ps.radius, ps.norm);

    let (pcs, certificate) = match certify_problem(ps, source, config.stop.k_max) {
        Ok(pair) => pair,
        Err(Error::SingularBasePoint { cond }) => {
            return Ok(RunReport {
                command: config.command,
                problem: Some(summary),
                certificate: Certificate::singular_base_point(fallback_l, radius, norm, cond),
                trace: None,
                report: None,
                exit_code: EXIT_REJECTED,
            });
        }
        Err(e) => return Err(e),
    };

    let mut report = RunReport {
        command: config.command,
        problem: Some(summary),
        certificate,
        trace: None,
        report: None,
        exit_code: EXIT_OK,
    };
    if !report.certificate.is_certified() {
        report.exit_code = EXIT_REJECTED;
        return Ok(report);
    }
    if config.command == CommandKind::Certify {
        return Ok(report);
    }

    let trace = solve(&pcs, &report.certificate, &config.stop)?;
    let diverged = matches!(
        trace.stop_reason,
        StopReason::LeftCertifiedBall | StopReason::SingularJacobian
    );
    if config.command == CommandKind::Verify {
        let bounds = full_verification(&pcs, &report.certificate, &trace, &config.verify)?;
        if !bounds.all_pass {
            report.exit_code = EXIT_CHECK_FAILED;
        }
        report.report = Some(bounds);
    }
    if diverged {
        report.exit_code = EXIT_CHECK_FAILED;
    }
    report.trace = Some(trace);
    Ok(report)
}

/// Execute a resolved configuration.
pub fn execute(config: &RunConfig) -> Result<Outcome> {
    let report = match &config.problem {
        Some(file) => run_problem(config, file)?,
        None => {
            let (b, l, r) = (
                config.b.unwrap_or_default(),
                config.lipschitz.unwrap_or_default(),
                config.radius.unwrap_or_default(),
            );
            let certificate = certify(b, l, r, config.norm, config.stop.k_max)?;
            let exit_code = if certificate.is_certified() {
                EXIT_OK
            } else {
                EXIT_REJECTED
            };
            RunReport {
                command: config.command,
                problem: None,
                certificate,
                trace: None,
                report: None,
                exit_code,
            }
        }
    };
    Ok(Outcome {
        json: to_json(&report),
        table: run_report_table(&report),
        exit_code: report.exit_code,
    })
}

pub fn majorant_table(args: &MajorantArgs) -> Result<Outcome> {
    let m = MajorantParams::new(args.b, args.lipschitz)?;
    let a = m.analyze();
    let trajectory = m.sequence(args.k_max);
    let rows = (0..=args.k_max)
        .map(|k| {
            let gap = trajectory.gaps[k];
            MajorantRow {
                k,
                t_recursive: trajectory.t[k],
                t_closed_form: m.closed_form_t(u32::try_from(k).unwrap_or(u32::MAX)),
                gap,
                rate_factor: m.gap_rate_factor(gap),
            }
        })
        .collect::<Vec<_>>();
    let mut table = format!(
        "b = {}, L = {}, t* = {:.15e}, t** = {:.15e}, theta = {:.15e}\n",
        args.b, args.lipschitz, a.t_star, a.t_star2, a.theta
    );
    let _ = writeln!(
        table,
        "{:>4}  {:>22}  {:>22}  {:>22}  {:>22}",
        "k", "t_k (recursive)", "t_k (closed form)", "t* - t_k", "rate factor"
    );
    for r in &rows {
        let _ = writeln!(
            table,
            "{:>4}  {:>22.15e}  {:>22.15e}  {:>22.15e}  {:>22.15e}",
            r.k, r.t_recursive, r.t_closed_form, r.gap, r.rate_factor
        );
    }
    let payload = MajorantTable {
        command: CommandKind::Majorant,
        b: args.b,
        lipschitz: args.lipschitz,
        t_star: a.t_star,
        t_star2: a.t_star2,
        theta: a.theta,
        strict: a.strict,
        rows,
    };
    Ok(Outcome {
        json: to_json(&payload),
        table,
        exit_code: EXIT_OK,
    })
}

fn problems_listing() -> Outcome {
    let mut table = String::new();
    for info in BUILTINS {
        let _ = writeln!(
            table,
            "{:<16} {}  [{}]",
            info.name,
            info.description,
            info.params.join(", ")
        );
    }
    Outcome {
        json: to_json(&BUILTINS),
        table,
        exit_code: EXIT_OK,
    }
}

fn emit(outcome: &Outcome, out: &OutputArgs) -> i32 {
    let text = match out.format {
        Format::Json => &outcome.json,
        Format::Table => &outcome.table,
    };
    match &out.output {
        Some(path) => {
            if let Err(e) = std::fs::write(path, text) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return EXIT_ERROR;
            }
        }
        None => print!("{text}"),
    }
    outcome.exit_code
}

/// Run a parsed command line and return the process exit code.
pub fn run(cli: Cli) -> i32 {
    let (result, out) = match &cli.command {
        Command::Certify(args) => (
            RunConfig::from_args(CommandKind::Certify, args).and_then(|c| execute(&c)),
            &args.out,
        ),
        Command::Solve(args) => (
            RunConfig::from_args(CommandKind::Solve, args).and_then(|c| execute(&c)),
            &args.out,
        ),
        Command::Verify(args) => (
            RunConfig::from_args(CommandKind::Verify, args).and_then(|c| execute(&c)),
            &args.out,
        ),
        Command::Majorant(args) => {
            let result = majorant_table(args);
            if let Err(Error::HypothesisViolated { product }) = result {
                eprintln!("rejected: 2bL = {product} > 1");
                return EXIT_REJECTED;
            }
            (result, &args.out)
        }
        Command::Problems(out) => (Ok(problems_listing()), out),
    };
    match result {
        Ok(outcome) => emit(&outcome, out),
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

/// Parse `args` and run; parse failures map to exit code 3, help and version to 0.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            code
        }
    }
}
