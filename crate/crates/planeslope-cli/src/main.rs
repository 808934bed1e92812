//! `planeslope`: secant-plane slopes and derivability probing from the
//! command line.
//!
//! Subcommands: `slope` (one secant-plane slope over an explicit frame),
//! `probe` (classify a point as derivable / not derivable / inconclusive),
//! `grad` (dual-number gradient), `rules` (the calculus-rule harness), and
//! `scan` (classify a grid and write CSV).
//!
//! Exit codes: 0 on success (verdicts of any kind are data, not failures);
//! 1 for flag, expression, or file errors; 2 for computation errors
//! (collinear frames, domain errors); 3 when a rule check fails.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use planeslope::expr::ScalarField;
use planeslope::probe::{classify, ProbeConfig};
use planeslope::rules::{curated_reports, RuleReport};
use planeslope::scan::{scan, Grid};
use planeslope::secantplane::{secant_slope_detail, Frame};
use planeslope::JSON_SCHEMA;

#[derive(Parser)]
#[command(
    name = "planeslope",
    version,
    about = "Secant-plane slopes and numerical derivability"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Secant-plane slope of a field over one explicit frame
    Slope(SlopeArgs),
    /// Classify a point as derivable, not derivable, or inconclusive
    Probe(ProbeArgs),
    /// Exact gradient of the field's expression at a point
    Grad(GradArgs),
    /// Run the calculus-rule harness on the curated suite
    Rules(RulesArgs),
    /// Classify a grid of points and write the verdicts as CSV
    Scan(ScanArgs),
}

#[derive(Args)]
struct SlopeArgs {
    /// Field expression, e.g. "x^2*y/(x^4+y^2)"
    #[arg(long = "fn", value_name = "EXPR")]
    function: String,
    /// Base point, comma-separated coordinates
    #[arg(long, value_name = "X,Y", allow_hyphen_values = true)]
    at: String,
    /// First direction (two-dimensional fields)
    #[arg(long, value_name = "V1,V2", allow_hyphen_values = true)]
    h: Option<String>,
    /// Second direction (two-dimensional fields)
    #[arg(long, value_name = "V1,V2", allow_hyphen_values = true)]
    k: Option<String>,
    /// All n directions as ';'-separated rows, for arities other than 2
    #[arg(long, value_name = "ROW;ROW;..", allow_hyphen_values = true, conflicts_with_all = ["h", "k"])]
    dirs: Option<String>,
    /// Pin the field to a value at a point, e.g. "0,0=0" (repeatable)
    #[arg(long = "override", value_name = "X,Y=V", allow_hyphen_values = true)]
    overrides: Vec<String>,
}

#[derive(Args)]
struct ProbeArgs {
    #[arg(long = "fn", value_name = "EXPR")]
    function: String,
    #[arg(long, value_name = "X,Y", allow_hyphen_values = true)]
    at: String,
    /// Probe configuration file (key = value lines)
    #[arg(long, value_name = "FILE")]
    config: Option<String>,
    /// Override the config seed
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Emit compact single-line JSON instead of pretty-printed
    #[arg(long)]
    json: bool,
    #[arg(long = "override", value_name = "X,Y=V", allow_hyphen_values = true)]
    overrides: Vec<String>,
}

#[derive(Args)]
struct GradArgs {
    #[arg(long = "fn", value_name = "EXPR")]
    function: String,
    #[arg(long, value_name = "X,Y", allow_hyphen_values = true)]
    at: String,
    #[arg(long = "override", value_name = "X,Y=V", allow_hyphen_values = true)]
    overrides: Vec<String>,
}

#[derive(Args)]
struct RulesArgs {
    /// Points per rule check
    #[arg(long, value_name = "N", default_value_t = 50)]
    trials: usize,
    #[arg(long, value_name = "N", default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct ScanArgs {
    #[arg(long = "fn", value_name = "EXPR")]
    function: String,
    /// Scan rectangle as x0,x1,y0,y1
    #[arg(long = "box", value_name = "X0,X1,Y0,Y1", allow_hyphen_values = true)]
    bounds: String,
    /// Samples per axis (endpoints included)
    #[arg(long, value_name = "N")]
    res: usize,
    /// Output CSV path
    #[arg(long, value_name = "PATH")]
    out: String,
    #[arg(long, value_name = "FILE")]
    config: Option<String>,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    #[arg(long = "override", value_name = "X,Y=V", allow_hyphen_values = true)]
    overrides: Vec<String>,
}

enum CliError {
    /// Flag, expression, or file problems: exit 1.
    Usage(String),
    /// Collinear frames and domain errors: exit 2.
    Compute(String),
    /// One or more rule checks failed: exit 3.
    RulesFailed,
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Compute(_) => 2,
            CliError::RulesFailed => 3,
        }
    }
}

fn usage(message: impl std::fmt::Display) -> CliError {
    CliError::Usage(message.to_string())
}

fn compute(message: impl std::fmt::Display) -> CliError {
    CliError::Compute(message.to_string())
}

#[derive(Serialize)]
struct Envelope<T: Serialize> {
    schema: &'static str,
    #[serde(flatten)]
    body: T,
}

fn emit<T: Serialize>(body: T, compact: bool) {
    let envelope = Envelope {
        schema: JSON_SCHEMA,
        body,
    };
    let text = if compact {
        serde_json::to_string(&envelope).expect("serializable output")
    } else {
        serde_json::to_string_pretty(&envelope).expect("serializable output")
    };
    println!("{text}");
}

fn parse_number(s: &str) -> Result<f64, CliError> {
    s.trim()
        .parse()
        .map_err(|_| usage(format!("invalid number `{}`", s.trim())))
}

fn parse_point(s: &str) -> Result<Vec<f64>, CliError> {
    let coords: Result<Vec<f64>, CliError> = s.split(',').map(parse_number).collect();
    let coords = coords?;
    if coords.is_empty() {
        return Err(usage("empty point"));
    }
    Ok(coords)
}

fn parse_override(s: &str) -> Result<(Vec<f64>, f64), CliError> {
    let (point, value) = s
        .split_once('=')
        .ok_or_else(|| usage(format!("override `{s}` must look like `x,y=value`")))?;
    Ok((parse_point(point)?, parse_number(value)?))
}

fn build_field(expr: &str, arity: usize, overrides: &[String]) -> Result<ScalarField, CliError> {
    let mut field = ScalarField::from_expr(expr, arity).map_err(usage)?;
    for entry in overrides {
        let (point, value) = parse_override(entry)?;
        field = field.with_override(point, value).map_err(usage)?;
    }
    Ok(field)
}

fn load_config(path: Option<&str>, seed: Option<u64>) -> Result<ProbeConfig, CliError> {
    let mut config = match path {
        Some(p) => ProbeConfig::from_file(p).map_err(usage)?,
        None => ProbeConfig::default(),
    };
    if let Some(seed) = seed {
        config.seed = seed;
    }
    Ok(config)
}

#[derive(Serialize)]
struct SlopeBody {
    slope: Vec<f64>,
    conditioning: f64,
    cancellation_limited: bool,
}

fn cmd_slope(args: SlopeArgs) -> Result<(), CliError> {
    let point = parse_point(&args.at)?;
    let field = build_field(&args.function, point.len(), &args.overrides)?;
    let rows = match (&args.dirs, &args.h, &args.k) {
        (Some(dirs), None, None) => dirs
            .split(';')
            .map(parse_point)
            .collect::<Result<Vec<_>, _>>()?,
        (None, Some(h), Some(k)) => {
            if point.len() != 2 {
                return Err(usage("--h/--k need a two-dimensional point; use --dirs"));
            }
            vec![parse_point(h)?, parse_point(k)?]
        }
        _ => return Err(usage("provide either --h and --k, or --dirs")),
    };
    let frame = Frame::new(rows).map_err(compute)?;
    let detail = secant_slope_detail(&field, &point, &frame).map_err(compute)?;
    emit(
        SlopeBody {
            slope: detail.slope.components().to_vec(),
            conditioning: detail.conditioning,
            cancellation_limited: detail.cancellation_limited,
        },
        true,
    );
    Ok(())
}

fn cmd_probe(args: ProbeArgs) -> Result<(), CliError> {
    let point = parse_point(&args.at)?;
    let field = build_field(&args.function, point.len(), &args.overrides)?;
    let config = load_config(args.config.as_deref(), args.seed)?;
    let verdict = classify(&field, &point, &config).map_err(compute)?;
    emit(verdict, args.json);
    Ok(())
}

#[derive(Serialize)]
struct GradBody {
    grad: Vec<f64>,
}

fn cmd_grad(args: GradArgs) -> Result<(), CliError> {
    let point = parse_point(&args.at)?;
    let field = build_field(&args.function, point.len(), &args.overrides)?;
    let grad = planeslope::autodiff::grad(&field, &point).map_err(compute)?;
    emit(GradBody { grad }, true);
    Ok(())
}

#[derive(Serialize)]
struct RulesBody {
    seed: u64,
    trials: usize,
    all_passed: bool,
    reports: Vec<RuleReport>,
}

fn cmd_rules(args: RulesArgs) -> Result<(), CliError> {
    if args.trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    let reports = curated_reports(args.trials, args.seed);
    let all_passed = reports.iter().all(|r| r.passed);
    emit(
        RulesBody {
            seed: args.seed,
            trials: args.trials,
            all_passed,
            reports,
        },
        false,
    );
    if all_passed {
        Ok(())
    } else {
        Err(CliError::RulesFailed)
    }
}

fn cmd_scan(args: ScanArgs) -> Result<(), CliError> {
    let bounds = parse_point(&args.bounds)?;
    let [x0, x1, y0, y1] = bounds[..] else {
        return Err(usage("--box needs exactly four numbers: x0,x1,y0,y1"));
    };
    let field = build_field(&args.function, 2, &args.overrides)?;
    let grid = Grid::new(x0, x1, y0, y1, args.res).map_err(usage)?;
    let config = load_config(args.config.as_deref(), args.seed)?;
    let result = scan(&field, &grid, &config).map_err(usage)?;

    let file =
        File::create(&args.out).map_err(|e| usage(format!("cannot write `{}`: {e}", args.out)))?;
    let mut writer = BufWriter::new(file);
    result
        .write_csv(&mut writer)
        .and_then(|()| writer.flush())
        .map_err(|e| usage(format!("cannot write `{}`: {e}", args.out)))?;

    let summary = result.summary();
    println!(
        "cells={} derivable={} not_derivable={} inconclusive={} domain_error={}",
        summary.cells,
        summary.derivable,
        summary.not_derivable,
        summary.inconclusive,
        summary.domain_error
    );
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Slope(args) => cmd_slope(args),
        Command::Probe(args) => cmd_probe(args),
        Command::Grad(args) => cmd_grad(args),
        Command::Rules(args) => cmd_rules(args),
        Command::Scan(args) => cmd_scan(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::RulesFailed) => {
            eprintln!("error: one or more rule checks failed");
            ExitCode::from(3)
        }
        Err(e @ (CliError::Usage(_) | CliError::Compute(_))) => {
            let message = match &e {
                CliError::Usage(m) | CliError::Compute(m) => m.clone(),
                CliError::RulesFailed => unreachable!(),
            };
            eprintln!("error: {message}");
            ExitCode::from(e.code())
        }
    }
}
