//! Command-line front end: argument parsing, the single-run commands and
//! grid sweeps.
//!
//! Every command renders into an in-memory [`Report`] first, so the bytes
//! written for a given configuration never depend on scheduling.

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::digits::{self, ExponentY, PadicPart, PadicStream, DEFAULT_UNIT_CAP};
use crate::field::FqContext;
use crate::polygon::SegmentJson;
use crate::powersum::{self, EnumerationLimits, Method, PowerSumError, Strategy, SumValuation};
use crate::series::SeriesJson;
use crate::zeta::{self, PolynomialJson, RootJson, Stage, Verdict, ZetaError, ZetaOptions, ZetaPolynomial, DEFAULT_STREAM_CAP};

/// Stream digits consumed when `--depth` is not given.
pub const DEFAULT_DEPTH: usize = 32;
pub const DEFAULT_D_MAX: usize = 4;
/// Series precision for `powersum` when `--precision` is not given.
pub const DEFAULT_POWERSUM_PRECISION: i128 = 32;

/// Process exit codes.
pub mod exit {
    pub const PASS: u8 = 0;
    pub const MISMATCH: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const RESOURCE: u8 = 3;
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Mismatch(String),
    #[error("{0}")]
    Resource(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Mismatch(_) => exit::MISMATCH,
            CliError::Resource(_) => exit::RESOURCE,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Mismatch(_) => "mismatch",
            CliError::Resource(_) => "resource_limit",
        }
    }

    /// `{"error": {"kind", "message"}}`, as written to stderr.
    pub fn to_json(&self) -> Value {
        json!({ "error": { "kind": self.kind(), "message": self.to_string() } })
    }
}

impl From<ZetaError> for CliError {
    fn from(e: ZetaError) -> Self {
        if e.is_resource_limit() {
            CliError::Resource(e.to_string())
        } else if e.stage().is_some() {
            CliError::Mismatch(e.to_string())
        } else {
            CliError::Usage(e.to_string())
        }
    }
}

impl From<PowerSumError> for CliError {
    fn from(e: PowerSumError) -> Self {
        ZetaError::from(e).into()
    }
}

impl From<digits::DigitsError> for CliError {
    fn from(e: digits::DigitsError) -> Self {
        ZetaError::from(e).into()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

/// How the p-adic part of the exponent was given.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExponentSpec {
    /// A non-negative decimal integer.
    Decimal { m: String },
    /// Base-p digits, least significant first.
    Digits { digits: Vec<u32> },
    /// A stream spec (`repeat:1,0`, `3,1|2`, `-1`) read to `depth` digits.
    Stream { spec: String, depth: usize },
}

/// A fully resolved single-run configuration. Every default is filled in,
/// so the echo in each report is enough to reproduce the run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunConfig {
    pub p: u32,
    pub n: usize,
    pub modulus: Option<Vec<u32>>,
    pub z: i64,
    pub exponent: ExponentSpec,
    pub d_max: usize,
    /// `None` lets each command pick its documented default.
    pub precision: Option<i128>,
    pub format: Format,
    pub cap: usize,
    pub stream_cap: usize,
    pub max_tuples: u64,
    pub max_precision: i128,
    pub cross_check: bool,
}

impl RunConfig {
    pub fn context(&self) -> Result<FqContext, CliError> {
        FqContext::new(self.p, self.n, self.modulus.as_deref()).map_err(|e| CliError::Usage(e.to_string()))
    }

    pub fn exponent(&self, ctx: &FqContext) -> Result<ExponentY, CliError> {
        let p = ctx.characteristic();
        let padic = match &self.exponent {
            ExponentSpec::Decimal { m } => {
                let m: BigUint = m
                    .trim()
                    .parse()
                    .map_err(|_| CliError::Usage(format!("--m expects a non-negative integer, got {m:?}")))?;
                PadicPart::Finite(m)
            }
            ExponentSpec::Digits { digits: ds } => {
                if let Some(&c) = ds.iter().find(|&&c| c >= p) {
                    return Err(CliError::Usage(format!("digit {c} is not below the base {p}")));
                }
                PadicPart::Finite(digits::from_digits(ds, p))
            }
            ExponentSpec::Stream { spec, depth } => PadicPart::Stream(parse_stream(spec, p, *depth)?),
        };
        Ok(ExponentY::new(ctx, self.z, padic))
    }

    pub fn options(&self) -> ZetaOptions {
        ZetaOptions {
            cap: self.cap,
            stream_cap: self.stream_cap,
            limits: self.limits(),
            cross_check: self.cross_check,
        }
    }

    pub fn limits(&self) -> EnumerationLimits {
        EnumerationLimits { max_tuples: self.max_tuples, max_precision: self.max_precision }
    }
}

/// A stream spec, with `-1` as shorthand for every digit `p - 1`.
pub fn parse_stream(spec: &str, p: u32, depth: usize) -> Result<PadicStream, CliError> {
    if spec.trim() == "-1" {
        return Ok(PadicStream::minus_one(p, depth));
    }
    PadicStream::parse(spec, p, depth).map_err(|e| CliError::Usage(e.to_string()))
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, CliError> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| CliError::Usage(format!("bad {what} entry {t:?}"))))
        .collect()
}

/// Comma-separated integers and inclusive ranges `a-b`.
fn parse_ranges(s: &str, what: &str) -> Result<Vec<u64>, CliError> {
    let mut out = Vec::new();
    for t in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let bad = || CliError::Usage(format!("bad {what} entry {t:?}"));
        match t.split_once('-') {
            Some((a, b)) => {
                let a: u64 = a.trim().parse().map_err(|_| bad())?;
                let b: u64 = b.trim().parse().map_err(|_| bad())?;
                if a > b {
                    return Err(bad());
                }
                out.extend(a..=b);
            }
            None => out.push(t.parse().map_err(|_| bad())?),
        }
    }
    Ok(out)
}

#[derive(Parser, Debug)]
#[command(name = "gosszeta", version, about = "t-adic Goss zeta polynomials over F_q[t]")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Valuations v_d by every applicable method, marking disagreements.
    Valuation(RunArgs),
    /// Greedy minimal decompositions of m.
    Greedy(RunArgs),
    /// The power sums S_d modulo t^precision.
    Powersum(PowersumArgs),
    /// Newton polygon of the zeta polynomial.
    Polygon(RunArgs),
    /// Lift the zeros of the zeta polynomial, or of a polynomial read from JSON.
    Roots(RootsArgs),
    /// Full check: polygon, simplicity, lifted roots and residuals.
    Verify(RunArgs),
    /// Verify every instance of a grid, one CSV row each.
    Sweep(SweepArgs),
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    /// Characteristic.
    #[arg(long)]
    pub p: Option<u32>,
    /// Extension degree, q = p^n.
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    /// Monic modulus, constant term first, e.g. 1,1,1.
    #[arg(long)]
    pub modulus: Option<String>,
    /// Residue part of the exponent, taken mod q - 1.
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    pub z: i64,
    /// p-adic part as a decimal integer.
    #[arg(long)]
    pub m: Option<String>,
    /// p-adic part as base-p digits, least significant first.
    #[arg(long)]
    pub m_digits: Option<String>,
    /// p-adic part as a digit stream: repeat:DIGITS, PREFIX|PERIOD, or -1.
    #[arg(long, allow_hyphen_values = true)]
    pub m_stream: Option<String>,
    /// Stream digits available to stabilization.
    #[arg(long, default_value_t = DEFAULT_DEPTH)]
    pub depth: usize,
    /// Largest degree for stream exponents and tables.
    #[arg(long, default_value_t = DEFAULT_D_MAX)]
    pub d_max: usize,
    /// Target precision in t-digits.
    #[arg(long, allow_hyphen_values = true)]
    pub precision: Option<i128>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Digit-unit cap for the combinatorial evaluator.
    #[arg(long, default_value_t = DEFAULT_UNIT_CAP)]
    pub cap: usize,
    /// Cap on movable digit units when expanding stream truncations.
    #[arg(long, default_value_t = DEFAULT_STREAM_CAP)]
    pub stream_cap: usize,
    /// Largest number of polynomials the enumeration may walk.
    #[arg(long, default_value_t = EnumerationLimits::default().max_tuples)]
    pub max_tuples: u64,
    /// Ceiling for the enumeration's precision.
    #[arg(long, default_value_t = EnumerationLimits::default().max_precision)]
    pub max_precision: i128,
    /// Skip the independent enumeration check of zeta coefficients.
    #[arg(long)]
    pub no_cross_check: bool,
}

impl RunArgs {
    /// Resolves defaults into a [`RunConfig`]; `format` is the command's own
    /// default when `--format` is absent.
    pub fn config(&self, format: Format) -> Result<RunConfig, CliError> {
        let p = self.p.ok_or_else(|| CliError::Usage("--p is required".into()))?;
        let given = [self.m.is_some(), self.m_digits.is_some(), self.m_stream.is_some()];
        if given.iter().filter(|&&g| g).count() != 1 {
            return Err(CliError::Usage("give exactly one of --m, --m-digits, --m-stream".into()));
        }
        let exponent = if let Some(m) = &self.m {
            ExponentSpec::Decimal { m: m.trim().to_string() }
        } else if let Some(ds) = &self.m_digits {
            ExponentSpec::Digits { digits: parse_list(ds, "--m-digits")? }
        } else {
            let spec = self.m_stream.clone().unwrap_or_default();
            ExponentSpec::Stream { spec: spec.trim().to_string(), depth: self.depth }
        };
        let modulus = self.modulus.as_deref().map(|s| parse_list(s, "--modulus")).transpose()?;
        Ok(RunConfig {
            p,
            n: self.n,
            modulus,
            z: self.z,
            exponent,
            d_max: self.d_max,
            precision: self.precision,
            format: self.format.unwrap_or(format),
            cap: self.cap,
            stream_cap: self.stream_cap,
            max_tuples: self.max_tuples,
            max_precision: self.max_precision,
            cross_check: !self.no_cross_check,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum MethodChoice {
    /// Combinatorial, falling back to enumeration at the unit cap.
    Auto,
    Combinatorial,
    Enumeration,
}

#[derive(Args, Debug, Clone)]
pub struct PowersumArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_enum, default_value_t = MethodChoice::Auto)]
    pub method: MethodChoice,
}

#[derive(Args, Debug, Clone)]
pub struct RootsArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Polynomial in JSON form `{p, n, modulus?, coefficients}` instead of
    /// an exponent.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct SweepArgs {
    /// Field orders, e.g. 2,3,4.
    #[arg(long)]
    pub q: String,
    /// Residues z; all of 0..q-1 when absent.
    #[arg(long)]
    pub z: Option<String>,
    /// Finite exponents: integers and ranges, e.g. 1-20,33.
    #[arg(long)]
    pub m: Option<String>,
    /// Stream exponents separated by ';', e.g. "-1;repeat:1,0".
    #[arg(long, allow_hyphen_values = true)]
    pub m_stream: Option<String>,
    /// Stream digits available to stabilization.
    #[arg(long, default_value_t = DEFAULT_DEPTH)]
    pub depth: usize,
    /// Largest degree for stream exponents.
    #[arg(long, default_value_t = DEFAULT_D_MAX)]
    pub d_max: usize,
    /// Target root precision in t-digits; per-instance default when absent.
    #[arg(long)]
    pub precision: Option<i128>,
    /// Report format; CSV when absent.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Digit-unit cap for the combinatorial evaluator.
    #[arg(long, default_value_t = DEFAULT_UNIT_CAP)]
    pub cap: usize,
    /// Cap on movable digit units when expanding stream truncations.
    #[arg(long, default_value_t = DEFAULT_STREAM_CAP)]
    pub stream_cap: usize,
    /// Largest number of polynomials the enumeration may walk.
    #[arg(long, default_value_t = EnumerationLimits::default().max_tuples)]
    pub max_tuples: u64,
    /// Ceiling for the enumeration's precision.
    #[arg(long, default_value_t = EnumerationLimits::default().max_precision)]
    pub max_precision: i128,
    /// Skip the enumeration check of zeta coefficients.
    #[arg(long)]
    pub no_cross_check: bool,
}

/// A rendered document and whether the run passed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    pub body: String,
    pub passed: bool,
}

impl Report {
    pub fn exit_code(&self) -> u8 {
        if self.passed {
            exit::PASS
        } else {
            exit::MISMATCH
        }
    }
}

fn render_json(v: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

fn render_csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

/// Parses `args` (including the program name), runs the command, writes
/// the report to `--out` or `stdout` and errors to `stderr` as JSON.
/// Returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => exit::PASS,
                _ => exit::USAGE,
            };
            let _ = if code == exit::PASS {
                write!(stdout, "{}", e.render())
            } else {
                write!(stderr, "{}", e.render())
            };
            return code;
        }
    };
    let out = match &cli.command {
        Command::Valuation(a) | Command::Greedy(a) | Command::Polygon(a) | Command::Verify(a) => a.out.clone(),
        Command::Powersum(a) => a.run.out.clone(),
        Command::Roots(a) => a.run.out.clone(),
        Command::Sweep(a) => a.out.clone(),
    };
    match execute(&cli.command) {
        Ok(report) => {
            let written = match &out {
                Some(path) => std::fs::write(path, &report.body).map_err(|e| e.to_string()),
                None => stdout.write_all(report.body.as_bytes()).map_err(|e| e.to_string()),
            };
            match written {
                Ok(()) => report.exit_code(),
                Err(e) => {
                    let err = CliError::Usage(format!("cannot write report: {e}"));
                    let _ = writeln!(stderr, "{}", err.to_json());
                    err.exit_code()
                }
            }
        }
        Err(err) => {
            let _ = writeln!(stderr, "{}", err.to_json());
            err.exit_code()
        }
    }
}

/// Runs a parsed command.
pub fn execute(command: &Command) -> Result<Report, CliError> {
    match command {
        Command::Valuation(a) => cmd_valuation(&a.config(Format::Csv)?),
        Command::Greedy(a) => cmd_greedy(&a.config(Format::Json)?),
        Command::Powersum(a) => cmd_powersum(&a.run.config(Format::Json)?, a.method),
        Command::Polygon(a) => cmd_polygon(&a.config(Format::Json)?),
        Command::Roots(a) => match &a.input {
            Some(path) => {
                let format = a.run.format.unwrap_or(Format::Json);
                cmd_roots_input(path, a.run.precision, format)
            }
            None => cmd_roots(&a.run.config(Format::Json)?),
        },
        Command::Verify(a) => cmd_verify(&a.config(Format::Json)?),
        Command::Sweep(a) => cmd_sweep(a),
    }
}

/// One cell of the valuation table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Cell {
    Exact(i128),
    ExactZero,
    AtLeast(i128),
    /// The method ran into a resource limit.
    Skipped(String),
    NotApplicable,
}

impl From<SumValuation> for Cell {
    fn from(v: SumValuation) -> Self {
        match v {
            SumValuation::Exact(v) => Cell::Exact(v),
            SumValuation::ExactZero => Cell::ExactZero,
            SumValuation::AtLeast(n) => Cell::AtLeast(n),
        }
    }
}

impl Cell {
    fn valuation(&self) -> Option<SumValuation> {
        match *self {
            Cell::Exact(v) => Some(SumValuation::Exact(v)),
            Cell::ExactZero => Some(SumValuation::ExactZero),
            Cell::AtLeast(n) => Some(SumValuation::AtLeast(n)),
            _ => None,
        }
    }

    fn from_result(r: Result<SumValuation, PowerSumError>) -> Result<Cell, CliError> {
        match r {
            Ok(v) => Ok(v.into()),
            Err(e) if e.is_resource_limit() => Ok(Cell::Skipped(e.to_string())),
            Err(e) => Err(e.into()),
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Exact(v) => write!(f, "{v}"),
            Cell::ExactZero => write!(f, "zero"),
            Cell::AtLeast(n) => write!(f, ">={n}"),
            Cell::Skipped(_) => write!(f, "skipped"),
            Cell::NotApplicable => write!(f, "n/a"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ValuationRow {
    pub d: usize,
    pub greedy: Cell,
    pub closed_form: Cell,
    pub enumeration: Cell,
    pub combinatorial: Cell,
    /// Stream digits at which the greedy weight stabilized.
    pub depth: Option<usize>,
    pub agree: bool,
}

fn agree(cells: &[&Cell]) -> bool {
    let vals: Vec<SumValuation> = cells.iter().filter_map(|c| c.valuation()).collect();
    vals.iter().enumerate().all(|(i, a)| vals[i + 1..].iter().all(|b| a.consistent_with(*b)))
}

fn closed_form_cell(ctx: &FqContext, y: &ExponentY, d: usize) -> Result<Cell, CliError> {
    if ctx.degree() != 1 {
        return Ok(Cell::NotApplicable);
    }
    Cell::from_result(
        digits::closed_form_valuation(ctx, y, d)
            .map_err(PowerSumError::from)
            .and_then(|w| SumValuation::from_weight(w.as_ref())),
    )
}

fn valuation_rows(cfg: &RunConfig, ctx: &FqContext, y: &ExponentY) -> Result<Vec<ValuationRow>, CliError> {
    let limits = cfg.limits();
    match y.padic() {
        PadicPart::Finite(_) => (0..=cfg.d_max)
            .map(|d| {
                let greedy = Cell::from_result(
                    digits::greedy_decomposition(ctx, y, d)
                        .map_err(PowerSumError::from)
                        .and_then(|dec| SumValuation::from_weight(dec.as_ref().map(|x| x.weight()))),
                )?;
                let closed_form = closed_form_cell(ctx, y, d)?;
                let enumeration =
                    Cell::from_result(powersum::valuation_of_power_sum(ctx, d, y, Strategy::Enumeration(limits)))?;
                let combinatorial = Cell::from_result(powersum::valuation_of_power_sum(
                    ctx,
                    d,
                    y,
                    Strategy::Combinatorial { cap: cfg.cap },
                ))?;
                let ok = agree(&[&greedy, &closed_form, &enumeration, &combinatorial]);
                Ok(ValuationRow { d, greedy, closed_form, enumeration, combinatorial, depth: None, agree: ok })
            })
            .collect(),
        PadicPart::Stream(stream) => {
            let stab = zeta::stabilized_valuations(ctx, y, cfg.d_max)?;
            stab.iter()
                .map(|s| {
                    let greedy = Cell::from_result(SumValuation::from_weight(s.weight.as_ref()))?;
                    let truncation = ExponentY::new(
                        ctx,
                        y.residue() as i64,
                        PadicPart::Finite(stream.truncation(s.depth, ctx.characteristic())?),
                    );
                    let closed_form = closed_form_cell(ctx, &truncation, s.d)?;
                    let (enumeration, combinatorial) = match greedy.valuation().and_then(SumValuation::exact) {
                        Some(v) => {
                            let enumerated = match zeta::padic_power_sum(ctx, s.d, y, v + 1, &limits) {
                                Ok(series) => Cell::from(match series.valuation().exact() {
                                    Some(v) => SumValuation::Exact(v),
                                    None => SumValuation::AtLeast(v + 1),
                                }),
                                Err(e) if e.is_resource_limit() => Cell::Skipped(e.to_string()),
                                Err(e) => return Err(e.into()),
                            };
                            let expanded = match zeta::stream_power_sum(ctx, s.d, y, v + 1, cfg.stream_cap) {
                                // no term below the cutoff only bounds the valuation
                                Ok(x) if x.is_zero() => Cell::AtLeast(v + 1),
                                Ok(x) => x.valuation().into(),
                                Err(e) if e.is_resource_limit() => Cell::Skipped(e.to_string()),
                                Err(e) => return Err(e.into()),
                            };
                            (enumerated, expanded)
                        }
                        None => (Cell::NotApplicable, Cell::NotApplicable),
                    };
                    let ok = agree(&[&greedy, &closed_form, &enumeration, &combinatorial]);
                    Ok(ValuationRow {
                        d: s.d,
                        greedy,
                        closed_form,
                        enumeration,
                        combinatorial,
                        depth: Some(s.depth),
                        agree: ok,
                    })
                })
                .collect()
        }
    }
}

/// `cmd_valuation`: one row per degree with every method's answer.
pub fn cmd_valuation(cfg: &RunConfig) -> Result<Report, CliError> {
    let ctx = cfg.context()?;
    let y = cfg.exponent(&ctx)?;
    let rows = valuation_rows(cfg, &ctx, &y)?;
    let passed = rows.iter().all(|r| r.agree);
    let body = match cfg.format {
        Format::Json => render_json(&json!({ "params": cfg, "rows": rows, "agree": passed })),
        Format::Csv => render_csv(
            &["d", "greedy", "closed_form", "enumeration", "combinatorial", "agree"],
            &rows
                .iter()
                .map(|r| {
                    vec![
                        r.d.to_string(),
                        r.greedy.to_string(),
                        r.closed_form.to_string(),
                        r.enumeration.to_string(),
                        r.combinatorial.to_string(),
                        r.agree.to_string(),
                    ]
                })
                .collect::<Vec<_>>(),
        ),
    };
    Ok(Report { body, passed })
}

fn require_finite(y: &ExponentY, command: &str) -> Result<(), CliError> {
    match y.padic() {
        PadicPart::Finite(_) => Ok(()),
        PadicPart::Stream(_) => Err(CliError::Usage(format!("{command} needs a finite exponent (--m or --m-digits)"))),
    }
}

/// `cmd_greedy`: the greedy decomposition for each degree up to `d_max`.
pub fn cmd_greedy(cfg: &RunConfig) -> Result<Report, CliError> {
    let ctx = cfg.context()?;
    let y = cfg.exponent(&ctx)?;
    require_finite(&y, "greedy")?;
    let decs = (0..=cfg.d_max)
        .map(|d| digits::greedy_decomposition(&ctx, &y, d).map(|dec| (d, dec)))
        .collect::<Result<Vec<_>, _>>()?;
    let body = match cfg.format {
        Format::Json => {
            let list: Vec<_> = decs.iter().map(|(d, dec)| digits::Decomposition::to_json(dec.as_ref(), *d)).collect();
            render_json(&json!({ "params": cfg, "decompositions": list }))
        }
        Format::Csv => render_csv(
            &["d", "exists", "weight", "parts"],
            &decs
                .iter()
                .map(|(d, dec)| match dec {
                    Some(dec) => vec![
                        d.to_string(),
                        "true".into(),
                        dec.weight().to_string(),
                        dec.parts().iter().map(|k| k.to_string()).collect::<Vec<_>>().join(";"),
                    ],
                    None => vec![d.to_string(), "false".into(), String::new(), String::new()],
                })
                .collect::<Vec<_>>(),
        ),
    };
    Ok(Report { body, passed: true })
}

#[derive(Clone, Debug, Serialize)]
struct PowerSumRow {
    d: usize,
    method: Method,
    valuation: SumValuation,
    series: SeriesJson,
}

/// `cmd_powersum`: `S_d` modulo `t^precision` for each degree up to `d_max`.
pub fn cmd_powersum(cfg: &RunConfig, method: MethodChoice) -> Result<Report, CliError> {
    let ctx = cfg.context()?;
    let y = cfg.exponent(&ctx)?;
    let precision = cfg.precision.unwrap_or(DEFAULT_POWERSUM_PRECISION);
    if precision < 1 {
        return Err(CliError::Usage("--precision must be positive".into()));
    }
    let limits = cfg.limits();
    let mut rows = Vec::new();
    for d in 0..=cfg.d_max {
        let row = match y.padic() {
            PadicPart::Stream(_) => {
                let exact = zeta::stream_power_sum(&ctx, d, &y, precision, cfg.stream_cap)?;
                let series = exact.to_series(&ctx, precision);
                let valuation = match series.valuation().exact() {
                    Some(v) => SumValuation::Exact(v),
                    None => SumValuation::AtLeast(precision),
                };
                PowerSumRow { d, method: Method::Combinatorial, valuation, series: series.to_json(&ctx) }
            }
            PadicPart::Finite(_) => {
                let combinatorial = || powersum::power_sum_combinatorial_truncated(&ctx, d, &y, precision, cfg.cap);
                let enumeration = || powersum::power_sum_enumeration(&ctx, d, &y, precision, &limits);
                let res = match method {
                    MethodChoice::Combinatorial => combinatorial()?,
                    MethodChoice::Enumeration => enumeration()?,
                    MethodChoice::Auto => match combinatorial() {
                        Err(e) if e.is_resource_limit() => enumeration()?,
                        other => other?,
                    },
                };
                PowerSumRow { d, method: res.method, valuation: res.valuation, series: res.series.to_json(&ctx) }
            }
        };
        rows.push(row);
    }
    let body = match cfg.format {
        Format::Json => render_json(&json!({ "params": cfg, "precision": precision, "sums": rows })),
        Format::Csv => render_csv(
            &["d", "method", "valuation", "lead_val", "precision", "coeffs"],
            &rows
                .iter()
                .map(|r| {
                    vec![
                        r.d.to_string(),
                        serde_json::to_value(r.method).unwrap().as_str().unwrap_or_default().to_string(),
                        r.valuation.to_string(),
                        r.series.lead_val.to_string(),
                        r.series.precision.to_string(),
                        r.series.coeffs.iter().map(|c| coords(c)).collect::<Vec<_>>().join(" "),
                    ]
                })
                .collect::<Vec<_>>(),
        ),
    };
    Ok(Report { body, passed: true })
}

/// A field element's power-basis coordinates for CSV, e.g. `1:0:1`.
fn coords(c: &[u32]) -> String {
    c.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(":")
}

fn build_zeta(cfg: &RunConfig, ctx: &FqContext, y: &ExponentY) -> Result<ZetaPolynomial, CliError> {
    let opts = cfg.options();
    Ok(match y.padic() {
        PadicPart::Finite(_) => zeta::zeta_polynomial(ctx, y, &opts)?,
        PadicPart::Stream(_) => zeta::stream_zeta_polynomial(ctx, y, cfg.d_max, &opts)?,
    })
}

fn slope_text(s: &SegmentJson) -> String {
    if s.slope[1] == 1 {
        s.slope[0].to_string()
    } else {
        format!("{}/{}", s.slope[0], s.slope[1])
    }
}

/// `cmd_polygon`: the Newton polygon of the zeta polynomial.
pub fn cmd_polygon(cfg: &RunConfig) -> Result<Report, CliError> {
    let ctx = cfg.context()?;
    let y = cfg.exponent(&ctx)?;
    let zp = build_zeta(cfg, &ctx, &y)?;
    let np = zp.polygon()?;
    let pj = np.to_json();
    let body = match cfg.format {
        Format::Json => render_json(&json!({
            "params": cfg,
            "degree": zp.degree(),
            "valuations": zp.valuations(),
            "points": pj.points,
            "segments": pj.segments,
            "simple": pj.simple,
        })),
        Format::Csv => render_csv(
            &["start", "width", "slope"],
            &np.segments()
                .iter()
                .zip(&pj.segments)
                .map(|(s, sj)| vec![s.start.to_string(), s.width.to_string(), slope_text(sj)])
                .collect::<Vec<_>>(),
        ),
    };
    Ok(Report { body, passed: true })
}

fn roots_body(
    ctx: &FqContext,
    params: Value,
    zp: &ZetaPolynomial,
    target: Option<i128>,
    format: Format,
) -> Result<Report, CliError> {
    let report = zeta::find_roots(ctx, zp, target).map_err(|e| match e {
        // the input polynomial, not the mathematics, is at fault
        ZetaError::WidthNotOne { .. } | ZetaError::ZeroConstantTerm => CliError::Usage(e.to_string()),
        other => other.into(),
    })?;
    let passed = report.roots.len() == zp.degree() && report.roots.iter().all(|r| r.certified());
    let roots: Vec<RootJson> = report.roots.iter().map(|r| r.to_json(ctx)).collect();
    let body = match format {
        Format::Json => render_json(&json!({
            "params": params,
            "degree": zp.degree(),
            "precision": report.precision,
            "simple": report.simple,
            "roots": roots,
        })),
        Format::Csv => render_csv(
            &["valuation", "residual", "bound", "certified", "lead_val", "precision", "coeffs"],
            &report
                .roots
                .iter()
                .zip(&roots)
                .map(|(r, j)| {
                    vec![
                        r.valuation.to_string(),
                        r.residual.to_string(),
                        r.bound.to_string(),
                        r.certified().to_string(),
                        j.series.lead_val.to_string(),
                        j.series.precision.to_string(),
                        j.series.coeffs.iter().map(|c| coords(c)).collect::<Vec<_>>().join(" "),
                    ]
                })
                .collect::<Vec<_>>(),
        ),
    };
    Ok(Report { body, passed })
}

/// `cmd_roots`: lifted zeros of the zeta polynomial.
pub fn cmd_roots(cfg: &RunConfig) -> Result<Report, CliError> {
    let ctx = cfg.context()?;
    let y = cfg.exponent(&ctx)?;
    let zp = build_zeta(cfg, &ctx, &y)?;
    let params = serde_json::to_value(cfg).expect("config serializes");
    roots_body(&ctx, params, &zp, cfg.precision, cfg.format)
}

/// `roots --input`: lifted zeros of a polynomial given in JSON.
pub fn cmd_roots_input(path: &std::path::Path, precision: Option<i128>, format: Format) -> Result<Report, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let poly: PolynomialJson =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("bad polynomial JSON: {e}")))?;
    let ctx = FqContext::new(poly.p, poly.n as usize, poly.modulus.as_deref())
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let zp = ZetaPolynomial::from_laurent(&ctx, &poly.coefficients).map_err(|e| CliError::Usage(e.to_string()))?;
    let params = json!({ "input": poly, "precision": precision });
    roots_body(&ctx, params, &zp, precision, format)
}

/// The verify document `{params, degree, valuations, segments, roots,
/// simple, verdict, ...}`.
pub fn verdict_json(ctx: &FqContext, params: Value, v: &Verdict) -> Value {
    let segments: Vec<SegmentJson> = v.polygon.as_ref().map(|np| np.to_json().segments).unwrap_or_default();
    json!({
        "params": params,
        "degree": v.degree,
        "valuations": v.valuations,
        "segments": segments,
        "roots": v.roots.iter().map(|r| r.to_json(ctx)).collect::<Vec<_>>(),
        "simple": v.simple,
        "verdict": v.verdict,
        "failure": v.failure.as_ref().map(|(stage, detail)| json!({ "stage": stage, "detail": detail })),
        "precision": v.precision,
        "stabilization_depth": v.stabilization_depth,
        "cross_checked": v.cross_checked,
    })
}

fn valuations_text(vals: &[SumValuation]) -> String {
    vals.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}

/// `cmd_verify`: the full check for one exponent.
pub fn cmd_verify(cfg: &RunConfig) -> Result<Report, CliError> {
    let ctx = cfg.context()?;
    let y = cfg.exponent(&ctx)?;
    let v = zeta::verify_rh(&ctx, &y, cfg.d_max, cfg.precision, &cfg.options())?;
    let body = match cfg.format {
        Format::Json => {
            let params = serde_json::to_value(cfg).expect("config serializes");
            render_json(&verdict_json(&ctx, params, &v))
        }
        Format::Csv => render_csv(
            &["degree", "valuations", "simple", "roots", "precision", "verdict", "stage"],
            &[vec![
                v.degree.to_string(),
                valuations_text(&v.valuations),
                v.simple.to_string(),
                v.roots.len().to_string(),
                v.precision.to_string(),
                v.verdict.to_string(),
                stage_text(&v),
            ]],
        ),
    };
    Ok(Report { body, passed: v.verdict })
}

fn stage_text(v: &Verdict) -> String {
    v.failure
        .as_ref()
        .map(|(s, _)| serde_json::to_value(s).unwrap().as_str().unwrap_or_default().to_string())
        .unwrap_or_default()
}

/// Outcome of one sweep instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Pass,
    Fail,
    /// A resource cap was hit; neither a pass nor a failure.
    CapExceeded,
    /// A stream exponent did not stabilize within the digit depth.
    NotStabilized,
    /// The instance could not be set up.
    Error,
}

impl fmt::Display for RowStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RowStatus::Pass => "pass",
            RowStatus::Fail => "fail",
            RowStatus::CapExceeded => "cap_exceeded",
            RowStatus::NotStabilized => "not_stabilized",
            RowStatus::Error => "error",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SweepRow {
    pub q: u32,
    pub z: u64,
    pub exponent: String,
    pub degree: Option<usize>,
    pub valuations: String,
    pub simple: Option<bool>,
    pub verdict: Option<bool>,
    pub stabilization_depth: Option<usize>,
    pub status: RowStatus,
    pub detail: String,
}

#[derive(Clone, Debug)]
struct Instance {
    q: u32,
    z: u64,
    exponent: SweepExponent,
}

#[derive(Clone, Debug)]
enum SweepExponent {
    Finite(u64),
    Stream(String),
}

fn sweep_grid(a: &SweepArgs) -> Result<Vec<Instance>, CliError> {
    let qs: Vec<u32> = parse_list(&a.q, "--q")?;
    let ms = a.m.as_deref().map(|s| parse_ranges(s, "--m")).transpose()?.unwrap_or_default();
    let streams: Vec<String> = a
        .m_stream
        .as_deref()
        .map(|s| s.split(';').map(str::trim).filter(|t| !t.is_empty()).map(String::from).collect())
        .unwrap_or_default();
    let zs = a.z.as_deref().map(|s| parse_ranges(s, "--z")).transpose()?;
    let mut grid = Vec::new();
    for &q in &qs {
        FqContext::with_order(q).map_err(|e| CliError::Usage(format!("q = {q}: {e}")))?;
        let residues: Vec<u64> = match &zs {
            Some(list) => list.clone(),
            None => (0..(q as u64 - 1).max(1)).collect(),
        };
        for &z in &residues {
            for &m in &ms {
                grid.push(Instance { q, z, exponent: SweepExponent::Finite(m) });
            }
            for s in &streams {
                grid.push(Instance { q, z, exponent: SweepExponent::Stream(s.clone()) });
            }
        }
    }
    Ok(grid)
}

fn sweep_row(a: &SweepArgs, inst: &Instance) -> SweepRow {
    let label = match &inst.exponent {
        SweepExponent::Finite(m) => m.to_string(),
        SweepExponent::Stream(s) => s.clone(),
    };
    let mut row = SweepRow {
        q: inst.q,
        z: inst.z,
        exponent: label,
        degree: None,
        valuations: String::new(),
        simple: None,
        verdict: None,
        stabilization_depth: None,
        status: RowStatus::Error,
        detail: String::new(),
    };
    let ctx = FqContext::with_order(inst.q).expect("grid fields were checked");
    let padic = match &inst.exponent {
        SweepExponent::Finite(m) => PadicPart::Finite(BigUint::from(*m)),
        SweepExponent::Stream(s) => match parse_stream(s, ctx.characteristic(), a.depth) {
            Ok(stream) => PadicPart::Stream(stream),
            Err(e) => {
                row.detail = e.to_string();
                return row;
            }
        },
    };
    let y = ExponentY::new(&ctx, inst.z as i64, padic);
    let opts = ZetaOptions {
        cap: a.cap,
        stream_cap: a.stream_cap,
        limits: EnumerationLimits { max_tuples: a.max_tuples, max_precision: a.max_precision },
        cross_check: !a.no_cross_check,
    };
    match zeta::verify_rh(&ctx, &y, a.d_max, a.precision, &opts) {
        Ok(v) => {
            row.degree = Some(v.degree);
            row.valuations = valuations_text(&v.valuations);
            row.simple = Some(v.simple);
            row.verdict = Some(v.verdict);
            row.stabilization_depth = v.stabilization_depth;
            row.status = match &v.failure {
                None => RowStatus::Pass,
                Some((Stage::Stabilization, _)) => RowStatus::NotStabilized,
                Some(_) => RowStatus::Fail,
            };
            row.detail = v.failure.map(|(_, d)| d).unwrap_or_default();
        }
        Err(e) => {
            row.status = if e.is_resource_limit() { RowStatus::CapExceeded } else { RowStatus::Error };
            row.detail = e.to_string();
        }
    }
    row
}

/// Pass/fail counts over a sweep.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SweepSummary {
    pub rows: usize,
    pub pass: usize,
    pub fail: usize,
    pub cap_exceeded: usize,
    pub not_stabilized: usize,
    pub error: usize,
}

/// Runs every grid instance, in parallel, and returns rows in grid order.
pub fn sweep_rows(a: &SweepArgs) -> Result<Vec<SweepRow>, CliError> {
    let grid = sweep_grid(a)?;
    Ok(grid.par_iter().map(|inst| sweep_row(a, inst)).collect())
}

pub fn summarize(rows: &[SweepRow]) -> SweepSummary {
    let mut s = SweepSummary { rows: rows.len(), ..Default::default() };
    for r in rows {
        match r.status {
            RowStatus::Pass => s.pass += 1,
            RowStatus::Fail => s.fail += 1,
            RowStatus::CapExceeded => s.cap_exceeded += 1,
            RowStatus::NotStabilized => s.not_stabilized += 1,
            RowStatus::Error => s.error += 1,
        }
    }
    s
}

fn opt_text<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(T::to_string).unwrap_or_default()
}

/// `cmd_sweep`: one row per grid instance. Fails if any row fails or errors;
/// capped and unstabilized rows are reported but do not fail the sweep.
pub fn cmd_sweep(a: &SweepArgs) -> Result<Report, CliError> {
    let rows = sweep_rows(a)?;
    let summary = summarize(&rows);
    let passed = summary.fail == 0 && summary.error == 0;
    let body = match a.format.unwrap_or(Format::Csv) {
        Format::Json => render_json(&json!({ "summary": summary, "rows": rows })),
        Format::Csv => render_csv(
            &[
                "q",
                "z",
                "exponent",
                "degree",
                "valuations",
                "simple",
                "verdict",
                "stabilization_depth",
                "status",
                "detail",
            ],
            &rows
                .iter()
                .map(|r| {
                    vec![
                        r.q.to_string(),
                        r.z.to_string(),
                        r.exponent.clone(),
                        opt_text(&r.degree),
                        r.valuations.clone(),
                        opt_text(&r.simple),
                        opt_text(&r.verdict),
                        opt_text(&r.stabilization_depth),
                        r.status.to_string(),
                        r.detail.clone(),
                    ]
                })
                .collect::<Vec<_>>(),
        ),
    };
    Ok(Report { body, passed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(line: &str) -> Vec<String> {
        std::iter::once("gosszeta".to_string())
            .chain(line.split_whitespace().map(String::from))
            .collect()
    }

    fn run_line(line: &str) -> (u8, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(args(line), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    fn config(line: &str) -> RunConfig {
        let cli = Cli::try_parse_from(args(line)).unwrap();
        match cli.command {
            Command::Verify(a) => a.config(Format::Json).unwrap(),
            _ => unreachable!(),
        }
    }

    #[test]
    fn config_round_trips() {
        for line in [
            "verify --p 3 --z 1 --m 8",
            "verify --p 2 --n 2 --modulus 1,1,1 --m-digits 1,0,1 --precision 40 --format csv",
            "verify --p 5 --z 3 --m-stream repeat:1,0 --depth 30 --d-max 3 --no-cross-check",
        ] {
            let cfg = config(line);
            let text = serde_json::to_string(&cfg).unwrap();
            let back: RunConfig = serde_json::from_str(&text).unwrap();
            assert_eq!(back, cfg);
        }
    }

    #[test]
    fn defaults_are_explicit() {
        let cfg = serde_json::to_value(config("verify --p 3 --m 8")).unwrap();
        for key in ["n", "z", "d_max", "format", "cap", "stream_cap", "max_tuples", "max_precision", "cross_check"] {
            assert!(!cfg[key].is_null(), "{key} missing from the echo");
        }
        assert_eq!(cfg["exponent"], json!({"kind": "decimal", "m": "8"}));
    }

    #[test]
    fn exponent_forms_agree() {
        let ctx = FqContext::prime(3).unwrap();
        let a = config("verify --p 3 --m 8").exponent(&ctx).unwrap();
        let b = config("verify --p 3 --m-digits 2,2").exponent(&ctx).unwrap();
        assert_eq!(a, b);
        let s = config("verify --p 3 --m-stream -1").exponent(&ctx).unwrap();
        assert_eq!(s.padic(), &PadicPart::Stream(PadicStream::minus_one(3, DEFAULT_DEPTH)));
    }

    #[test]
    fn valuation_table() {
        let (code, out, _) = run_line("valuation --p 3 --z 1 --m 8 --d-max 3");
        assert_eq!(code, exit::PASS);
        let greedy: Vec<&str> = out.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
        assert_eq!(greedy, ["0", "1", "6", "zero"]);
        assert!(out.lines().skip(1).all(|l| l.ends_with(",true")));
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run_line("verify --p 3").0, exit::USAGE);
        assert_eq!(run_line("verify --p 3 --m 1 --m-digits 1").0, exit::USAGE);
        assert_eq!(run_line("verify --p 4 --m 1").0, exit::USAGE);
        assert_eq!(run_line("verify --p 3 --m-digits 3").0, exit::USAGE);
        assert_eq!(run_line("frobnicate").0, exit::USAGE);
        let (code, _, err) = run_line("greedy --p 3 --m-stream -1");
        assert_eq!(code, exit::USAGE);
        let v: Value = serde_json::from_str(err.trim()).unwrap();
        assert_eq!(v["error"]["kind"], "usage");
    }

    #[test]
    fn cap_exits_3() {
        // 2^40 - 1 has 40 digit units
        let (code, _, err) = run_line("verify --p 2 --m 1099511627775 --cap 10 --max-tuples 10");
        assert_eq!(code, exit::RESOURCE, "{err}");
    }

    #[test]
    fn ranges_parse() {
        assert_eq!(parse_ranges("1-3, 7", "m").unwrap(), vec![1, 2, 3, 7]);
        assert!(parse_ranges("3-1", "m").is_err());
        assert!(parse_ranges("x", "m").is_err());
        assert!(parse_ranges("", "m").unwrap().is_empty());
    }
}
