//! Command-line front end: argument parsing, subcommand dispatch and table output.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::asymptotics::{
    cf_from_sequence, detect_thresholds, product_entry, psi, ratio_diagnostics,
    spectral_radius_ratio, Entry, DEFAULT_SCAN_CAP,
};
use crate::contfrac::{tails_range, TailOptions};
use crate::error::{Error, Result};
use crate::mat2::{eigenvalues, validate_limit_matrix, Mat2};
use crate::scaled::ScaledEntry;
use crate::selftest::{run_certification, SelftestConfig};
use crate::sequences::{load_sequence, Decay, Format, MatrixSequence, MatrixSource};

#[derive(Debug, Parser)]
#[command(
    name = "cfmp",
    version,
    about = "Asymptotics of products of nonnegative 2x2 matrices"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Eigenvalues of the limit matrix.
    Eigen(CommonArgs),
    /// Hypothesis report for the limit matrix.
    Validate(CommonArgs),
    /// Tails ξ_k with error bounds over a k-range.
    Tails(CommonArgs),
    /// Π(k,n) against its limit ψ for n = 1..n-max.
    Ratio(CommonArgs),
    /// ψ·∏ξ⁻¹ against the directly computed product entry.
    ApproxEntry(CommonArgs),
    /// Tail-normalized and spectral-radius-normalized products side by side.
    CompareSpectral(CommonArgs),
    /// Float-vs-exact certification suite.
    Selftest(SelftestArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Sequence file (.csv/.json) or model: fib, const:a,b,d,t,
    /// power:a,b,d,t:ea,eb,ed,et:p, geom:a,b,d,t:ea,eb,ed,et:q
    #[arg(long, default_value = "fib")]
    pub seq: String,
    #[arg(long, default_value_t = 0)]
    pub k: usize,
    /// Inclusive range `A..B` (tails only; defaults to `k..k` with k ≥ 1).
    #[arg(long, value_parser = parse_range)]
    pub k_range: Option<(usize, usize)>,
    #[arg(long, default_value_t = 60)]
    pub n_max: usize,
    #[arg(long, default_value_t = 1e-14)]
    pub tol: f64,
    #[arg(long, default_value = "11")]
    pub entry: Entry,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = OutFormat::Csv)]
    pub format: OutFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SelftestArgs {
    #[arg(long, default_value_t = SelftestConfig::default().seed)]
    pub seed: u64,
    #[arg(long, default_value_t = SelftestConfig::default().cases)]
    pub cases: usize,
    #[arg(long, default_value_t = SelftestConfig::default().max_depth)]
    pub depth: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutFormat {
    Csv,
    Json,
}

fn parse_range(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("expected A..B, got {s:?}"))?;
    let a: usize = a
        .trim()
        .parse()
        .map_err(|_| format!("bad range start {a:?}"))?;
    let b: usize = b
        .trim()
        .parse()
        .map_err(|_| format!("bad range end {b:?}"))?;
    if a > b {
        return Err(format!("empty range {s:?}"));
    }
    Ok((a, b))
}

/// Where the matrix sequence comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum SeqSpec {
    Constant(Mat2<f64>),
    Perturbed {
        limit: Mat2<f64>,
        e: Mat2<f64>,
        decay: Decay,
    },
    File(PathBuf),
}

fn parse_quad(s: &str) -> Result<Mat2<f64>> {
    let v = s
        .split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("bad number {x:?} in {s:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    match v[..] {
        [a, b, d, t] => Ok(Mat2::new(a, b, d, t)),
        _ => Err(Error::InvalidArgument(format!(
            "expected 4 entries a,b,d,theta, got {s:?}"
        ))),
    }
}

impl FromStr for SeqSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::InvalidArgument(format!("bad model spec {s:?}"));
        let rate = |x: &str| x.trim().parse::<f64>().map_err(|_| bad());
        match parts[..] {
            ["fib"] => Ok(SeqSpec::Constant(Mat2::new(1.0, 1.0, 1.0, 0.0))),
            ["const", m] => Ok(SeqSpec::Constant(parse_quad(m)?)),
            ["power", m, e, p] => Ok(SeqSpec::Perturbed {
                limit: parse_quad(m)?,
                e: parse_quad(e)?,
                decay: Decay::Power { p: rate(p)? },
            }),
            ["geom", m, e, q] => Ok(SeqSpec::Perturbed {
                limit: parse_quad(m)?,
                e: parse_quad(e)?,
                decay: Decay::Geometric { q: rate(q)? },
            }),
            [_] => Ok(SeqSpec::File(PathBuf::from(s))),
            _ => Err(bad()),
        }
    }
}

/// Validated configuration for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: CommandKind,
    pub seq: SeqSpec,
    pub k: usize,
    pub k_range: Option<(usize, usize)>,
    pub n_max: usize,
    pub tol: f64,
    pub entry: Entry,
    pub format: OutFormat,
    pub out: Option<PathBuf>,
    pub selftest: SelftestConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Eigen,
    Validate,
    Tails,
    Ratio,
    ApproxEntry,
    CompareSpectral,
    Selftest,
}

impl RunConfig {
    pub fn from_cli(cli: Cli) -> Result<Self> {
        let (command, common) = match cli.command {
            Command::Eigen(c) => (CommandKind::Eigen, c),
            Command::Validate(c) => (CommandKind::Validate, c),
            Command::Tails(c) => (CommandKind::Tails, c),
            Command::Ratio(c) => (CommandKind::Ratio, c),
            Command::ApproxEntry(c) => (CommandKind::ApproxEntry, c),
            Command::CompareSpectral(c) => (CommandKind::CompareSpectral, c),
            Command::Selftest(s) => {
                let cfg = RunConfig {
                    command: CommandKind::Selftest,
                    seq: SeqSpec::Constant(Mat2::new(1.0, 1.0, 1.0, 0.0)),
                    k: 0,
                    k_range: None,
                    n_max: 1,
                    tol: 1e-14,
                    entry: Entry::new(1, 1)?,
                    format: s.output.format,
                    out: s.output.out,
                    selftest: SelftestConfig {
                        seed: s.seed,
                        cases: s.cases,
                        max_depth: s.depth,
                    },
                };
                return Ok(cfg);
            }
        };
        let cfg = RunConfig {
            command,
            seq: common.seq.parse()?,
            k: common.k,
            k_range: common.k_range,
            n_max: common.n_max,
            tol: common.tol,
            entry: common.entry,
            format: common.output.format,
            out: common.output.out,
            selftest: SelftestConfig::default(),
        };
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "--tol must be positive, got {}",
                self.tol
            )));
        }
        if self.n_max == 0 {
            return Err(Error::InvalidArgument("--n-max must be at least 1".into()));
        }
        Ok(())
    }
}

/// Limit matrix of a `--seq` value, without checking the hypotheses.
pub fn limit_matrix(spec: &SeqSpec) -> Result<Mat2<f64>> {
    match spec {
        SeqSpec::Constant(m) | SeqSpec::Perturbed { limit: m, .. } => Ok(m.clone()),
        SeqSpec::File(path) => Ok(load_sequence(path, Format::from_path(path))?.limit()),
    }
}

/// Builds the float sequence; model constructors reject an invalid limit.
pub fn build_sequence(spec: &SeqSpec) -> Result<MatrixSequence> {
    match spec {
        SeqSpec::Constant(m) => MatrixSequence::constant(m.clone()),
        SeqSpec::Perturbed { limit, e, decay } => {
            MatrixSequence::perturbed(limit.clone(), e.clone(), *decay)
        }
        SeqSpec::File(path) => load_sequence(path, Format::from_path(path)),
    }
}

/// One table cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Bool(bool),
    Text(String),
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Value::Float(x) => Some(x),
            Value::Int(i) => Some(i as f64),
            _ => None,
        }
    }
}

/// 17 significant digits: every binary64 value round-trips.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Value>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[idx]).collect())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(&self.columns).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| match v {
                Value::Int(i) => i.to_string(),
                Value::Float(x) => format_float(*x),
                Value::Bool(b) => b.to_string(),
                Value::Text(s) => s.clone(),
            }))
            .map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// `{"columns": [...], "rows": [[...], ...]}`; non-finite floats become `null`.
    pub fn to_json(&self) -> String {
        let mut s = String::from("{\"columns\":");
        s.push_str(&serde_json::to_string(&self.columns).expect("strings serialize"));
        s.push_str(",\"rows\":[");
        for (r, row) in self.rows.iter().enumerate() {
            if r > 0 {
                s.push(',');
            }
            s.push('[');
            for (c, v) in row.iter().enumerate() {
                if c > 0 {
                    s.push(',');
                }
                match v {
                    Value::Int(i) => write!(s, "{i}").unwrap(),
                    Value::Float(x) if x.is_finite() => s.push_str(&format_float(*x)),
                    Value::Float(_) => s.push_str("null"),
                    Value::Bool(b) => write!(s, "{b}").unwrap(),
                    Value::Text(t) => {
                        s.push_str(&serde_json::to_string(t).expect("string serializes"))
                    }
                }
            }
            s.push(']');
        }
        s.push_str("]}\n");
        s
    }

    pub fn render(&self, format: OutFormat) -> Result<String> {
        match format {
            OutFormat::Csv => self.to_csv(),
            OutFormat::Json => Ok(self.to_json()),
        }
    }

    /// Reads a table written by [`Table::to_csv`].
    pub fn from_csv(text: &str) -> Result<Table> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let perr = |line: usize, e: &dyn std::fmt::Display| Error::Parse {
            path: PathBuf::from("<table>"),
            line,
            message: e.to_string(),
        };
        let columns = rdr
            .headers()
            .map_err(|e| perr(1, &e))?
            .iter()
            .map(String::from)
            .collect();
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| perr(i + 2, &e))?;
            rows.push(rec.iter().map(parse_cell).collect());
        }
        Ok(Table { columns, rows })
    }

    /// Reads a table written by [`Table::to_json`]; `null` reads back as NaN.
    pub fn from_json(text: &str) -> Result<Table> {
        let perr = |m: String| Error::Parse {
            path: PathBuf::from("<table>"),
            line: 0,
            message: m,
        };
        let v: serde_json::Value = serde_json::from_str(text).map_err(|e| perr(e.to_string()))?;
        let columns = v["columns"]
            .as_array()
            .ok_or_else(|| perr("missing columns".into()))?
            .iter()
            .map(|c| {
                c.as_str()
                    .map(String::from)
                    .ok_or_else(|| perr("column name".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        let rows = v["rows"]
            .as_array()
            .ok_or_else(|| perr("missing rows".into()))?
            .iter()
            .map(|row| {
                row.as_array()
                    .ok_or_else(|| perr("row is not an array".into()))?
                    .iter()
                    .map(|cell| match cell {
                        serde_json::Value::Null => Ok(Value::Float(f64::NAN)),
                        serde_json::Value::Bool(b) => Ok(Value::Bool(*b)),
                        serde_json::Value::String(s) => Ok(Value::Text(s.clone())),
                        serde_json::Value::Number(n) => Ok(match n.as_i64() {
                            Some(i) => Value::Int(i),
                            None => Value::Float(n.as_f64().ok_or_else(|| perr(n.to_string()))?),
                        }),
                        other => Err(perr(format!("unexpected cell {other}"))),
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Table { columns, rows })
    }
}

fn parse_cell(s: &str) -> Value {
    if let Ok(i) = s.parse::<i64>() {
        Value::Int(i)
    } else if let Ok(x) = s.parse::<f64>() {
        Value::Float(x)
    } else if let Ok(b) = s.parse::<bool>() {
        Value::Bool(b)
    } else {
        Value::Text(s.to_string())
    }
}

/// A finished run: the table to emit and, when the run itself failed
/// (e.g. hypotheses violated), the error deciding the exit status.
#[derive(Debug)]
pub struct Report {
    pub table: Table,
    pub failure: Option<Error>,
}

impl Report {
    fn ok(table: Table) -> Self {
        Report {
            table,
            failure: None,
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.failure.as_ref().map_or(0, |e| e.class().exit_code())
    }
}

fn float(x: f64) -> Value {
    Value::Float(x)
}

fn int(x: usize) -> Value {
    Value::Int(x as i64)
}

/// Runs one subcommand without writing anything.
pub fn run(cfg: &RunConfig) -> Result<Report> {
    if cfg.command == CommandKind::Selftest {
        return selftest(&cfg.selftest);
    }
    if cfg.command == CommandKind::Validate {
        let mut report = validate(&limit_matrix(&cfg.seq)?)?;
        if report.failure.is_none() {
            add_thresholds(&mut report, &build_sequence(&cfg.seq)?);
        }
        return Ok(report);
    }
    let seq = build_sequence(&cfg.seq)?;
    let opts = TailOptions::from_env()?;
    match cfg.command {
        CommandKind::Eigen => {
            let e = eigenvalues(&seq.limit())?;
            let mut t = Table::new(&["rho", "rho1", "ratio", "gap", "xi_limit"]);
            t.push(vec![
                float(e.rho),
                float(e.rho1),
                float(e.ratio()),
                float(e.gap()),
                float(1.0 / e.rho),
            ]);
            Ok(Report::ok(t))
        }
        CommandKind::Tails => {
            let (lo, hi) = cfg.k_range.unwrap_or((cfg.k.max(1), cfg.k.max(1)));
            if lo == 0 {
                return Err(Error::InvalidArgument("tail indices start at 1".into()));
            }
            let cf = cf_from_sequence(&seq)?;
            let mut t = Table::new(&["k", "xi", "err_bound", "depth", "rate"]);
            for e in tails_range(&cf, lo, hi, cfg.tol, &opts)? {
                t.push(vec![
                    int(e.index),
                    float(e.value),
                    float(e.err_bound),
                    int(e.depth),
                    float(e.rate),
                ]);
            }
            Ok(Report::ok(t))
        }
        CommandKind::Ratio => {
            let d = ratio_diagnostics(&seq, cfg.k, cfg.entry, cfg.n_max, cfg.tol, &opts)?;
            let mut t = Table::new(&["n", "pi", "psi", "abs_dev"]);
            for (n, r) in d.ratios {
                t.push(vec![
                    int(n),
                    float(r),
                    float(d.target),
                    float((r - d.target).abs()),
                ]);
            }
            Ok(Report::ok(t))
        }
        CommandKind::ApproxEntry => approx_entry(&seq, cfg, &opts),
        CommandKind::CompareSpectral => {
            let d = ratio_diagnostics(&seq, cfg.k, cfg.entry, cfg.n_max, cfg.tol, &opts)?;
            let s = spectral_radius_ratio(&seq, cfg.k, cfg.entry, cfg.n_max)?;
            let mut t = Table::new(&["n", "xi_ratio", "spectral_ratio", "psi"]);
            for (idx, (n, r)) in d.ratios.iter().enumerate() {
                let sp = s.rows.get(idx).map_or(f64::NAN, |&(_, v)| v);
                t.push(vec![int(*n), float(*r), float(sp), float(d.target)]);
            }
            Ok(Report::ok(t))
        }
        CommandKind::Selftest | CommandKind::Validate => unreachable!("handled above"),
    }
}

/// All hypothesis failures at once; a failure sets the exit status but the
/// report is still emitted.
fn validate(m: &Mat2<f64>) -> Result<Report> {
    let r = validate_limit_matrix(m);
    let mut t = Table::new(&["check", "value", "violated"]);
    t.push(vec![
        Value::Text("a+θ=0".into()),
        float(m.trace()),
        Value::Bool(!r.trace_nonzero),
    ]);
    t.push(vec![
        Value::Text("b=0".into()),
        float(m.b),
        Value::Bool(!r.b_nonzero),
    ]);
    t.push(vec![
        Value::Text("bd=aθ".into()),
        float(m.b * m.d - m.a * m.theta),
        Value::Bool(!r.det_nonzero),
    ]);
    let failure = if m.is_nonnegative() {
        r.into_result().err()
    } else {
        Some(Error::Validation(format!(
            "limit matrix {m} has a negative entry"
        )))
    };
    Ok(Report { table: t, failure })
}

/// Appends the detected `k₁`, `k₀`; a failed scan is reported as a violated row.
fn add_thresholds(report: &mut Report, seq: &MatrixSequence) {
    match detect_thresholds(seq, DEFAULT_SCAN_CAP) {
        Ok(th) => {
            for (name, k) in [("k1", th.k1), ("k0", th.k0)] {
                report
                    .table
                    .push(vec![Value::Text(name.into()), int(k), Value::Bool(false)]);
            }
        }
        Err(e) => {
            report.table.push(vec![
                Value::Text("k0".into()),
                Value::Text(e.to_string()),
                Value::Bool(true),
            ]);
            report.failure = Some(e);
        }
    }
}

/// `ψ · ∏ ξ_m⁻¹` against the direct entry, both kept in scaled form.
fn approx_entry(seq: &MatrixSequence, cfg: &RunConfig, opts: &TailOptions) -> Result<Report> {
    let target = psi(seq, cfg.entry, cfg.k, cfg.tol, opts)?;
    let cf = cf_from_sequence(seq)?;
    let tails = tails_range(&cf, cfg.k + 1, cfg.k + cfg.n_max, cfg.tol, opts)?;
    let mut approx = ScaledEntry::from_f64(target);
    let mut t = Table::new(&[
        "n",
        "direct_mantissa",
        "direct_log2",
        "approx_mantissa",
        "approx_log2",
        "rel_err",
    ]);
    for (offset, tail) in tails.iter().enumerate() {
        let n = offset + 1;
        approx = approx.scale_by(1.0 / tail.value)?;
        let direct = product_entry(seq, cfg.k, n, cfg.entry)?;
        let rel = (approx.ratio_to(&direct) - 1.0).abs();
        t.push(vec![
            int(n),
            float(direct.mantissa() * direct.signum()),
            Value::Int(direct.log2_scale()),
            float(approx.mantissa() * approx.signum()),
            Value::Int(approx.log2_scale()),
            float(rel),
        ]);
    }
    Ok(Report::ok(t))
}

fn selftest(cfg: &SelftestConfig) -> Result<Report> {
    let checks = run_certification(cfg)?;
    let mut t = Table::new(&[
        "check",
        "seed",
        "comparisons",
        "max_rel_err",
        "violations",
        "passed",
    ]);
    let mut failed = 0;
    for c in &checks {
        if !c.passed() {
            failed += 1;
        }
        t.push(vec![
            Value::Text(c.name.into()),
            Value::Int(cfg.seed as i64),
            int(c.comparisons),
            float(c.max_rel_err),
            int(c.violations),
            Value::Bool(c.passed()),
        ]);
    }
    let failure =
        (failed > 0).then(|| Error::Domain(format!("selftest: {failed} check(s) failed")));
    Ok(Report { table: t, failure })
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Parses `args`, runs, writes the table and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                crate::error::FailureClass::Parse.exit_code()
            } else {
                0
            };
            let _ = e.print();
            return code;
        }
    };
    let result = RunConfig::from_cli(cli).and_then(|cfg| {
        if cfg.command == CommandKind::Selftest {
            eprintln!("selftest seed = {}", cfg.selftest.seed);
        }
        let report = run(&cfg)?;
        emit(&report.table.render(cfg.format)?, cfg.out.as_deref())?;
        Ok(report)
    });
    match result {
        Ok(report) => {
            if let Some(e) = &report.failure {
                eprintln!("error: {e}");
            }
            report.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.class().exit_code()
        }
    }
}
