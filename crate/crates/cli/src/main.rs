use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use tilt_core::proof::dominance_with;
use tilt_core::{
    cf_quadratic_coefficient, parse_die, span_shift, tilt_series_with, Budget, ClassReport, DieAnalysis, Die, Error, ProofOptions,
    Status, TailMode, Winner,
};

#[derive(Parser)]
#[command(name = "tilt", version, about = "Exact tilts, explicit Edgeworth error bounds and certified sign arrival for integer dice")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Prove the sign-arrival index for every residue class.
    Analyze(AnalyzeArgs),
    /// Exact tilt series.
    Tilt(TiltArgs),
    /// Characteristic-function samples, peaks and tail envelope.
    Cf(CfArgs),
    /// Bound decomposition at given n.
    Bounds(BoundsArgs),
    /// Asymptotic dominance between two dice.
    Dominance(DominanceArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Csv,
    Json,
}

#[derive(Args)]
struct Common {
    /// Die as a PGF like "(2z^-3+z+z^5)/4" or a list like "0:1/2,1:1/2".
    #[arg(long)]
    die: String,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
    /// Write output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    common: Common,
    /// Restrict to one residue class.
    #[arg(long)]
    class: Option<u64>,
    /// Force a tail mode instead of the one with the smallest n2.
    #[arg(long, value_enum)]
    tail: Option<TailArg>,
    /// Indices at which to include the bound decomposition.
    #[arg(long, value_delimiter = ',')]
    n: Vec<u64>,
    /// Memory budget for the exact scan.
    #[arg(long)]
    budget_mb: Option<u64>,
}

#[derive(Args)]
struct TiltArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 1)]
    from: u64,
    #[arg(long)]
    to: u64,
    /// Keep only n in this residue class of the span.
    #[arg(long)]
    class: Option<u64>,
    #[arg(long)]
    budget_mb: Option<u64>,
}

#[derive(Args)]
struct CfArgs {
    #[command(flatten)]
    common: Common,
    /// Number of |f| samples on [0, pi] (span-normalised).
    #[arg(long, default_value_t = 1000)]
    samples: u64,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<u64>,
    #[arg(long, value_enum, default_value = "cert")]
    tail: TailArg,
}

#[derive(Args)]
struct DominanceArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    die2: String,
    #[arg(long, value_enum)]
    tail: Option<TailArg>,
    #[arg(long)]
    budget_mb: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TailArg {
    Cert,
    Optimal,
    Envelope,
}

impl From<TailArg> for TailMode {
    fn from(t: TailArg) -> Self {
        match t {
            TailArg::Cert => TailMode::Cert,
            TailArg::Optimal => TailMode::Optimal,
            TailArg::Envelope => TailMode::Envelope,
        }
    }
}

#[derive(Debug)]
enum Failure {
    Lib(Error),
    Io(io::Error),
    Other(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Other(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Other(e.to_string())
    }
}

const EXIT_PARSE: u8 = 2;
const EXIT_BUDGET: u8 = 3;
const EXIT_SYMMETRIC: u8 = 4;

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Lib(
                Error::Parse { .. } | Error::NotNormalized(_) | Error::TooFewValues(_) | Error::NonPositiveProbability(_),
            ) => EXIT_PARSE,
            Failure::Lib(Error::BudgetExceeded { .. }) => EXIT_BUDGET,
            Failure::Lib(Error::SymmetricUndetermined(_)) => EXIT_SYMMETRIC,
            _ => 1,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Lib(e) => e.to_string(),
            Failure::Io(e) => e.to_string(),
            Failure::Other(s) => s.clone(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Tilt(a) => tilt(a),
        Command::Cf(a) => cf(a),
        Command::Bounds(a) => bounds(a),
        Command::Dominance(a) => dominance(a),
    }
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json(out: &mut dyn Write, v: &impl Serialize) -> Result<(), Failure> {
    serde_json::to_writer_pretty(&mut *out, v)?;
    writeln!(out)?;
    Ok(())
}

/// Decimal truncation (no rounding) to `digits` places.
fn trunc(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let full = format!("{x:.40}");
    let dot = full.find('.').unwrap();
    let s = &full[..dot + 1 + digits];
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        s.trim_start_matches('-').to_string()
    } else {
        s.to_string()
    }
}

/// Truncated to `sig` significant digits, switching to exponent form for tiny values.
fn trunc_sig(x: f64, sig: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return x.to_string();
    }
    let mag = x.abs().log10().floor() as i32;
    if mag < -4 {
        let full = format!("{x:.40e}");
        let (m, e) = full.split_once('e').unwrap();
        let dot = m.find('.').unwrap();
        return format!("{}e{e}", &m[..dot + sig]);
    }
    trunc(x, (sig as i32 - 1 - mag).max(0) as usize)
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or("-".into(), |v| v.to_string())
}

fn budget(mb: Option<u64>) -> Budget {
    mb.map_or_else(Budget::default, Budget::with_megabytes)
}

fn status_code(reports: &[ClassReport]) -> u8 {
    if reports.iter().any(|r| r.status == Status::ScanBudgetExceeded) {
        EXIT_BUDGET
    } else if reports.iter().any(|r| r.status == Status::SymmetricUndetermined) {
        EXIT_SYMMETRIC
    } else if reports.iter().any(|r| r.status == Status::SearchCapExceeded) {
        1
    } else {
        0
    }
}

const REPORT_HEADER: [&str; 12] = [
    "class",
    "L",
    "n0",
    "n1",
    "n2_cert",
    "n2_optimal",
    "n2_envelope",
    "tail",
    "scan_max",
    "status",
    "zero_tilts",
    "last_disagreement",
];

fn report_row(r: &ClassReport, table: bool) -> Vec<String> {
    let l = if table { trunc(r.l, 5) } else { r.l.to_string() };
    let zeros: Vec<String> = r.zero_tilts.iter().map(u64::to_string).collect();
    vec![
        r.class.to_string(),
        l,
        opt(r.proven_n0),
        opt(r.n1),
        opt(r.n2.cert),
        opt(r.n2.optimal),
        opt(r.n2.envelope),
        opt(r.tail_mode),
        r.scan_max.to_string(),
        format!("{:?}", r.status),
        zeros.join(" "),
        r.last_disagreement.as_ref().map_or("-".into(), |e| {
            if table {
                format!("n={} ({})", e.n, trunc(e.normalized, 6))
            } else {
                format!("{}:{}", e.n, e.tilt)
            }
        }),
    ]
}

fn print_table(out: &mut dyn Write, header: &[&str], rows: &[Vec<String>]) -> io::Result<()> {
    let mut width: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |out: &mut dyn Write, cells: &[String]| -> io::Result<()> {
        let parts: Vec<String> = cells.iter().zip(&width).map(|(c, w)| format!("{c:>w$}")).collect();
        writeln!(out, "{}", parts.join("  ").trim_end())
    };
    line(out, &header.iter().map(|h| h.to_string()).collect::<Vec<_>>())?;
    for r in rows {
        line(out, r)?;
    }
    Ok(())
}

fn print_csv(out: &mut dyn Write, header: &[&str], rows: &[Vec<String>]) -> Result<(), Failure> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

fn emit_reports(out: &mut dyn Write, reports: &[ClassReport], format: Format) -> Result<(), Failure> {
    match format {
        Format::Json => write_json(out, &reports)?,
        Format::Csv => {
            let rows: Vec<_> = reports.iter().map(|r| report_row(r, false)).collect();
            print_csv(out, &REPORT_HEADER, &rows)?;
        }
        Format::Table => {
            let rows: Vec<_> = reports.iter().map(|r| report_row(r, true)).collect();
            print_table(out, &REPORT_HEADER, &rows)?;
        }
    }
    Ok(())
}

fn analyze(a: AnalyzeArgs) -> Result<u8, Failure> {
    let d = parse_die(&a.common.die)?;
    let an = DieAnalysis::new(&d)?;
    let opts = ProofOptions {
        budget: budget(a.budget_mb),
        tail: a.tail.map(Into::into),
        decomposition_at: a.n,
        ..ProofOptions::default()
    };
    let reports = match a.class {
        Some(c) => vec![an.prove_class(c, &opts)?],
        None => an.prove_all(&opts)?,
    };
    let mut out = output(&a.common.out)?;
    if let Format::Table = a.common.format {
        writeln!(out, "die {}  span {}  shift {}", d, an.span(), an.globals.shift)?;
    }
    emit_reports(&mut *out, &reports, a.common.format)?;
    out.flush()?;
    Ok(status_code(&reports))
}

fn tilt(a: TiltArgs) -> Result<u8, Failure> {
    let d = parse_die(&a.common.die)?;
    let filter = match a.class {
        Some(c) => {
            let b = span_shift(&d.canonicalize()?.die).0;
            if c >= b {
                return Err(Failure::Lib(Error::InvalidArgument(format!("class {c} not in [0, {b})"))));
            }
            Some((c, b))
        }
        None => None,
    };
    let series = tilt_series_with(&d, a.from, a.to, filter, budget(a.budget_mb))?;
    let mut out = output(&a.common.out)?;
    match a.common.format {
        Format::Json => {
            #[derive(Serialize)]
            struct Row {
                n: u64,
                tilt: String,
                tilt_float: f64,
                normalized: f64,
            }
            let rows: Vec<Row> = series
                .iter()
                .map(|t| Row {
                    n: t.n,
                    tilt: format!("{}/{}", t.tilt.numer(), t.tilt.denom()),
                    tilt_float: tilt_core::scalar::ratio_to_f64(&t.tilt),
                    normalized: t.normalized,
                })
                .collect();
            write_json(&mut *out, &rows)?;
        }
        Format::Csv => {
            let rows: Vec<Vec<String>> = series
                .iter()
                .map(|t| {
                    vec![
                        t.n.to_string(),
                        t.tilt.numer().to_string(),
                        t.tilt.denom().to_string(),
                        tilt_core::scalar::ratio_to_f64(&t.tilt).to_string(),
                        t.normalized.to_string(),
                    ]
                })
                .collect();
            print_csv(&mut *out, &["n", "tilt_numerator", "tilt_denominator", "tilt_float", "normalized"], &rows)?;
        }
        Format::Table => {
            let rows: Vec<Vec<String>> = series
                .iter()
                .map(|t| vec![t.n.to_string(), trunc_sig(tilt_core::scalar::ratio_to_f64(&t.tilt), 6), trunc(t.normalized, 6)])
                .collect();
            print_table(&mut *out, &["n", "tilt", "normalized"], &rows)?;
        }
    }
    out.flush()?;
    Ok(0)
}

fn cf(a: CfArgs) -> Result<u8, Failure> {
    let d = parse_die(&a.common.die)?;
    let an = DieAnalysis::new(&d)?;
    let q = cf_quadratic_coefficient::<f64>(&an.lattice, &an.moments);
    let mut out = output(&a.common.out)?;
    let pi = std::f64::consts::PI;
    let samples = a.samples.max(1);
    match a.common.format {
        Format::Csv => {
            let rows: Vec<Vec<String>> = (0..=samples)
                .map(|i| {
                    let t = pi * i as f64 / samples as f64;
                    let env = an.envelope.as_ref().filter(|e| t >= e.s_low).map(|e| e.value(t).to_string());
                    vec![t.to_string(), an.profile.cf.abs(t).to_string(), (1.0 - q.d_cert * t * t).to_string(), env.unwrap_or_default()]
                })
                .collect();
            print_csv(&mut *out, &["t", "abs_f", "quadratic_bound", "envelope"], &rows)?;
        }
        Format::Json => {
            #[derive(Serialize)]
            struct CfReport<'a> {
                die: String,
                span: u64,
                d_cert: f64,
                r_optimal: f64,
                profile: &'a tilt_core::CfProfileF64,
                envelope: Option<&'a tilt_core::TailEnvelopeF64>,
            }
            let rep = CfReport {
                die: d.to_string(),
                span: an.span(),
                d_cert: q.d_cert,
                r_optimal: an.r_opt,
                profile: &an.profile,
                envelope: an.envelope.as_ref(),
            };
            write_json(&mut *out, &rep)?;
        }
        Format::Table => {
            writeln!(out, "die {}  span {}", d, an.span())?;
            writeln!(out, "d_cert {}  r_optimal {}", trunc_sig(q.d_cert, 5), trunc_sig(an.r_opt, 5))?;
            if let Some(e) = &an.envelope {
                writeln!(out, "envelope on [{}, pi]: level {}, {} pieces", trunc(e.s_low, 5), trunc(e.level, 5), e.pieces.len())?;
            }
            let rows: Vec<Vec<String>> = an.profile.peaks.iter().map(|p| vec![trunc(p.t, 5), trunc(p.height, 5)]).collect();
            print_table(&mut *out, &["peak_t", "height"], &rows)?;
        }
    }
    out.flush()?;
    Ok(0)
}

fn bounds(a: BoundsArgs) -> Result<u8, Failure> {
    let d = parse_die(&a.common.die)?;
    let an = DieAnalysis::new(&d)?;
    let mode: TailMode = a.tail.into();
    let b = an.span();
    #[derive(Serialize)]
    struct Row {
        n: u64,
        class: u64,
        #[serde(flatten)]
        terms: Option<tilt_core::BoundRow>,
        #[serde(skip_serializing_if = "Option::is_none")]
        error: Option<String>,
    }
    let rows: Vec<Row> = a
        .n
        .iter()
        .map(|&n| match an.bound_row(n % b, n, mode) {
            Ok(t) => Row { n, class: n % b, terms: Some(t), error: None },
            Err(e) => Row { n, class: n % b, terms: None, error: Some(e.to_string()) },
        })
        .collect();
    let mut out = output(&a.common.out)?;
    let header = ["n", "class", "L", "total", "principal", "tail", "skew", "rest"];
    let cells = |r: &Row, table: bool| -> Vec<String> {
        let f = |x: f64| if table { trunc_sig(x, 7) } else { x.to_string() };
        let l = an.classes[r.class as usize].l_tilt;
        let mut v = vec![r.n.to_string(), r.class.to_string(), f(l)];
        match &r.terms {
            Some(t) => v.extend([f(t.total), f(t.principal), f(t.tail), f(t.skew), f(t.rest)]),
            None => v.extend(std::iter::repeat("ERROR".to_string()).take(5)),
        }
        v
    };
    match a.common.format {
        Format::Json => write_json(&mut *out, &rows)?,
        Format::Csv => print_csv(&mut *out, &header, &rows.iter().map(|r| cells(r, false)).collect::<Vec<_>>())?,
        Format::Table => {
            writeln!(out, "die {}  tail {}  (columns scaled by sqrt(2 pi n))", d, mode)?;
            print_table(&mut *out, &header, &rows.iter().map(|r| cells(r, true)).collect::<Vec<_>>())?;
            for r in &rows {
                if let Some(e) = &r.error {
                    writeln!(out, "n = {}: {}", r.n, e)?;
                }
            }
        }
    }
    out.flush()?;
    Ok(0)
}

fn dominance(a: DominanceArgs) -> Result<u8, Failure> {
    let first: Die = parse_die(&a.common.die)?;
    let second: Die = parse_die(&a.die2)?;
    let opts = ProofOptions { budget: budget(a.budget_mb), tail: a.tail.map(Into::into), ..ProofOptions::default() };
    let dom = dominance_with(&first, &second, &opts)?;
    let mut out = output(&a.common.out)?;
    let winner = |w: &Option<Winner>| match w {
        Some(Winner::First) => "first".to_string(),
        Some(Winner::Second) => "second".to_string(),
        None => "undetermined".to_string(),
    };
    match a.common.format {
        Format::Json => write_json(&mut *out, &dom)?,
        Format::Csv | Format::Table => {
            let table = matches!(a.common.format, Format::Table);
            let mut header = REPORT_HEADER.to_vec();
            header.push("dominant");
            let rows: Vec<Vec<String>> = dom
                .reports
                .iter()
                .zip(&dom.winners)
                .map(|(r, w)| {
                    let mut row = report_row(r, table);
                    row.push(winner(w));
                    row
                })
                .collect();
            if table {
                writeln!(out, "first {}  second {}  difference {}", dom.first, dom.second, dom.difference)?;
                print_table(&mut *out, &header, &rows)?;
            } else {
                print_csv(&mut *out, &header, &rows)?;
            }
        }
    }
    out.flush()?;
    Ok(status_code(&dom.reports))
}
