//! `tbhom` command-line frontend.
//!
//! Exit codes: 0 success, 1 validation or usage error, 2 I/O error, 3 numerical
//! failure. Diagnostics go to standard error, data to files or standard output.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;

use crate::demos::{demo_scenario, DEMO_NAMES};
use crate::error::{Error, Result};
use crate::experiment::{
    fit_dip, run_scan, visibility_error, write_combined_csv, write_outputs, DipFit, Scenario,
};
use crate::modes::ModeVector;
use crate::network::{
    compile_pattern, compile_pattern_compensated, quarter_phase_form, synthesize, validate_pattern,
    LoopConfig, SwitchingPattern,
};
use crate::source::{calibrate_floor, visibility_curve, write_curve_csv, PdcSourceModel};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "tbhom",
    version,
    about = "Time-bin two-photon interference simulator"
)]
pub struct Cli {
    /// Suppress informational messages on standard error.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compile a target mode vector into a switching pattern.
    Compile(CompileArgs),
    /// Check a switching pattern or a scenario file.
    Validate(ValidateArgs),
    /// Run the delay scan of a scenario file.
    Scan(ScanArgs),
    /// Tabulate the source visibility against the mean pair number.
    SourceCurve(SourceCurveArgs),
    /// Fit a coincidence dip to CSV data.
    Fit(FitArgs),
    /// Run one of the bundled scenarios.
    Demo(DemoArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct LoopArgs {
    /// Loop configuration JSON; defaults apply to missing keys.
    #[arg(long = "loop", value_name = "FILE")]
    pub loop_file: Option<PathBuf>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub max_roundtrips: Option<usize>,
}

impl LoopArgs {
    fn config(&self, default_window: Option<usize>) -> Result<LoopConfig> {
        let mut cfg = match &self.loop_file {
            Some(path) => serde_json::from_str(&read(path)?)
                .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?,
            None => LoopConfig {
                window: default_window.unwrap_or(LoopConfig::default().window),
                ..LoopConfig::default()
            },
        };
        if let Some(w) = self.window {
            cfg.window = w;
        }
        if let Some(m) = self.max_roundtrips {
            cfg.max_roundtrips = m;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct CompileArgs {
    /// Target amplitudes, e.g. "[1,1,1]/sqrt3", "[-i, 1]/sqrt(2)" or "[[0,-1],[1,0]]".
    #[arg(long)]
    pub target: String,
    /// Only magnitudes are prescribed: compile the cheapest phase assignment.
    #[arg(long)]
    pub up_to_phases: bool,
    /// Pre-compensate the loop loss so the lossy output is proportional to the
    /// target.
    #[arg(long)]
    pub compensate_loss: bool,
    #[command(flatten)]
    pub loop_args: LoopArgs,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false, id = "input")]
pub struct ValidateInput {
    #[arg(long)]
    pub pattern: Option<PathBuf>,
    #[arg(long)]
    pub scenario: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub input: ValidateInput,
    #[command(flatten)]
    pub loop_args: LoopArgs,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Overrides the scenario's `rng_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory for per-subset CSV files and `summary.json`; standard output when
    /// absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Standard-output format.
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    /// fig2a, fig2b, fig2cd or fig2eh.
    pub name: String,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SourceCurveArgs {
    #[arg(long, default_value_t = 1e-4)]
    pub nbar_min: f64,
    #[arg(long, default_value_t = 0.3)]
    pub nbar_max: f64,
    #[arg(long, default_value_t = 40)]
    pub points: usize,
    /// Logarithmic instead of linear spacing.
    #[arg(long)]
    pub log: bool,
    /// Internal-state overlap; overridden by `--calibrate`.
    #[arg(long)]
    pub floor: Option<f64>,
    /// Calibrate the floor so that the visibility at `--calibrate-nbar` equals this.
    #[arg(long)]
    pub calibrate: Option<f64>,
    #[arg(long, default_value_t = 0.0165)]
    pub calibrate_nbar: f64,
    #[arg(long)]
    pub herald_efficiency: Option<f64>,
    #[arg(long)]
    pub signal_efficiency: Option<f64>,
    #[arg(long)]
    pub n_max: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "delay_s")]
    pub delay_column: String,
    #[arg(long, default_value = "counts_global")]
    pub counts_column: String,
    /// Column of standard errors; Poisson `√max(counts, 1)` when absent.
    #[arg(long)]
    pub error_column: Option<String>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

/// Exit code for a failed command.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } => EXIT_IO,
        Error::FitFailure { .. }
        | Error::Infeasible { .. }
        | Error::Unachievable(_)
        | Error::WindowOverflow { .. }
        | Error::Degenerate(_)
        | Error::UndefinedCorrelation(_)
        | Error::UndefinedNormalization(_) => EXIT_NUMERICAL,
        _ => EXIT_VALIDATION,
    }
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                EXIT_VALIDATION
            } else {
                EXIT_OK
            };
        }
    };
    match dispatch(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Validation(diags) = &e {
                for d in diags {
                    eprintln!("  {d}");
                }
            }
            exit_code(&e)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    let info = |msg: String| {
        if !cli.quiet {
            eprintln!("{msg}");
        }
    };
    match &cli.command {
        Command::Compile(a) => compile(a, info),
        Command::Validate(a) => validate(a, info),
        Command::Scan(a) => {
            let scenario = Scenario::from_path(&a.scenario)?;
            scan(scenario, &a.output, info)
        }
        Command::Demo(a) => {
            let scenario = demo_scenario(&a.name).map_err(|e| match e {
                Error::InvalidParameter { .. } => Error::invalid(
                    "name",
                    format!(
                        "unknown demo `{}`, expected one of {}",
                        a.name,
                        DEMO_NAMES.join(", ")
                    ),
                ),
                other => other,
            })?;
            scan(scenario, &a.output, info)
        }
        Command::SourceCurve(a) => source_curve(a, info),
        Command::Fit(a) => fit(a),
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, bytes).map_err(|e| Error::io(path, e)),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn compile(a: &CompileArgs, info: impl Fn(String)) -> Result<()> {
    let mut target = parse_target(&a.target)?;
    let cfg = a.loop_args.config(Some(target.window()))?;
    if cfg.window > target.window() {
        let mut amps = target.amplitudes().to_vec();
        amps.resize(cfg.window, Complex64::new(0.0, 0.0));
        target = ModeVector::new(amps)?;
    }
    if a.up_to_phases {
        target = quarter_phase_form(&target)?;
    }
    let (pattern, run_cfg) = if a.compensate_loss {
        (compile_pattern_compensated(&target, &cfg)?, cfg.clone())
    } else {
        (compile_pattern(&target, &cfg)?, cfg.lossless())
    };
    info(format!(
        "compiled {} roundtrip(s), output {}",
        pattern.final_roundtrip(),
        synthesize(&pattern, &run_cfg)?
    ));
    emit(a.out.as_deref(), &to_json(&pattern)?)
}

fn validate(a: &ValidateArgs, info: impl Fn(String)) -> Result<()> {
    let diags = if let Some(path) = &a.input.pattern {
        let pattern: SwitchingPattern = serde_json::from_str(&read(path)?)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let cfg = a.loop_args.config(None)?;
        validate_pattern(&pattern, &cfg)
    } else if let Some(path) = &a.input.scenario {
        Scenario::from_path(path)?.validate()
    } else {
        unreachable!("clap requires one input")
    };
    if diags.is_empty() {
        info("valid".into());
        Ok(())
    } else {
        Err(Error::Validation(diags))
    }
}

fn scan(mut scenario: Scenario, o: &OutputArgs, info: impl Fn(String)) -> Result<()> {
    if let Some(seed) = o.seed {
        scenario.rng_seed = seed;
    }
    let result = run_scan(&scenario)?;
    for w in &result.warnings {
        info(format!("warning: {w}"));
    }
    match &o.out {
        Some(dir) => {
            for path in write_outputs(&result, dir)? {
                info(format!("wrote {}", path.display()));
            }
            Ok(())
        }
        None => match o.format {
            Format::Json => emit(None, result.summary().to_json()?.as_bytes()),
            Format::Csv => {
                let mut buf = Vec::new();
                write_combined_csv(&result, &mut buf)?;
                emit(None, &buf)
            }
        },
    }
}

fn source_curve(a: &SourceCurveArgs, info: impl Fn(String)) -> Result<()> {
    let mut model = PdcSourceModel::default();
    if let Some(f) = a.floor {
        model.floor_i0 = f;
    }
    if let Some(e) = a.herald_efficiency {
        model.herald_efficiency = e;
    }
    if let Some(e) = a.signal_efficiency {
        model.signal_efficiency = e;
    }
    if let Some(n) = a.n_max {
        model.n_max = n;
    }
    if let Some(v) = a.calibrate {
        model.floor_i0 = calibrate_floor(v, a.calibrate_nbar, &model)?.value();
        info(format!("calibrated floor {}", model.floor_i0));
    }
    if a.points < 2 || !(a.nbar_min >= 0.0 && a.nbar_max > a.nbar_min) {
        return Err(Error::invalid(
            "nbar range",
            "need points >= 2 and 0 <= nbar-min < nbar-max",
        ));
    }
    if a.log && a.nbar_min <= 0.0 {
        return Err(Error::invalid("nbar-min", "must be positive with --log"));
    }
    let nbars: Vec<f64> = (0..a.points)
        .map(|i| {
            let t = i as f64 / (a.points - 1) as f64;
            if a.log {
                a.nbar_min * (a.nbar_max / a.nbar_min).powf(t)
            } else {
                a.nbar_min + (a.nbar_max - a.nbar_min) * t
            }
        })
        .collect();
    let curve = visibility_curve(&model, &nbars)?;
    let bytes = match a.format {
        Format::Csv => {
            let mut buf = Vec::new();
            write_curve_csv(&curve, &mut buf)?;
            buf
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Point {
                nbar: f64,
                visibility: f64,
            }
            #[derive(Serialize)]
            struct Curve<'a> {
                model: &'a PdcSourceModel,
                points: Vec<Point>,
            }
            to_json(&Curve {
                model: &model,
                points: curve
                    .iter()
                    .map(|&(nbar, visibility)| Point { nbar, visibility })
                    .collect(),
            })?
        }
    };
    emit(a.out.as_deref(), &bytes)
}

#[derive(Debug, Serialize)]
struct FitReport<'a> {
    #[serde(flatten)]
    fit: &'a DipFit,
    visibility_error: f64,
}

fn fit(a: &FitArgs) -> Result<()> {
    let text = read(&a.input)?;
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse(format!("{}: no column `{name}`", a.input.display())))
    };
    let di = column(&a.delay_column)?;
    let ci = column(&a.counts_column)?;
    let ei = a.error_column.as_deref().map(column).transpose()?;
    let (mut delays, mut counts, mut errors) = (Vec::new(), Vec::new(), Vec::new());
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec.get(i).unwrap_or("").trim().parse().map_err(|_| {
                Error::Parse(format!(
                    "{}: row {}: `{}` in column `{}` is not a number",
                    a.input.display(),
                    line + 2,
                    rec.get(i).unwrap_or(""),
                    &headers[i]
                ))
            })
        };
        let c = num(ci)?;
        delays.push(num(di)?);
        counts.push(c);
        errors.push(match ei {
            Some(i) => num(i)?,
            None => c.max(1.0).sqrt(),
        });
    }
    let fit = fit_dip(&delays, &counts, &errors)?;
    let report = FitReport {
        visibility_error: visibility_error(&delays, &counts, &fit),
        fit: &fit,
    };
    let bytes = match a.format {
        Format::Json => to_json(&report)?,
        Format::Csv => {
            let mut wr = csv::Writer::from_writer(Vec::new());
            wr.write_record([
                "baseline",
                "visibility",
                "center_s",
                "width_s",
                "visibility_error",
                "chi_squared",
                "dof",
                "flat",
            ])?;
            wr.write_record([
                fit.baseline.to_string(),
                fit.visibility.to_string(),
                fit.center.to_string(),
                fit.width.to_string(),
                report.visibility_error.to_string(),
                fit.chi_squared.to_string(),
                fit.dof.to_string(),
                fit.flat.to_string(),
            ])?;
            wr.into_inner()
                .map_err(|e| Error::io("<csv>", e.into_error()))?
        }
    };
    emit(a.out.as_deref(), &bytes)
}

/// Parses a bracketed list of complex amplitudes with an optional divisor.
///
/// Entries are real numbers, `[re, im]` pairs or literals such as `-i`, `0.5i`,
/// `1-2i`. The divisor after `/` is a number, `sqrtN` or `sqrt(N)`.
pub fn parse_target(text: &str) -> Result<ModeVector> {
    let bad = |why: &str| Error::Parse(format!("target `{text}`: {why}"));
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if !s.starts_with('[') {
        return Err(bad("must start with `[`"));
    }
    let mut depth = 0;
    let mut close = None;
    for (i, c) in s.char_indices() {
        match c {
            '[' => depth += 1,
            ']' => {
                depth -= 1;
                if depth == 0 {
                    close = Some(i);
                    break;
                }
            }
            _ => {}
        }
    }
    let close = close.ok_or_else(|| bad("unbalanced brackets"))?;
    let body = &s[1..close];
    let rest = &s[close + 1..];
    let divisor = if rest.is_empty() {
        1.0
    } else {
        let d = rest
            .strip_prefix('/')
            .ok_or_else(|| bad("expected `/` after the list"))?;
        parse_divisor(d).ok_or_else(|| bad("divisor must be a number, sqrtN or sqrt(N)"))?
    };
    if !(divisor.is_finite() && divisor != 0.0) {
        return Err(bad("divisor must be finite and non-zero"));
    }

    let mut entries = Vec::new();
    let mut depth = 0;
    let mut start = 0;
    for (i, c) in body.char_indices() {
        match c {
            '[' => depth += 1,
            ']' => depth -= 1,
            ',' if depth == 0 => {
                entries.push(&body[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    entries.push(&body[start..]);
    let amps = entries
        .into_iter()
        .map(|e| parse_entry(e).map(|z| z / divisor))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| bad("entries must be numbers, [re,im] pairs or complex literals"))?;
    ModeVector::new(amps)
}

fn parse_divisor(d: &str) -> Option<f64> {
    if let Some(r) = d.strip_prefix("sqrt") {
        let r = r
            .strip_prefix('(')
            .and_then(|r| r.strip_suffix(')'))
            .unwrap_or(r);
        return r.parse::<f64>().ok().map(f64::sqrt);
    }
    d.parse().ok()
}

fn parse_entry(e: &str) -> Option<Complex64> {
    if let Some(inner) = e.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
        let (re, im) = inner.split_once(',')?;
        return Some(Complex64::new(re.parse().ok()?, im.parse().ok()?));
    }
    if let Ok(x) = e.parse::<f64>() {
        return Some(Complex64::new(x, 0.0));
    }
    let body = e.strip_suffix('i')?;
    // split a trailing imaginary term off a leading real term, skipping exponent signs
    let split = body
        .char_indices()
        .skip(1)
        .filter(|&(i, c)| (c == '+' || c == '-') && !body[..i].ends_with(['e', 'E']))
        .map(|(i, _)| i)
        .last();
    let (re, im) = match split {
        Some(i) => (body[..i].parse().ok()?, &body[i..]),
        None => (0.0, body),
    };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        s => s.parse().ok()?,
    };
    Some(Complex64::new(re, im))
}
