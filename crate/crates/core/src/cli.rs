//! Command-line front end.
//!
//! Three subcommands share one set of options:
//!
//! - `run`: a single march, with an optional dump of nodal fields;
//! - `table`: a spatial convergence table as CSV;
//! - `compare`: both schemes on the same fine mesh, with error and time ratios.
//!
//! Options may also come from a `key=value` file given with `--config`; keys
//! are the long flag names without dashes prefix (`alpha`, `tau-inverse`, ...).
//! Flags on the command line override the file.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::fracops::FractionalOrder;
use crate::mesh::{FeFunction, Mesh2D, Nesting};
use crate::problems::{
    cable_benchmark, convergence_study, run_ordered, ConvergenceRow, ManufacturedCase,
};
use crate::stepper::{march, MarchOptions, MarchResult, Nonlinearity, ProblemSpec, Scheme};

fn config(field: &str, message: &str) -> Error {
    Error::config(field, message)
}

pub const CSV_HEADER: [&str; 5] = ["H", "h", "error_l2", "order", "cpu_seconds"];

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeChoice {
    Standard,
    Twogrid,
    Both,
}

impl SchemeChoice {
    fn parse(s: &str) -> Option<Self> {
        <Self as ValueEnum>::from_str(s, true).ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProblemChoice {
    /// manufactured benchmark with known exact solution
    Cable,
    /// zero source and initial value (exact solution zero)
    Zero,
}

#[derive(Debug, Parser)]
#[command(
    name = "cable",
    version,
    about = "Two-grid finite element solver for the fractional Cable equation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// March one configuration to the final time
    Run(ConfigArgs),
    /// Spatial convergence table over a list of mesh pairs
    Table(ConfigArgs),
    /// Run both schemes on the same fine mesh and compare
    Compare(ConfigArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// key=value file with defaults for any of the options below
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// number of time steps M (τ = T/M)
    #[arg(long)]
    pub tau_inverse: Option<usize>,
    #[arg(long)]
    pub coarse_n: Option<usize>,
    #[arg(long)]
    pub fine_n: Option<usize>,
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeChoice>,
    /// CSV destination (table, compare) or field directory (run)
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// write nodal grids of the exact and computed solutions
    #[arg(long)]
    pub emit_fields: bool,
    /// mesh pairs for `table`, e.g. `4:16,5:25`
    #[arg(long)]
    pub pairs: Option<String>,
    /// worker threads for table rows
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, value_enum)]
    pub problem: Option<ProblemChoice>,
    /// Gauss points per axis for the reported L² error (default 3)
    #[arg(long)]
    pub error_points: Option<usize>,
    #[arg(long, hide = true)]
    pub final_time: Option<f64>,
}

/// Validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub alpha: f64,
    pub beta: f64,
    pub tau_inverse: usize,
    pub coarse_n: Option<usize>,
    pub fine_n: Option<usize>,
    pub scheme: SchemeChoice,
    pub output: Option<PathBuf>,
    pub emit_fields: bool,
    pub pairs: Vec<(usize, usize)>,
    pub jobs: usize,
    pub problem: ProblemChoice,
    pub error_points: usize,
    pub final_time: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            beta: 0.99,
            tau_inverse: 100,
            coarse_n: None,
            fine_n: None,
            scheme: SchemeChoice::Twogrid,
            output: None,
            emit_fields: false,
            pairs: Vec::new(),
            jobs: 1,
            problem: ProblemChoice::Cable,
            error_points: 3,
            final_time: 1.0,
        }
    }
}

fn parse_value<T: std::str::FromStr>(field: &'static str, raw: &str) -> Result<T> {
    raw.trim()
        .parse()
        .map_err(|_| config(field, &format!("cannot parse {raw:?}")))
}

/// Parses `4:16,5:25` (a bare `16` means a standard-only entry with no coarse mesh).
pub fn parse_pairs(raw: &str) -> Result<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    for item in raw.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let pair = match item.split_once(':') {
            Some((c, f)) => (parse_value("pairs", c)?, parse_value("pairs", f)?),
            None => (0, parse_value("pairs", item)?),
        };
        out.push(pair);
    }
    if out.is_empty() {
        return Err(config("pairs", "empty pair list"));
    }
    Ok(out)
}

/// Parses a flat `key=value` file; `#` starts a comment.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(config(
                "config",
                &format!("line {}: expected key=value", lineno + 1),
            ));
        };
        out.insert(k.trim().replace('_', "-"), v.trim().to_string());
    }
    Ok(out)
}

impl ConfigArgs {
    /// File values first, then command-line flags on top.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path)
                .map_err(|e| config("config", &format!("cannot read {}: {e}", path.display())))?;
            for (k, v) in parse_config_file(&text)? {
                match k.as_str() {
                    "alpha" => cfg.alpha = parse_value("alpha", &v)?,
                    "beta" => cfg.beta = parse_value("beta", &v)?,
                    "tau-inverse" => cfg.tau_inverse = parse_value("tau-inverse", &v)?,
                    "coarse-n" => cfg.coarse_n = Some(parse_value("coarse-n", &v)?),
                    "fine-n" => cfg.fine_n = Some(parse_value("fine-n", &v)?),
                    "scheme" => {
                        cfg.scheme = SchemeChoice::parse(&v)
                            .ok_or_else(|| config("scheme", &format!("unknown scheme {v:?}")))?
                    }
                    "output" => cfg.output = Some(PathBuf::from(v)),
                    "emit-fields" => cfg.emit_fields = parse_value("emit-fields", &v)?,
                    "pairs" => cfg.pairs = parse_pairs(&v)?,
                    "jobs" => cfg.jobs = parse_value("jobs", &v)?,
                    "problem" => {
                        cfg.problem = <ProblemChoice as ValueEnum>::from_str(&v, true)
                            .map_err(|_| config("problem", &format!("unknown problem {v:?}")))?
                    }
                    "error-points" => cfg.error_points = parse_value("error-points", &v)?,
                    "final-time" => cfg.final_time = parse_value("final-time", &v)?,
                    other => return Err(config("config", &format!("unknown key {other:?}"))),
                }
            }
        }
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = self.beta {
            cfg.beta = v;
        }
        if let Some(v) = self.tau_inverse {
            cfg.tau_inverse = v;
        }
        if self.coarse_n.is_some() {
            cfg.coarse_n = self.coarse_n;
        }
        if self.fine_n.is_some() {
            cfg.fine_n = self.fine_n;
        }
        if let Some(v) = self.scheme {
            cfg.scheme = v;
        }
        if self.output.is_some() {
            cfg.output = self.output.clone();
        }
        cfg.emit_fields |= self.emit_fields;
        if let Some(p) = &self.pairs {
            cfg.pairs = parse_pairs(p)?;
        }
        if let Some(v) = self.jobs {
            cfg.jobs = v;
        }
        if let Some(v) = self.problem {
            cfg.problem = v;
        }
        if let Some(v) = self.error_points {
            cfg.error_points = v;
        }
        if let Some(v) = self.final_time {
            cfg.final_time = v;
        }
        Ok(cfg)
    }
}

fn check_nesting(field: &'static str, coarse: usize, fine: usize) -> Result<()> {
    Nesting::new(coarse, fine).map(|_| ()).map_err(|e| match e {
        Error::NotNested { coarse, fine } => config(
            field,
            &format!("coarse mesh {coarse} does not divide fine mesh {fine} (divisibility with ratio >= 2 required)"),
        ),
        other => config(field, &other.to_string()),
    })
}

impl RunConfig {
    fn validate_common(&self) -> Result<()> {
        FractionalOrder::new(self.alpha).map_err(|e| config("alpha", &e.to_string()))?;
        FractionalOrder::new(self.beta).map_err(|e| config("beta", &e.to_string()))?;
        if self.tau_inverse < 2 {
            return Err(config("tau-inverse", "need at least 2 time steps"));
        }
        if !(1..=10).contains(&self.error_points) {
            return Err(config("error-points", "must be between 1 and 10"));
        }
        if self.jobs == 0 {
            return Err(config("jobs", "must be positive"));
        }
        if !(self.final_time > 0.0 && self.final_time.is_finite()) {
            return Err(config("final-time", "must be positive"));
        }
        Ok(())
    }

    /// Checks the options needed by `run` and `compare`.
    pub fn validate_single(&self) -> Result<()> {
        self.validate_common()?;
        let fine = self
            .fine_n
            .ok_or_else(|| config("fine-n", "required (cells per side of the fine mesh)"))?;
        if fine < 2 {
            return Err(config("fine-n", "must be at least 2"));
        }
        if self.scheme != SchemeChoice::Standard {
            let coarse = self
                .coarse_n
                .ok_or_else(|| config("coarse-n", "required for the two-grid scheme"))?;
            check_nesting("coarse-n", coarse, fine)?;
        }
        Ok(())
    }

    /// Checks the options needed by `table`.
    pub fn validate_table(&self) -> Result<()> {
        self.validate_common()?;
        if self.pairs.is_empty() {
            return Err(config("pairs", "required, e.g. 4:16,5:25"));
        }
        for &(c, f) in &self.pairs {
            if f < 2 {
                return Err(config("pairs", &format!("fine mesh {f} too small")));
            }
            if self.scheme != SchemeChoice::Standard {
                if c == 0 {
                    return Err(config(
                        "pairs",
                        &format!("two-grid entry {f} has no coarse mesh"),
                    ));
                }
                check_nesting("pairs", c, f)?;
            }
        }
        Ok(())
    }

    pub fn march_options(&self) -> MarchOptions {
        MarchOptions::default().with_error_points(self.error_points)
    }

    pub fn case(&self) -> Result<ManufacturedCase> {
        let mut case = match self.problem {
            ProblemChoice::Cable => cable_benchmark(self.alpha, self.beta, self.tau_inverse)?,
            ProblemChoice::Zero => {
                let mut spec = ProblemSpec::new(
                    FractionalOrder::new(self.alpha)?,
                    FractionalOrder::new(self.beta)?,
                    1.0,
                    self.tau_inverse,
                    Nonlinearity::cubic(),
                    |_, _, _| 0.0,
                );
                spec.exact = Some(std::sync::Arc::new(|_, _, _| 0.0));
                ManufacturedCase {
                    name: "zero".into(),
                    spec,
                }
            }
        };
        case.spec.final_time = self.final_time;
        Ok(case)
    }

    fn schemes_single(&self) -> Vec<Scheme> {
        let fine = self.fine_n.unwrap_or(0);
        let twogrid = || Scheme::TwoGrid {
            coarse: self.coarse_n.unwrap_or(0),
            fine,
        };
        match self.scheme {
            SchemeChoice::Standard => vec![Scheme::Standard { n: fine }],
            SchemeChoice::Twogrid => vec![twogrid()],
            SchemeChoice::Both => vec![twogrid(), Scheme::Standard { n: fine }],
        }
    }
}

fn fmt_opt(v: Option<f64>, f: impl Fn(f64) -> String) -> String {
    v.map(f).unwrap_or_default()
}

/// CSV fields for one row: errors with 6 significant digits, orders with 4 decimals.
pub fn format_row(row: &ConvergenceRow) -> [String; 5] {
    [
        fmt_opt(row.coarse_h, |v| format!("{v}")),
        format!("{}", row.h),
        format!("{:.5e}", row.error_l2),
        fmt_opt(row.order, |v| format!("{v:.4}")),
        format!("{:.6}", row.cpu_seconds),
    ]
}

pub fn write_rows<W: Write>(out: W, rows: &[ConvergenceRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        w.write_record(format_row(row))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<R: Read>(input: R) -> Result<Vec<ConvergenceRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(config("csv", &format!("unexpected header {header:?}")));
    }
    let opt = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            parse_value("csv", s).map(Some)
        }
    };
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        rows.push(ConvergenceRow {
            coarse_h: opt(&rec[0])?,
            h: parse_value("csv", &rec[1])?,
            error_l2: parse_value("csv", &rec[2])?,
            order: opt(&rec[3])?,
            cpu_seconds: parse_value("csv", &rec[4])?,
        });
    }
    Ok(rows)
}

/// Writes `x y value` lines (9 decimals) for every node of `mesh`.
pub fn write_field(path: &Path, mesh: &Mesh2D, values: &[f64]) -> Result<()> {
    let mut w = io::BufWriter::new(fs::File::create(path)?);
    let n = mesh.cells_per_side();
    for j in 0..=n {
        for i in 0..=n {
            let id = mesh.node_id(i, j);
            let (x, y) = mesh.node_coords(id);
            writeln!(w, "{x:.9} {y:.9} {:.9}", values[id])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn scheme_label(s: Scheme) -> &'static str {
    match s {
        Scheme::Standard { .. } => "standard",
        Scheme::TwoGrid { .. } => "twogrid",
    }
}

fn summary_line(s: Scheme, res: &MarchResult) -> String {
    let h_coarse = match s {
        Scheme::TwoGrid { coarse, .. } => format!(" H=1/{coarse}"),
        Scheme::Standard { .. } => String::new(),
    };
    let err = res
        .final_error
        .map_or("n/a".to_string(), |e| format!("{e:.6e}"));
    format!(
        "scheme={}{h_coarse} h=1/{} steps={} error_l2={err} solve_seconds={:.6} newton_total={} newton_max={} max_l2_norm={:.6e}",
        scheme_label(s),
        res.mesh.cells_per_side(),
        res.newton_iterations.len(),
        res.solve_seconds,
        res.total_newton_iterations(),
        res.newton_iterations.iter().max().copied().unwrap_or(0),
        res.max_l2_norm,
    )
}

fn emit_fields(
    cfg: &RunConfig,
    case: &ManufacturedCase,
    results: &[(Scheme, MarchResult)],
) -> Result<Vec<PathBuf>> {
    let dir = cfg.output.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)?;
    let mut written = Vec::new();
    let t = case.spec.final_time;
    for (s, res) in results {
        let mesh = &res.mesh;
        let exact = FeFunction::sample(mesh, |x, y| case.exact(x, y, t));
        let label = scheme_label(*s);
        let diff: Vec<f64> = exact
            .values()
            .iter()
            .zip(res.solution.values())
            .map(|(a, b)| a - b)
            .collect();
        for (quantity, values) in [
            ("exact".to_string(), exact.values()),
            (label.to_string(), res.solution.values()),
            (format!("error_{label}"), diff.as_slice()),
        ] {
            let path = dir.join(format!("{}_{quantity}.dat", case.name));
            write_field(&path, mesh, values)?;
            written.push(path);
        }
    }
    written.dedup();
    Ok(written)
}

pub fn cmd_run(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    cfg.validate_single()?;
    let case = cfg.case()?;
    let options = cfg.march_options();
    let mut results = Vec::new();
    for s in cfg.schemes_single() {
        let res = march(&case.spec, s, &options)?;
        writeln!(out, "{}", summary_line(s, &res))?;
        results.push((s, res));
    }
    if cfg.emit_fields {
        for path in emit_fields(cfg, &case, &results)? {
            writeln!(out, "wrote {}", path.display())?;
        }
    }
    Ok(())
}

fn write_csv_to(cfg: &RunConfig, rows: &[ConvergenceRow], out: &mut dyn Write) -> Result<()> {
    match &cfg.output {
        Some(path) => {
            write_rows(fs::File::create(path)?, rows)?;
            writeln!(out, "wrote {}", path.display())?;
        }
        None => write_rows(&mut *out, rows)?,
    }
    Ok(())
}

/// Table rows: the two-grid block first, then the standard block.
pub fn table_rows(cfg: &RunConfig) -> Result<Vec<ConvergenceRow>> {
    cfg.validate_table()?;
    let case = cfg.case()?;
    let options = cfg.march_options();
    let mut rows = Vec::new();
    if cfg.scheme != SchemeChoice::Standard {
        let schemes: Vec<Scheme> = cfg
            .pairs
            .iter()
            .map(|&(coarse, fine)| Scheme::TwoGrid { coarse, fine })
            .collect();
        rows.extend(convergence_study(&case, &schemes, &options, cfg.jobs)?);
    }
    if cfg.scheme != SchemeChoice::Twogrid {
        let schemes: Vec<Scheme> = cfg
            .pairs
            .iter()
            .map(|&(_, n)| Scheme::Standard { n })
            .collect();
        rows.extend(convergence_study(&case, &schemes, &options, cfg.jobs)?);
    }
    Ok(rows)
}

pub fn cmd_table(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let rows = table_rows(cfg)?;
    write_csv_to(cfg, &rows, out)
}

/// Outcome of running both schemes on one fine mesh.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub twogrid: ConvergenceRow,
    pub standard: ConvergenceRow,
}

impl Comparison {
    /// two-grid error over standard error
    pub fn error_ratio(&self) -> f64 {
        self.twogrid.error_l2 / self.standard.error_l2
    }

    /// two-grid solve time over standard solve time
    pub fn time_ratio(&self) -> f64 {
        self.twogrid.cpu_seconds / self.standard.cpu_seconds
    }

    pub fn twogrid_faster(&self) -> bool {
        self.twogrid.cpu_seconds < self.standard.cpu_seconds
    }
}

pub fn compare(cfg: &RunConfig) -> Result<Comparison> {
    let mut cfg = cfg.clone();
    cfg.scheme = SchemeChoice::Both;
    cfg.validate_single()?;
    let case = cfg.case()?;
    let options = cfg.march_options();
    // sequential on purpose: the timings are compared
    let schemes = cfg.schemes_single();
    let results = run_ordered(&schemes, 1, |&s| march(&case.spec, s, &options));
    let mut rows = Vec::new();
    for (s, res) in schemes.iter().zip(results) {
        let res = res?;
        rows.push(ConvergenceRow {
            coarse_h: match *s {
                Scheme::TwoGrid { coarse, .. } => Some(1.0 / coarse as f64),
                Scheme::Standard { .. } => None,
            },
            h: 1.0 / s.fine_cells() as f64,
            error_l2: res.final_error.unwrap_or(0.0),
            order: None,
            cpu_seconds: res.solve_seconds,
        });
    }
    let standard = rows.pop().expect("two rows");
    let twogrid = rows.pop().expect("two rows");
    Ok(Comparison { twogrid, standard })
}

pub fn cmd_compare(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let c = compare(cfg)?;
    write_csv_to(cfg, &[c.twogrid.clone(), c.standard.clone()], out)?;
    writeln!(out, "error_ratio: {:.6}", c.error_ratio())?;
    writeln!(out, "time_ratio: {:.6}", c.time_ratio())?;
    writeln!(out, "twogrid_faster: {}", c.twogrid_faster())?;
    Ok(())
}

type CommandFn = fn(&RunConfig, &mut dyn Write) -> Result<()>;

/// Exit status for an error: 2 for configuration problems, 3 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. }
        | Error::InvalidOrder(_)
        | Error::NotNested { .. }
        | Error::MeshTooSmall(_) => EXIT_CONFIG,
        _ => EXIT_SOLVER,
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Normal output goes to `out`, diagnostics to `err`.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{e}")
            } else {
                write!(out, "{e}")
            };
            return code;
        }
    };
    let (args, f): (&ConfigArgs, CommandFn) = match &cli.command {
        Command::Run(a) => (a, cmd_run),
        Command::Table(a) => (a, cmd_table),
        Command::Compare(a) => (a, cmd_compare),
    };
    match args.resolve().and_then(|cfg| f(&cfg, out)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                let _ = writeln!(err, "  caused by: {s}");
                src = s.source();
            }
            exit_code(&e)
        }
    }
}
