//! Command-line front end.
//!
//! Every command produces a [`Report`] made of named tables plus scalar
//! diagnostics, rendered either as CSV (`#` metadata lines, one header row
//! per table) or as a single JSON object with `config`, `results` and
//! `diagnostics` keys. Numbers are rounded to 12 significant digits in both
//! encodings, so CSV and JSON carry identical values and repeated runs are
//! byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::amplitude::{scattered_field, scattered_normalization, transmitted_field, AmplitudeField};
use crate::analysis::{self, Measure};
use crate::error::Error as CoreError;
use crate::moments::{ratio_r, ratio_r_asymptotic, Axis};
use crate::params::{ControlParams, GridPolicy, GridSpec};
use crate::schmidt::{count_peaks, schmidt_coefficients, schmidt_decompose, SchmidtSpectrum};

const PEAK_THRESHOLD: f64 = 0.05;
/// Schmidt coefficients below this are not written out.
const LAMBDA_OUTPUT_FLOOR: f64 = 1e-15;
const CONVERGENCE_LADDER: [f64; 3] = [0.5, 1.0, 2.0];

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("cannot read config {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("cannot write {path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Scattered amplitude on the grid.
    Field,
    /// Variance ratio R at one parameter point.
    Ratio,
    /// Schmidt coefficients and leading mode functions.
    Schmidt,
    /// R and K over the (eta, tau) lattice, with K(eta) and R(eta) fits per tau.
    Sweep,
    /// Entanglement pumping coefficient over taus and its a/tau + b fit.
    Epc,
    /// Forward-channel amplitude and its R and K.
    Transmitted,
    /// K and R on a ladder of grid sizes.
    Converge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    #[default]
    Json,
}

/// Flags and config-file keys; every field optional so the two can be layered.
#[derive(Debug, Clone, Default, Parser, Serialize, Deserialize)]
#[command(name = "recoil-ent", version, about = "Photon-atom momentum entanglement in resonant scattering")]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Overrides {
    #[arg(value_enum)]
    pub command: Option<Command>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub gc: Option<f64>,
    /// Nodes per grid axis (raised automatically to resolve narrow photon lines).
    #[arg(long)]
    pub n: Option<usize>,
    /// Δq range as "min,max".
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    pub q_range: Option<[f64; 2]>,
    /// Δk range as "min,max".
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    pub k_range: Option<[f64; 2]>,
    #[arg(long, value_delimiter = ',')]
    pub etas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub taus: Option<Vec<f64>>,
    #[arg(long, value_parser = parse_axis)]
    pub axis: Option<Axis>,
    /// Conditioning value of the other coordinate for R.
    #[arg(long, allow_hyphen_values = true)]
    pub fixed: Option<f64>,
    /// Number of Schmidt modes written out.
    #[arg(long)]
    pub modes: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Flat JSON file with the same keys as the flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl<'de> Deserialize<'de> for Axis {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn parse_range(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected \"min,max\", got \"{s}\""));
    }
    let lo = parts[0].trim().parse::<f64>().map_err(|e| e.to_string())?;
    let hi = parts[1].trim().parse::<f64>().map_err(|e| e.to_string())?;
    Ok([lo, hi])
}

fn parse_axis(s: &str) -> Result<Axis, String> {
    s.parse().map_err(|e: CoreError| e.to_string())
}

/// Fully resolved configuration of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    pub command: Command,
    pub eta: f64,
    pub tau: f64,
    pub epsilon: f64,
    pub gc: f64,
    pub n: usize,
    pub q_range: Option<[f64; 2]>,
    pub k_range: Option<[f64; 2]>,
    pub etas: Vec<f64>,
    pub taus: Vec<f64>,
    pub axis: Axis,
    pub fixed: f64,
    pub modes: usize,
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl RunConfig {
    /// Layers `flags` over `file`, then fills defaults.
    pub fn resolve(file: Overrides, flags: Overrides) -> Result<Self, CliError> {
        let command = flags.command.or(file.command).ok_or_else(|| CliError::Usage("no command given".into()))?;
        Ok(Self {
            command,
            eta: flags.eta.or(file.eta).unwrap_or(10.0),
            tau: flags.tau.or(file.tau).unwrap_or(1.0),
            epsilon: flags.epsilon.or(file.epsilon).unwrap_or(0.0),
            gc: flags.gc.or(file.gc).unwrap_or(0.0),
            n: flags.n.or(file.n).unwrap_or(1000),
            q_range: flags.q_range.or(file.q_range),
            k_range: flags.k_range.or(file.k_range),
            etas: flags.etas.or(file.etas).unwrap_or_else(|| vec![5.0, 10.0, 15.0, 20.0]),
            taus: flags.taus.or(file.taus).unwrap_or_else(|| vec![0.1, 0.2, 0.3, 0.5, 0.7, 1.0]),
            axis: flags.axis.or(file.axis).unwrap_or_default(),
            fixed: flags.fixed.or(file.fixed).unwrap_or(0.0),
            modes: flags.modes.or(file.modes).unwrap_or(3),
            out: flags.out.or(file.out),
            format: flags.format.or(file.format).unwrap_or_default(),
        })
    }

    /// Parses command-line arguments (program name first), reading `--config` if given.
    pub fn from_args<I, T>(args: I) -> Result<Self, CliError>
    where
        I: IntoIterator<Item = T>,
        T: Into<std::ffi::OsString> + Clone,
    {
        let flags = Overrides::try_parse_from(args).map_err(|e| CliError::Usage(first_line(&e.to_string())))?;
        let file = match &flags.config {
            Some(path) => read_config(path)?,
            None => Overrides::default(),
        };
        Self::resolve(file, flags)
    }

    fn controls(&self) -> Result<ControlParams, CoreError> {
        ControlParams::new(self.eta, self.tau)?.with_epsilon(self.epsilon)?.with_coupling(self.gc)
    }

    fn policy(&self) -> GridPolicy {
        let mut p = GridPolicy::new(self.n);
        p.q_range = self.q_range.map(|[a, b]| (a, b));
        p.k_range = self.k_range.map(|[a, b]| (a, b));
        p
    }
}

fn read_config(path: &Path) -> Result<Overrides, CliError> {
    let err = |message: String| CliError::Config { path: path.to_path_buf(), message };
    let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| err(e.to_string()))
}

fn first_line(s: &str) -> String {
    s.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments").trim().to_string()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Missing,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Missing, Cell::Num)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(name: &str, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub tables: Vec<Table>,
    pub diagnostics: Vec<(String, Cell)>,
}

impl Report {
    fn diag(&mut self, key: &str, value: impl Into<Cell>) {
        self.diagnostics.push((key.into(), value.into()));
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn diagnostic(&self, key: &str) -> Option<f64> {
        self.diagnostics.iter().find(|(k, _)| k == key).and_then(|(_, v)| match v {
            Cell::Num(x) => Some(*x),
            Cell::Int(i) => Some(*i as f64),
            _ => None,
        })
    }
}

/// Runs the configured command.
pub fn run(config: &RunConfig) -> Result<Report, CliError> {
    match config.command {
        Command::Field => run_field(config),
        Command::Ratio => run_ratio(config),
        Command::Schmidt => run_schmidt(config),
        Command::Sweep => run_sweep(config),
        Command::Epc => run_epc(config),
        Command::Transmitted => run_transmitted(config),
        Command::Converge => run_converge(config),
    }
    .map_err(CliError::from)
}

fn field_table(field: &AmplitudeField) -> Table {
    let mut t = Table::new("field", &["dq", "dk", "re", "im", "abs2"]);
    let (q, k) = (field.grid().q_axis(), field.grid().k_axis());
    for (i, row) in field.values().outer_iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            t.push(vec![q.nodes[i].into(), k.nodes[j].into(), v.re.into(), v.im.into(), v.norm_sqr().into()]);
        }
    }
    t
}

fn grid_diagnostics(report: &mut Report, grid: &GridSpec) {
    report.diag("n_q", grid.n_q);
    report.diag("n_k", grid.n_k);
    report.diag("q_min", grid.q_min);
    report.diag("q_max", grid.q_max);
    report.diag("k_min", grid.k_min);
    report.diag("k_max", grid.k_max);
}

fn run_field(config: &RunConfig) -> Result<Report, CoreError> {
    let ctrl = config.controls()?;
    let grid = config.policy().grid_for(&ctrl)?;
    let field = scattered_field(&ctrl, &grid)?;
    let mut report = Report::default();
    grid_diagnostics(&mut report, &grid);
    report.diag("normalization", scattered_normalization(&ctrl));
    report.diag("sampled_norm", field.sampled_norm());
    report.tables.push(field_table(&field));
    Ok(report)
}

fn run_ratio(config: &RunConfig) -> Result<Report, CoreError> {
    let ctrl = config.controls()?;
    let grid = config.policy().grid_for(&ctrl)?;
    let field = scattered_field(&ctrl, &grid)?;
    let r = ratio_r(&field, config.axis, config.fixed)?;
    let asymptotic = ratio_r_asymptotic(&ctrl);
    let mut t =
        Table::new("ratio", &["eta", "tau", "single_variance", "coinc_variance", "fixed_node", "ratio", "asymptotic"]);
    t.push(vec![
        ctrl.eta().into(),
        ctrl.tau().into(),
        r.single_variance.into(),
        r.coinc_variance.into(),
        r.fixed_node.into(),
        r.ratio.into(),
        asymptotic.into(),
    ]);
    let mut report = Report::default();
    grid_diagnostics(&mut report, &grid);
    report.diag("relative_deviation", r.ratio / asymptotic - 1.0);
    report.tables.push(t);
    Ok(report)
}

fn mode_tables(report: &mut Report, spectrum: &SchmidtSpectrum, modes: usize) -> Result<(), CoreError> {
    let grid = spectrum.grid();
    let mut lambdas = Table::new("spectrum", &["n", "lambda"]);
    for (n, l) in spectrum.lambdas().iter().enumerate().take_while(|(_, l)| **l >= LAMBDA_OUTPUT_FLOOR) {
        lambdas.push(vec![n.into(), (*l).into()]);
    }
    report.tables.push(lambdas);

    let mut cols = vec!["k".to_string()];
    for n in 0..modes {
        cols.extend([format!("phi{n}_re"), format!("phi{n}_im"), format!("phi{n}_abs2")]);
    }
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut photon = Table::new("photon_modes", &col_refs);
    for (j, k) in grid.k_axis().nodes.iter().enumerate() {
        let mut row = vec![Cell::Num(*k)];
        for n in 0..modes {
            let v = spectrum.photon_modes()[[j, n]];
            row.extend([v.re.into(), v.im.into(), v.norm_sqr().into()]);
        }
        photon.push(row);
    }
    report.tables.push(photon);

    let cols: Vec<String> = std::iter::once("q".to_string())
        .chain((0..modes).flat_map(|n| [format!("psi{n}_re"), format!("psi{n}_im"), format!("psi{n}_abs2")]))
        .collect();
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut atom = Table::new("atom_modes", &col_refs);
    for (i, q) in grid.q_axis().nodes.iter().enumerate() {
        let mut row = vec![Cell::Num(*q)];
        for n in 0..modes {
            let v = spectrum.atom_modes()[[i, n]];
            row.extend([v.re.into(), v.im.into(), v.norm_sqr().into()]);
        }
        atom.push(row);
    }
    report.tables.push(atom);

    for n in 0..modes {
        report.diag(&format!("photon_mode{n}_peaks"), count_peaks(spectrum.photon_mode(n), PEAK_THRESHOLD)?);
    }
    Ok(())
}

fn run_schmidt(config: &RunConfig) -> Result<Report, CoreError> {
    let ctrl = config.controls()?;
    let grid = config.policy().grid_for(&ctrl)?;
    let field = scattered_field(&ctrl, &grid)?;
    let spectrum = schmidt_decompose(&field, config.modes.clamp(1, grid.n_q.min(grid.n_k)))?;
    let mut report = Report::default();
    grid_diagnostics(&mut report, &grid);
    report.diag("schmidt_number", spectrum.schmidt_number());
    report.diag("raw_lambda_sum", spectrum.raw_sum());
    mode_tables(&mut report, &spectrum, config.modes.min(spectrum.n_modes()))?;
    Ok(report)
}

fn run_sweep(config: &RunConfig) -> Result<Report, CoreError> {
    let table = analysis::sweep(&config.etas, &config.taus, &[Measure::R, Measure::K], &config.policy())?;
    let mut t = Table::new("sweep", &["eta", "tau", "R", "K", "n_q", "n_k", "truncation", "error"]);
    for r in &table.rows {
        t.push(vec![
            r.eta.into(),
            r.tau.into(),
            r.r.into(),
            r.k.into(),
            r.n_q.into(),
            r.n_k.into(),
            r.truncation.into(),
            r.error.clone().map_or(Cell::Missing, Cell::Text),
        ]);
    }
    let mut fits = Table::new("fits", &["tau", "K_slope", "K_intercept", "R_slope", "R_intercept"]);
    let mut taus: Vec<f64> = table.rows.iter().map(|r| r.tau).collect();
    taus.sort_by(f64::total_cmp);
    taus.dedup();
    for tau in taus {
        let (kx, ky) = table.k_series(tau);
        let (rx, ry) = table.r_series(tau);
        let (kf, rf) = (analysis::linear_fit(&kx, &ky).ok(), analysis::linear_fit(&rx, &ry).ok());
        if kf.is_none() && rf.is_none() {
            continue;
        }
        fits.push(vec![
            tau.into(),
            kf.map(|f| f.slope).into(),
            kf.map(|f| f.intercept).into(),
            rf.map(|f| f.slope).into(),
            rf.map(|f| f.intercept).into(),
        ]);
    }
    let mut report = Report::default();
    report.diag("failed_points", table.rows.iter().filter(|r| r.error.is_some()).count());
    report.tables.push(t);
    report.tables.push(fits);
    Ok(report)
}

fn run_epc(config: &RunConfig) -> Result<Report, CoreError> {
    let policy = config.policy();
    let baseline = analysis::baseline_fit(&config.etas, &policy)?;
    let mut t = Table::new("epc", &["tau", "K_slope", "K_intercept", "K_rms", "epc"]);
    let mut taus = Vec::new();
    let mut epcs = Vec::new();
    for &tau in &config.taus {
        let p = analysis::epc_with_baseline(tau, &config.etas, baseline.slope, &policy)?;
        t.push(vec![
            tau.into(),
            p.scattered.slope.into(),
            p.scattered.intercept.into(),
            p.scattered.rms_residual.into(),
            p.epc.into(),
        ]);
        taus.push(tau);
        epcs.push(p.epc);
    }
    let mut report = Report::default();
    report.diag("baseline_slope", baseline.slope);
    report.diag("baseline_intercept", baseline.intercept);
    match analysis::epc_curve_fit(&taus, &epcs) {
        Ok(fit) => {
            report.diag("fit_a", fit.a);
            report.diag("fit_b", fit.b);
            report.diag("fit_rms", fit.rms);
        }
        Err(e) => report.diag("fit_error", Cell::Text(e.to_string())),
    }
    report.tables.push(t);
    Ok(report)
}

fn run_transmitted(config: &RunConfig) -> Result<Report, CoreError> {
    let ctrl = config.controls()?;
    let grid = config.policy().grid_for(&ctrl)?;
    let field = transmitted_field(&ctrl, &grid)?;
    let spectrum = schmidt_decompose(&field, config.modes.clamp(1, grid.n_q.min(grid.n_k)))?;
    let r = ratio_r(&field, config.axis, config.fixed)?;
    let mut report = Report::default();
    grid_diagnostics(&mut report, &grid);
    report.diag("ratio", r.ratio);
    report.diag("schmidt_number", spectrum.schmidt_number());
    for n in 0..config.modes.min(spectrum.n_modes()) {
        report.diag(&format!("photon_mode{n}_peaks"), count_peaks(spectrum.photon_mode(n), PEAK_THRESHOLD)?);
    }
    report.tables.push(field_table(&field));
    Ok(report)
}

fn run_converge(config: &RunConfig) -> Result<Report, CoreError> {
    let ctrl = config.controls()?;
    let base = config.policy().grid_for(&ctrl)?;
    let mut t =
        Table::new("converge", &["scale", "n_q", "n_k", "q_max", "k_max", "K", "R", "K_rel_change", "R_rel_change"]);
    let mut previous: Option<(f64, f64)> = None;
    for scale in CONVERGENCE_LADDER {
        let scaled = |n: usize| ((n as f64 * scale).round() as usize).max(crate::params::MIN_NODES);
        let grid = GridSpec::new(
            (base.q_min * scale, base.q_max * scale),
            (base.k_min * scale, base.k_max * scale),
            scaled(base.n_q),
            scaled(base.n_k),
            base.rule,
        )?;
        let field = scattered_field(&ctrl, &grid)?;
        let k = schmidt_coefficients(&field)?.schmidt_number;
        let r = ratio_r(&field, config.axis, config.fixed)?.ratio;
        let (dk, dr) = match previous {
            Some((pk, pr)) => (Cell::Num(k / pk - 1.0), Cell::Num(r / pr - 1.0)),
            None => (Cell::Missing, Cell::Missing),
        };
        t.push(vec![
            scale.into(),
            grid.n_q.into(),
            grid.n_k.into(),
            grid.q_max.into(),
            grid.k_max.into(),
            k.into(),
            r.into(),
            dk,
            dr,
        ]);
        previous = Some((k, r));
    }
    let mut report = Report::default();
    report.tables.push(t);
    Ok(report)
}

/// 12 significant digits, scientific notation.
pub fn format_number(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.11e}")
    } else {
        "NaN".to_string()
    }
}

fn json_number(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    let rounded: f64 = format_number(x).parse().expect("formatted float parses");
    serde_json::Number::from_f64(rounded).map_or(Value::Null, Value::Number)
}

fn cell_json(c: &Cell) -> Value {
    match c {
        Cell::Num(x) => json_number(*x),
        Cell::Int(i) => Value::from(*i),
        Cell::Text(s) => Value::from(s.as_str()),
        Cell::Missing => Value::Null,
    }
}

fn cell_csv(c: &Cell) -> String {
    match c {
        Cell::Num(x) => format_number(*x),
        Cell::Int(i) => i.to_string(),
        Cell::Text(s) => {
            if s.contains([',', '"', '\n']) {
                format!("\"{}\"", s.replace('"', "\"\"").replace('\n', " "))
            } else {
                s.clone()
            }
        }
        Cell::Missing => String::new(),
    }
}

fn config_json(config: &RunConfig) -> Value {
    serde_json::to_value(config).expect("config serializes")
}

/// Renders a report in the requested format.
pub fn render(config: &RunConfig, report: &Report, format: Format) -> String {
    match format {
        Format::Json => {
            let mut results = Map::new();
            for t in &report.tables {
                let rows: Vec<Value> = t.rows.iter().map(|r| Value::Array(r.iter().map(cell_json).collect())).collect();
                results.insert(t.name.clone(), json!({ "columns": t.columns, "rows": rows }));
            }
            let diagnostics: Map<String, Value> =
                report.diagnostics.iter().map(|(k, v)| (k.clone(), cell_json(v))).collect();
            let doc = json!({
                "config": config_json(config),
                "version": env!("CARGO_PKG_VERSION"),
                "results": results,
                "diagnostics": diagnostics,
            });
            let mut s = serde_json::to_string(&doc).expect("report serializes");
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut s = String::new();
            let _ = writeln!(s, "# recoil-ent {}", env!("CARGO_PKG_VERSION"));
            let _ = writeln!(s, "# config: {}", config_json(config));
            for (k, v) in &report.diagnostics {
                let _ = writeln!(s, "# diagnostic {k} = {}", cell_csv(v));
            }
            for t in &report.tables {
                let _ = writeln!(s, "# table: {}", t.name);
                let _ = writeln!(s, "{}", t.columns.join(","));
                for row in &t.rows {
                    let cells: Vec<String> = row.iter().map(cell_csv).collect();
                    let _ = writeln!(s, "{}", cells.join(","));
                }
            }
            s
        }
    }
}

/// Runs a resolved configuration and writes its artifact.
pub fn execute(config: &RunConfig) -> Result<(), CliError> {
    let report = run(config)?;
    let text = render(config, &report, config.format);
    match &config.out {
        Some(path) => fs::write(path, text).map_err(|source| CliError::Output { path: path.clone(), source }),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|source| CliError::Output { path: PathBuf::from("<stdout>"), source }),
    }
}

/// Entry point shared by the binary and the tests; returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args: Vec<std::ffi::OsString> = args.into_iter().map(Into::into).collect();
    if let Err(e) = Overrides::try_parse_from(&args) {
        use clap::error::ErrorKind;
        if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
            let _ = e.print();
            return 0;
        }
    }
    let outcome = RunConfig::from_args(&args).and_then(|config| execute(&config));
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", first_line(&e.to_string()));
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<RunConfig, CliError> {
        RunConfig::from_args(std::iter::once("recoil-ent").chain(args.iter().copied()))
    }

    #[test]
    fn defaults_fill_missing_values() {
        let c = parse(&["schmidt"]).unwrap();
        assert_eq!(c.command, Command::Schmidt);
        assert_eq!((c.eta, c.tau, c.n, c.modes), (10.0, 1.0, 1000, 3));
        assert_eq!(c.format, Format::Json);
        assert_eq!(c.axis, Axis::Q);
    }

    #[test]
    fn lists_and_ranges_parse() {
        let c = parse(&["sweep", "--etas", "5,10", "--taus", "0.1", "--q-range", "-3,3", "--axis", "k"]).unwrap();
        assert_eq!(c.etas, vec![5.0, 10.0]);
        assert_eq!(c.taus, vec![0.1]);
        assert_eq!(c.q_range, Some([-3.0, 3.0]));
        assert_eq!(c.axis, Axis::K);
    }

    #[test]
    fn unknown_command_and_bad_values_are_usage_errors() {
        for args in [&["frobnicate"][..], &["ratio", "--eta", "abc"], &["ratio", "--axis", "z"], &[]] {
            let e = parse(args).unwrap_err();
            assert_eq!(e.exit_code(), 1, "{args:?}: {e}");
        }
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        fs::write(&path, r#"{"command": "ratio", "eta": 4.0, "tau": 0.5, "etas": [5, 6, 7]}"#).unwrap();
        let c = parse(&["--config", path.to_str().unwrap(), "--tau", "2"]).unwrap();
        assert_eq!(c.command, Command::Ratio);
        assert_eq!((c.eta, c.tau), (4.0, 2.0));
        assert_eq!(c.etas, vec![5.0, 6.0, 7.0]);

        fs::write(&path, r#"{"command": "ratio", "bogus": 1}"#).unwrap();
        assert!(matches!(parse(&["--config", path.to_str().unwrap()]), Err(CliError::Config { .. })));
    }

    #[test]
    fn stored_config_round_trips() {
        let c = parse(&["epc", "--n", "64", "--taus", "0.5,1", "--format", "csv"]).unwrap();
        let text = serde_json::to_string(&c).unwrap();
        let file: Overrides = serde_json::from_str(&text).unwrap();
        assert_eq!(RunConfig::resolve(file, Overrides::default()).unwrap(), c);
    }

    #[test]
    fn numbers_have_twelve_significant_digits() {
        assert_eq!(format_number(5.791250063140161), "5.79125006314e0");
        assert_eq!(format_number(-0.000123), "-1.23000000000e-4");
        assert_eq!(format_number(f64::NAN), "NaN");
        assert_eq!(json_number(5.791250063140161), json!(5.79125006314));
    }

    #[test]
    fn numerical_errors_exit_with_two() {
        let e = CliError::from(CoreError::SliceUnderflow { axis: "k", value: 0.0, relative: 0.0 });
        assert_eq!(e.exit_code(), 2);
        assert_eq!(CliError::from(CoreError::InvalidParameter("x".into())).exit_code(), 1);
    }

    #[test]
    fn csv_and_json_carry_same_values() {
        let c = parse(&["ratio", "--n", "64", "--eta", "3"]).unwrap();
        let report = run(&c).unwrap();
        let json: Value = serde_json::from_str(&render(&c, &report, Format::Json)).unwrap();
        let csv = render(&c, &report, Format::Csv);
        let data_line = csv.lines().filter(|l| !l.starts_with('#')).nth(1).unwrap();
        let from_csv: Vec<f64> = data_line.split(',').map(|x| x.parse().unwrap()).collect();
        let from_json: Vec<f64> =
            json["results"]["ratio"]["rows"][0].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
        assert_eq!(from_csv, from_json);
        assert!(csv.starts_with("# recoil-ent"));
        assert!(csv.lines().nth(1).unwrap().starts_with("# config: {"));
    }
}
