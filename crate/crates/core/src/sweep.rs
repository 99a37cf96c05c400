//! Deterministic parameter sweeps producing CSV tables.
//!
//! A [`SweepSpec`] is resolved from flat `key=value` settings (command-line
//! flags and/or a config file) and every table embeds the resolved spec as
//! `# spec.<key>=<value>` lines, so a table can be fed back with `--config`
//! to regenerate itself.
//!
//! Grid points are evaluated on a rayon pool and collected by index, so the
//! table body does not depend on the worker count.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evolution::{branch_state, fock_distribution, ground_fidelity};
use crate::fock_oracle::{self, IntegratorConfig};
use crate::metrology::{self, qcrb, qfi_coherent_spin, qfi_exact, qfi_truncated_analytic, scaling_exponent, GhzModel};
use crate::params::{DriveProfile, PhysicalParams, SpinBranch};
use crate::parity;

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));
const SIGNIFICANT_DIGITS: usize = 12;

/// Relative agreement required between QFI engines before a row is flagged.
pub const QFI_AGREEMENT: f64 = 1e-6;
/// Absolute agreement required between parity engines.
pub const PARITY_AGREEMENT: f64 = 1e-9;
/// Minimum distance of the fringe phase `2Nπω_s` from a multiple of π targeted
/// by the automatic operating point of `precision-scaling`.
pub const FRINGE_MARGIN: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    PhaseDiagram,
    FockHistogram,
    QfiScaling,
    ParityScan,
    PrecisionScaling,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::PhaseDiagram => "phase-diagram",
            Command::FockHistogram => "fock-histogram",
            Command::QfiScaling => "qfi-scaling",
            Command::ParityScan => "parity-scan",
            Command::PrecisionScaling => "precision-scaling",
        }
    }

    /// Parameters the command iterates over, outermost first.
    fn parameters(self) -> &'static [Parameter] {
        use Parameter::*;
        match self {
            Command::PhaseDiagram => &[OmegaS, OmegaP],
            Command::FockHistogram => &[OmegaS, OmegaP],
            Command::QfiScaling => &[OmegaS, OmegaP, N],
            Command::ParityScan => &[N, OmegaP, OmegaS],
            Command::PrecisionScaling => &[OmegaS, OmegaP, N],
        }
    }

    /// Parameters an unnamed `--grid` is assigned to, in order.
    fn grid_targets(self) -> &'static [Parameter] {
        use Parameter::*;
        match self {
            Command::PhaseDiagram => &[OmegaS, OmegaP],
            Command::FockHistogram => &[],
            Command::QfiScaling | Command::PrecisionScaling => &[N],
            Command::ParityScan => &[OmegaS],
        }
    }

    fn default_samples(self, p: Parameter) -> Samples {
        use Parameter::*;
        let grid = |min, max, count, log| Samples::Grid(Grid { min, max, count, log });
        match (self, p) {
            (Command::PhaseDiagram, OmegaS | OmegaP) => grid(0.0, 1.0, 101, false),
            (Command::FockHistogram, OmegaS) => Samples::List(vec![0.1]),
            (Command::FockHistogram, OmegaP) => Samples::List(vec![0.6]),
            (Command::QfiScaling, OmegaS) => Samples::List(vec![0.1]),
            (Command::QfiScaling, OmegaP) => Samples::List(vec![0.5, 0.55, 0.6]),
            (Command::QfiScaling, N) => grid(1.0, 20.0, 20, false),
            (Command::ParityScan, OmegaS) => grid(0.0, 1.0, 201, false),
            (Command::ParityScan, OmegaP) => Samples::List(vec![0.5]),
            (Command::PrecisionScaling, OmegaS) => Samples::Auto,
            (Command::PrecisionScaling, OmegaP) => Samples::List(vec![0.5]),
            (Command::PrecisionScaling, N) => grid(1.0, 32.0, 6, true),
            (_, N) => Samples::List(vec![5.0]),
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [
            Command::PhaseDiagram,
            Command::FockHistogram,
            Command::QfiScaling,
            Command::ParityScan,
            Command::PrecisionScaling,
        ]
        .into_iter()
        .find(|c| c.name() == s)
        .ok_or_else(|| Error::Domain(format!("unknown command '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Parameter {
    OmegaS,
    OmegaP,
    N,
}

impl Parameter {
    pub fn name(self) -> &'static str {
        match self {
            Parameter::OmegaS => "omega_s",
            Parameter::OmegaP => "omega_p",
            Parameter::N => "N",
        }
    }

    fn list_key(self) -> &'static str {
        match self {
            Parameter::OmegaS => "omega-s",
            Parameter::OmegaP => "omega-p",
            Parameter::N => "n-particles",
        }
    }
}

impl FromStr for Parameter {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "omega_s" | "omega-s" => Ok(Parameter::OmegaS),
            "omega_p" | "omega-p" => Ok(Parameter::OmegaP),
            "N" | "n" => Ok(Parameter::N),
            _ => Err(Error::Domain(format!("unknown grid parameter '{s}' (expected omega_s, omega_p or N)"))),
        }
    }
}

/// `min:max:count[:log]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
    pub log: bool,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        let last = (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                let u = i as f64 / last;
                if i == 0 {
                    self.min
                } else if i + 1 == self.count {
                    self.max
                } else if self.log {
                    (self.min.ln() + u * (self.max.ln() - self.min.ln())).exp()
                } else {
                    self.min + u * (self.max - self.min)
                }
            })
            .collect()
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.min, self.max, self.count)?;
        if self.log {
            f.write_str(":log")?;
        }
        Ok(())
    }
}

impl FromStr for Grid {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Domain(format!("malformed grid '{s}' (expected min:max:count[:log])"));
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        if !(3..=4).contains(&parts.len()) {
            return Err(bad());
        }
        let min: f64 = parts[0].parse().map_err(|_| bad())?;
        let max: f64 = parts[1].parse().map_err(|_| bad())?;
        let count: usize = parts[2].parse().map_err(|_| bad())?;
        let log = match parts.get(3) {
            None | Some(&"lin") => false,
            Some(&"log") => true,
            Some(_) => return Err(bad()),
        };
        if !(min.is_finite() && max.is_finite()) || max < min {
            return Err(Error::Domain(format!("grid '{s}' needs finite min <= max")));
        }
        if count < 2 {
            return Err(Error::Domain(format!("grid '{s}' needs at least 2 points")));
        }
        if log && min <= 0.0 {
            return Err(Error::Domain(format!("log grid '{s}' needs positive bounds")));
        }
        Ok(Grid { min, max, count, log })
    }
}

/// Values taken by one parameter.
#[derive(Debug, Clone, PartialEq)]
pub enum Samples {
    Grid(Grid),
    List(Vec<f64>),
    /// Chosen by the command (operating point of `precision-scaling`).
    Auto,
}

impl Samples {
    fn values(&self) -> Vec<f64> {
        match self {
            Samples::Grid(g) => g.values(),
            Samples::List(v) => v.clone(),
            Samples::Auto => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineChoice {
    Exact,
    Truncated,
    Both,
}

impl EngineChoice {
    pub fn exact(self) -> bool {
        self != EngineChoice::Truncated
    }

    pub fn truncated(self) -> bool {
        self != EngineChoice::Exact
    }

    pub fn name(self) -> &'static str {
        match self {
            EngineChoice::Exact => "exact",
            EngineChoice::Truncated => "truncated",
            EngineChoice::Both => "both",
        }
    }
}

impl FromStr for EngineChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(EngineChoice::Exact),
            "truncated" => Ok(EngineChoice::Truncated),
            "both" => Ok(EngineChoice::Both),
            _ => Err(Error::Domain(format!("unknown engine '{s}' (expected exact, truncated or both)"))),
        }
    }
}

/// Raw `key=value` settings from a config file or the command line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings(BTreeMap<String, String>);

const KEYS: &[&str] = &[
    "command",
    "omega-s",
    "omega-p",
    "n-particles",
    "grid",
    "engine",
    "nmax",
    "dt",
    "branch",
    "workers",
    "out",
];

impl Settings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        let key = key.trim().replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::Domain(format!("unknown setting '{key}'")));
        }
        self.0.insert(key, value.into().trim().to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    /// Parses a config file: `key=value` lines with `#` comments.
    ///
    /// If the text contains `# spec.` lines (a table written by this tool),
    /// only those are read and everything else is ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let embedded = text.lines().any(|l| l.trim_start().starts_with("# spec."));
        let mut out = Settings::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            let body = if embedded {
                match line.strip_prefix("# spec.") {
                    Some(rest) => rest,
                    None => continue,
                }
            } else if line.is_empty() || line.starts_with('#') {
                continue;
            } else {
                line
            };
            let (k, v) = body
                .split_once('=')
                .ok_or_else(|| Error::Domain(format!("config line {}: expected key=value, got '{line}'", i + 1)))?;
            out.set(k, v)?;
        }
        Ok(out)
    }

    /// Applies `overrides` on top of `self`. A list flag for a parameter drops
    /// any grid this config defined for it, and vice versa.
    pub fn merge(&self, overrides: &Settings) -> Result<Settings> {
        let mut base = self.0.clone();
        for p in [Parameter::OmegaS, Parameter::OmegaP, Parameter::N] {
            if overrides.get(p.list_key()).is_some() {
                if let Some(grid) = base.get("grid") {
                    let kept: Vec<String> = split_list(grid)
                        .into_iter()
                        .filter(|axis| !matches!(axis.split_once('='), Some((name, _)) if name.trim().parse::<Parameter>().ok() == Some(p)))
                        .collect();
                    if kept.is_empty() {
                        base.remove("grid");
                    } else {
                        base.insert("grid".into(), kept.join(","));
                    }
                }
            }
        }
        if let Some(grid) = overrides.get("grid") {
            for axis in split_list(grid) {
                if let Some((name, _)) = axis.split_once('=') {
                    base.remove(name.trim().parse::<Parameter>()?.list_key());
                }
            }
        }
        for (k, v) in &overrides.0 {
            base.insert(k.clone(), v.clone());
        }
        Ok(Settings(base))
    }
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty()).map(String::from).collect()
}

fn parse_floats(key: &str, s: &str) -> Result<Vec<f64>> {
    let v: Vec<f64> = split_list(s)
        .iter()
        .map(|x| x.parse::<f64>().map_err(|_| Error::Domain(format!("{key}: '{x}' is not a number"))))
        .collect::<Result<_>>()?;
    if v.is_empty() {
        return Err(Error::Domain(format!("{key}: empty list")));
    }
    if let Some(x) = v.iter().find(|x| !x.is_finite()) {
        return Err(Error::Domain(format!("{key}: {x} is not finite")));
    }
    Ok(v)
}

fn parse_value<T: FromStr>(key: &str, s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Domain(format!("{key}: cannot parse '{s}'")))
}

/// Fully resolved sweep description.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub command: Command,
    pub omega_s: Samples,
    pub omega_p: Samples,
    pub n_particles: Samples,
    pub engine: EngineChoice,
    pub n_max: usize,
    pub dt: Option<f64>,
    pub branch: SpinBranch,
    pub workers: usize,
    pub out: Option<PathBuf>,
}

impl SweepSpec {
    /// Unit-constant defaults for `command`.
    pub fn new(command: Command) -> Self {
        Self::resolve(command, &Settings::new()).expect("defaults are valid")
    }

    pub fn resolve(command: Command, settings: &Settings) -> Result<Self> {
        if let Some(c) = settings.get("command") {
            if c != command.name() {
                return Err(Error::Domain(format!("config was written for '{c}', not '{command}'")));
            }
        }
        let mut samples: BTreeMap<Parameter, Samples> = BTreeMap::new();
        if let Some(grid) = settings.get("grid") {
            let mut targets = command.grid_targets().iter();
            for axis in split_list(grid) {
                let (param, range) = match axis.split_once('=') {
                    Some((name, range)) => (name.trim().parse::<Parameter>()?, range),
                    None => {
                        let p = targets
                            .find(|p| !samples.contains_key(p))
                            .ok_or_else(|| Error::Domain(format!("grid '{axis}' needs a parameter name for {command}")))?;
                        (*p, axis.as_str())
                    }
                };
                if !command.parameters().contains(&param) {
                    return Err(Error::Domain(format!("{command} has no {} axis", param.name())));
                }
                if samples.insert(param, Samples::Grid(range.parse()?)).is_some() {
                    return Err(Error::Domain(format!("two grids given for {}", param.name())));
                }
            }
        }
        for p in [Parameter::OmegaS, Parameter::OmegaP, Parameter::N] {
            if let Some(list) = settings.get(p.list_key()) {
                if samples.contains_key(&p) {
                    return Err(Error::Domain(format!("both a grid and --{} given for {}", p.list_key(), p.name())));
                }
                samples.insert(p, Samples::List(parse_floats(p.list_key(), list)?));
            }
        }
        let mut take = |p: Parameter| samples.remove(&p).unwrap_or_else(|| command.default_samples(p));
        let spec = SweepSpec {
            command,
            omega_s: take(Parameter::OmegaS),
            omega_p: take(Parameter::OmegaP),
            n_particles: take(Parameter::N),
            engine: settings.get("engine").map(|s| s.parse()).transpose()?.unwrap_or(EngineChoice::Both),
            n_max: settings.get("nmax").map(|s| parse_value("nmax", s)).transpose()?.unwrap_or(10),
            dt: settings.get("dt").map(|s| parse_value("dt", s)).transpose()?,
            branch: settings.get("branch").map(|s| parse_value("branch", s)).transpose()?.unwrap_or(SpinBranch::Up),
            workers: match settings.get("workers") {
                Some(s) => parse_value("workers", s)?,
                None => std::thread::available_parallelism().map_or(1, |n| n.get()),
            },
            out: settings.get("out").map(PathBuf::from),
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::Domain("workers must be >= 1".into()));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::Domain(format!("dt must be positive, got {dt}")));
            }
        }
        if let Samples::List(v) = &self.n_particles {
            if let Some(n) = v.iter().find(|n| !(**n >= 1.0 && n.fract() == 0.0)) {
                return Err(Error::Domain(format!("particle numbers must be positive integers, got {n}")));
            }
        }
        if let Samples::Grid(g) = &self.n_particles {
            if g.min < 1.0 {
                return Err(Error::Domain("particle-number grid must start at >= 1".into()));
            }
        }
        if self.command == Command::FockHistogram && (self.omega_s.values().len() != 1 || self.omega_p.values().len() != 1) {
            return Err(Error::Domain("fock-histogram takes a single omega-s and omega-p".into()));
        }
        Ok(())
    }

    /// Particle numbers: rounded, deduplicated, ascending.
    pub fn particle_numbers(&self) -> Vec<usize> {
        let mut n: Vec<usize> = self.n_particles.values().iter().map(|x| x.round().max(1.0) as usize).collect();
        n.sort_unstable();
        n.dedup();
        n
    }

    /// `key=value` pairs that regenerate this spec (the output path is omitted).
    pub fn settings(&self) -> Vec<(String, String)> {
        let mut out = vec![("command".to_string(), self.command.name().to_string())];
        let mut grids = Vec::new();
        for p in self.command.parameters() {
            match self.samples(*p) {
                Samples::Grid(g) => grids.push(format!("{}={g}", p.name())),
                Samples::List(v) => out.push((p.list_key().into(), join(v))),
                Samples::Auto => {}
            }
        }
        if !grids.is_empty() {
            out.push(("grid".into(), grids.join(",")));
        }
        out.push(("engine".into(), self.engine.name().into()));
        if self.command == Command::FockHistogram {
            out.push(("nmax".into(), self.n_max.to_string()));
            out.push(("branch".into(), self.branch.name().into()));
            if let Some(dt) = self.dt {
                out.push(("dt".into(), dt.to_string()));
            }
        }
        out.push(("workers".into(), self.workers.to_string()));
        out
    }

    fn samples(&self, p: Parameter) -> &Samples {
        match p {
            Parameter::OmegaS => &self.omega_s,
            Parameter::OmegaP => &self.omega_p,
            Parameter::N => &self.n_particles,
        }
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

/// Rectangular table of optional numbers; `None` is written as an empty cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
    pub metadata: Vec<(String, String)>,
    /// Grid points where an engine failed for a reason other than an
    /// insensitive operating point.
    pub failures: usize,
}

impl ResultTable {
    fn new(spec: &SweepSpec, columns: &[&str]) -> Self {
        let mut metadata = vec![("tool".to_string(), TOOL_VERSION.to_string())];
        metadata.extend(spec.settings().into_iter().map(|(k, v)| (format!("spec.{k}"), v)));
        ResultTable {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            metadata,
            failures: 0,
        }
    }

    fn note(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.metadata.push((key.into(), value.into()));
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// Header row and data rows.
    pub fn body(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|c| c.map(format_number).unwrap_or_default()).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.metadata {
            s.push_str(&format!("# {k}={v}\n"));
        }
        s + &self.body()
    }
}

/// Shortest `%g`-style rendering with 12 significant digits.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if (-5..SIGNIFICANT_DIGITS as i32).contains(&exp) {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim(&format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim(mantissa))
    }
}

/// Outcome of one engine at one grid point.
fn cell(result: Result<f64>, row: usize, column: &str, table: &mut ResultTable) -> Option<f64> {
    match result {
        Ok(v) => Some(v),
        Err(Error::InsensitiveOperatingPoint { .. }) => None,
        Err(e) => {
            table.failures += 1;
            table.note(format!("error.row{row}.{column}"), e.to_string());
            None
        }
    }
}

fn run_parallel<T, R, F>(workers: usize, points: &[T], f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Domain(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| points.par_iter().map(&f).collect()))
}

fn unit_model(ws: f64, wp: f64, n: usize) -> Result<GhzModel> {
    GhzModel::unit(ws, wp, n)
}

fn agree(a: Option<f64>, b: Option<f64>, tolerance: impl Fn(f64, f64) -> bool) -> Option<f64> {
    match (a, b) {
        (Some(a), Some(b)) => Some(if tolerance(a, b) { 1.0 } else { 0.0 }),
        _ => None,
    }
}

fn relative_close(a: f64, b: f64) -> bool {
    (a - b).abs() <= QFI_AGREEMENT * a.abs().max(b.abs())
}

fn finish(mut table: ResultTable, start: Instant) -> ResultTable {
    table.note("wall_time_s", format!("{:.3}", start.elapsed().as_secs_f64()));
    table
}

fn product(a: &[f64], b: &[f64]) -> Vec<(f64, f64)> {
    a.iter().flat_map(|&x| b.iter().map(move |&y| (x, y))).collect()
}

/// Ground-state fidelity of both branches over an (ω_s, ω_p) grid.
pub fn phase_diagram(spec: &SweepSpec) -> Result<ResultTable> {
    let start = Instant::now();
    let mut table = ResultTable::new(spec, &["omega_s", "omega_p", "F0_up", "F0_down"]);
    let points = product(&spec.omega_s.values(), &spec.omega_p.values());
    let params = PhysicalParams::default();
    let results = run_parallel(spec.workers, &points, |&(ws, wp)| -> Option<Result<(f64, f64)>> {
        if wp <= 0.0 {
            return None;
        }
        let eval = || -> Result<(f64, f64)> {
            let prof = DriveProfile::constant(ws, wp)?;
            Ok((
                ground_fidelity(&branch_state(&params, &prof, SpinBranch::Up)?),
                ground_fidelity(&branch_state(&params, &prof, SpinBranch::Down)?),
            ))
        };
        Some(eval())
    })?;
    let mut skipped = 0;
    for (i, (&(ws, wp), r)) in points.iter().zip(results).enumerate() {
        let (up, down) = match r {
            None => {
                skipped += 1;
                (None, None)
            }
            Some(Ok((u, d))) => (Some(u), Some(d)),
            Some(Err(e)) => (cell(Err(e), i, "F0_up", &mut table), None),
        };
        table.rows.push(vec![Some(ws), Some(wp), up, down]);
    }
    if skipped > 0 {
        table.note("warning", format!("{skipped} rows with omega_p <= 0 left empty: the drive never completes"));
    }
    Ok(finish(table, start))
}

/// Occupation of the first `n_max + 1` Fock levels for one branch, closed form
/// alongside the independent integrator.
pub fn fock_histogram(spec: &SweepSpec) -> Result<ResultTable> {
    let start = Instant::now();
    let mut table = ResultTable::new(spec, &["n", "F_n", "F_n_integrator"]);
    let ws = spec.omega_s.values()[0];
    let wp = spec.omega_p.values()[0];
    let params = PhysicalParams::default();
    let prof = DriveProfile::constant(ws, wp)?;
    let state = branch_state(&params, &prof, spec.branch)?;
    let closed = fock_distribution(&state, spec.n_max);

    let mut config = IntegratorConfig::for_profile(&prof);
    config.n_max = config.n_max.max(spec.n_max + 8);
    if let Some(dt) = spec.dt {
        config.dt = dt;
    }
    let integrated = match fock_oracle::integrate(&params, &prof, spec.branch, &config) {
        Ok(run) => {
            table.note("integrator.steps", run.steps.to_string());
            table.note("integrator.norm_loss", format_number(run.norm_loss));
            Some(run.state.populations())
        }
        Err(e @ Error::Domain(_)) => return Err(e),
        Err(e) => {
            table.failures += 1;
            table.note("error.integrator", e.to_string());
            None
        }
    };
    for (n, f) in closed.iter().enumerate() {
        let g = integrated.as_ref().map(|p| p[n]);
        table.rows.push(vec![Some(n as f64), Some(*f), g]);
    }
    table.note("sum_F_n", format_number(closed.iter().sum()));
    Ok(finish(table, start))
}

fn record_slopes(table: &mut ResultTable, key_columns: &[&str], x: &str, y: &[&str], fit_to: fn(f64) -> f64) {
    let keys: Vec<usize> = key_columns.iter().map(|k| table.columns.iter().position(|c| c == k).unwrap()).collect();
    let xi = table.columns.iter().position(|c| c == x).unwrap();
    let mut groups: Vec<(Vec<f64>, Vec<usize>)> = Vec::new();
    for (r, row) in table.rows.iter().enumerate() {
        let key: Vec<f64> = keys.iter().map(|&k| row[k].unwrap_or(f64::NAN)).collect();
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, rows)) => rows.push(r),
            None => groups.push((key, vec![r])),
        }
    }
    table.note("slope.key", format!("[{}]", key_columns.join(",")));
    for (key, rows) in groups {
        let label: Vec<String> = key.iter().map(|v| format_number(*v)).collect();
        for col in y {
            let Some(yi) = table.columns.iter().position(|c| c == col) else {
                continue;
            };
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .filter_map(|&r| Some((table.rows[r][xi]?, fit_to(table.rows[r][yi]?))))
                .collect();
            let value = match scaling_exponent(&pts) {
                Ok(s) => format_number(s),
                Err(e) => format!("unavailable ({e})"),
            };
            table.note(format!("slope.{col}[{}]", label.join(",")), value);
        }
    }
}

/// GHZ and uncorrelated-input QFI against particle number.
pub fn qfi_scaling(spec: &SweepSpec) -> Result<ResultTable> {
    let start = Instant::now();
    let mut columns = vec!["omega_s", "omega_p", "N"];
    if spec.engine.exact() {
        columns.push("F_Q_exact");
    }
    if spec.engine.truncated() {
        columns.push("F_Q_truncated");
    }
    columns.push("F_Q_coherent_spin");
    if spec.engine == EngineChoice::Both {
        columns.push("engines_agree");
    }
    let mut table = ResultTable::new(spec, &columns);
    let ns = spec.particle_numbers();
    let points: Vec<(f64, f64, usize)> = product(&spec.omega_s.values(), &spec.omega_p.values())
        .into_iter()
        .flat_map(|(ws, wp)| ns.iter().map(move |&n| (ws, wp, n)))
        .collect();
    let engine = spec.engine;
    let results = run_parallel(spec.workers, &points, |&(ws, wp, n)| {
        let model = unit_model(ws, wp, n);
        let run = |f: &dyn Fn(&GhzModel) -> Result<f64>| model.as_ref().map_err(Clone::clone).and_then(f);
        (
            engine.exact().then(|| run(&|m| Ok(qfi_exact(m, metrology::DEFAULT_STEP)?.value))),
            engine.truncated().then(|| run(&|m| Ok(qfi_truncated_analytic(m)?.value))),
            run(&|m| Ok(qfi_coherent_spin(m, metrology::DEFAULT_STEP)?.value)),
        )
    })?;
    for (i, (&(ws, wp, n), (exact, truncated, css))) in points.iter().zip(results).enumerate() {
        let mut row = vec![Some(ws), Some(wp), Some(n as f64)];
        let e = exact.map(|r| cell(r, i, "F_Q_exact", &mut table));
        let t = truncated.map(|r| cell(r, i, "F_Q_truncated", &mut table));
        row.extend(e.iter().chain(t.iter()).copied());
        row.push(cell(css, i, "F_Q_coherent_spin", &mut table));
        if let (Some(e), Some(t)) = (e, t) {
            row.push(agree(e, t, relative_close));
        }
        table.rows.push(row);
    }
    record_slopes(&mut table, &["omega_s", "omega_p"], "N", &["F_Q_exact", "F_Q_truncated", "F_Q_coherent_spin"], |v| v);
    Ok(finish(table, start))
}

/// Parity fringe and error-propagated precision against ω_s.
pub fn parity_scan(spec: &SweepSpec) -> Result<ResultTable> {
    let start = Instant::now();
    let mut columns = vec!["N", "omega_p", "omega_s"];
    if spec.engine.exact() {
        columns.push("P_exact");
    }
    if spec.engine.truncated() {
        columns.push("P_truncated");
    }
    if spec.engine.exact() {
        columns.push("delta_omega_exact");
    }
    if spec.engine.truncated() {
        columns.push("delta_omega_truncated");
    }
    if spec.engine == EngineChoice::Both {
        columns.push("engines_agree");
    }
    let mut table = ResultTable::new(spec, &columns);
    let points: Vec<(usize, f64, f64)> = spec
        .particle_numbers()
        .into_iter()
        .flat_map(|n| product(&spec.omega_p.values(), &spec.omega_s.values()).into_iter().map(move |(wp, ws)| (n, wp, ws)))
        .collect();
    let engine = spec.engine;
    let results = run_parallel(spec.workers, &points, |&(n, wp, ws)| {
        let model = unit_model(ws, wp, n);
        let run = |f: &dyn Fn(&GhzModel) -> Result<f64>| model.as_ref().map_err(Clone::clone).and_then(f);
        let exact = engine.exact().then(|| {
            (
                run(&parity::parity_expectation_exact),
                run(&|m| parity::rotation_precision(m, parity::DEFAULT_STEP)),
            )
        });
        let truncated = engine.truncated().then(|| {
            (
                run(&|m| Ok(parity::parity_moments_truncated(m)?.mean)),
                run(&parity::rotation_precision_truncated),
            )
        });
        (exact, truncated)
    })?;
    for (i, (&(n, wp, ws), (exact, truncated))) in points.iter().zip(results).enumerate() {
        let mut row = vec![Some(n as f64), Some(wp), Some(ws)];
        let e = exact.map(|(p, d)| (cell(p, i, "P_exact", &mut table), cell(d, i, "delta_omega_exact", &mut table)));
        let t = truncated.map(|(p, d)| (cell(p, i, "P_truncated", &mut table), cell(d, i, "delta_omega_truncated", &mut table)));
        row.extend(e.map(|x| x.0));
        row.extend(t.map(|x| x.0));
        row.extend(e.map(|x| x.1));
        row.extend(t.map(|x| x.1));
        if let (Some(e), Some(t)) = (e, t) {
            row.push(agree(e.0, t.0, |a, b| (a - b).abs() <= PARITY_AGREEMENT));
        }
        table.rows.push(row);
    }
    Ok(finish(table, start))
}

/// Smallest distance of `2Nπω_s` from a multiple of π over the given N.
pub fn fringe_margin(omega_s: f64, ns: &[usize]) -> f64 {
    ns.iter()
        .map(|&n| {
            let x = (2.0 * n as f64 * PI * omega_s).rem_euclid(PI);
            x.min(PI - x)
        })
        .fold(f64::INFINITY, f64::min)
}

/// ω_s in (0, 0.5) on a 1e-4 grid maximizing [`fringe_margin`] over `ns`
/// together with N = 1 (the single-particle fringe of the uncorrelated input).
pub fn select_operating_point(ns: &[usize]) -> (f64, f64) {
    let mut with_single = ns.to_vec();
    with_single.push(1);
    (1..5000)
        .map(|k| {
            let ws = k as f64 * 1e-4;
            (ws, fringe_margin(ws, &with_single))
        })
        .fold((0.0, f64::NEG_INFINITY), |best, c| if c.1 > best.1 { c } else { best })
}

/// Parity-readout precision of GHZ and uncorrelated inputs against N, with
/// the GHZ quantum Cramér-Rao bound.
pub fn precision_scaling(spec: &SweepSpec) -> Result<ResultTable> {
    let start = Instant::now();
    let ns = spec.particle_numbers();
    let mut spec = spec.clone();
    let mut selection = None;
    if spec.omega_s == Samples::Auto {
        let (ws, margin) = select_operating_point(&ns);
        spec.omega_s = Samples::List(vec![ws]);
        selection = Some(margin);
    }
    let mut columns = vec!["omega_s", "omega_p", "N"];
    if spec.engine.exact() {
        columns.push("delta_omega_ghz");
    }
    if spec.engine.truncated() {
        columns.push("delta_omega_ghz_truncated");
    }
    columns.extend(["delta_omega_csstate", "qcrb_ghz"]);
    let mut table = ResultTable::new(&spec, &columns);
    if let Some(margin) = selection {
        table.note("omega_s.selection", "automatic: maximizes the smallest distance of 2N*pi*omega_s from a multiple of pi over N and N=1");
        table.note("omega_s.margin_rad", format_number(margin));
        if margin < FRINGE_MARGIN {
            table.note("warning", format!("fringe margin {} rad is below the {FRINGE_MARGIN} rad target", format_number(margin)));
        }
    }
    let points: Vec<(f64, f64, usize)> = product(&spec.omega_s.values(), &spec.omega_p.values())
        .into_iter()
        .flat_map(|(ws, wp)| ns.iter().map(move |&n| (ws, wp, n)))
        .collect();
    let engine = spec.engine;
    let results = run_parallel(spec.workers, &points, |&(ws, wp, n)| {
        let model = unit_model(ws, wp, n);
        let run = |f: &dyn Fn(&GhzModel) -> Result<f64>| model.as_ref().map_err(Clone::clone).and_then(f);
        (
            engine.exact().then(|| run(&|m| parity::rotation_precision(m, parity::DEFAULT_STEP))),
            engine.truncated().then(|| run(&parity::rotation_precision_truncated)),
            run(&|m| parity::rotation_precision_coherent_spin(m, parity::DEFAULT_STEP)),
            run(&|m| qcrb(&qfi_exact(m, metrology::DEFAULT_STEP)?, 1)),
        )
    })?;
    for (i, (&(ws, wp, n), (ghz, truncated, css, bound))) in points.iter().zip(results).enumerate() {
        let mut row = vec![Some(ws), Some(wp), Some(n as f64)];
        if let Some(r) = ghz {
            row.push(cell(r, i, "delta_omega_ghz", &mut table));
        }
        if let Some(r) = truncated {
            row.push(cell(r, i, "delta_omega_ghz_truncated", &mut table));
        }
        row.push(cell(css, i, "delta_omega_csstate", &mut table));
        row.push(cell(bound, i, "qcrb_ghz", &mut table));
        table.rows.push(row);
    }
    record_slopes(
        &mut table,
        &["omega_s", "omega_p"],
        "N",
        &["delta_omega_ghz", "delta_omega_ghz_truncated", "delta_omega_csstate", "qcrb_ghz"],
        |v| v,
    );
    Ok(finish(table, start))
}

pub fn run(spec: &SweepSpec) -> Result<ResultTable> {
    match spec.command {
        Command::PhaseDiagram => phase_diagram(spec),
        Command::FockHistogram => fock_histogram(spec),
        Command::QfiScaling => qfi_scaling(spec),
        Command::ParityScan => parity_scan(spec),
        Command::PrecisionScaling => precision_scaling(spec),
    }
}
