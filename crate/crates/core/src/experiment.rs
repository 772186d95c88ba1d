//! Experiment runner behind the `conifold-lab` CLI.
//!
//! A run evaluates one experiment over a grid of `t` values, collects table
//! rows and named asserts, and writes the rows as CSV or the whole report as
//! JSON. The exit code is 0 when every assert passes, 1 otherwise, and 2 for
//! configuration and I/O errors.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::chart::DomainSpec;
use crate::curvature::{self, StencilSpec};
use crate::error::{Error, Result};
use crate::forms::{self, FormKind, VectorField};
use crate::metricgeom;
use crate::profile::{self, ProfileParams};
use crate::sampling;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// `ρ` range of the points used for finite-difference Ricci audits.
const RICCI_SHELL: (f64, f64) = (-6.0, -0.05);

const OMEGA_DELTA_GRID: [f64; 4] = [0.1, 0.03, 0.01, 0.003];
const OMEGA_DELTA_T_GRID: [f64; 4] = [1e-2, 1e-3, 1e-4, 1e-5];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Estimates,
    DiamScaling,
    GhConverge,
    RicciAudit,
    ProfileTable,
}

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Experiment::Estimates,
        Experiment::DiamScaling,
        Experiment::GhConverge,
        Experiment::RicciAudit,
        Experiment::ProfileTable,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Estimates => "estimates",
            Experiment::DiamScaling => "diam-scaling",
            Experiment::GhConverge => "gh-converge",
            Experiment::RicciAudit => "ricci-audit",
            Experiment::ProfileTable => "profile-table",
        }
    }

    /// Tolerances understood by the experiment, with their defaults.
    pub fn default_tolerances(self) -> BTreeMap<String, f64> {
        let pairs: &[(&str, f64)] = match self {
            Experiment::Estimates => &[
                ("sandwich", 1e-10),
                ("norm_identity", 1e-8),
                (
                    "w_bound",
                    profile::cone_usecond_coefficient() * (1.0 + 1e-9),
                ),
                ("stability", 2.0),
                ("omega_delta_eps", 0.2),
            ],
            Experiment::DiamScaling => &[("exponent", 0.01), ("area_linearity", 1e-8)],
            Experiment::GhConverge => &[("gh_noise", 0.1), ("gh_ratio", 1.0 / 3.0)],
            Experiment::RicciAudit => &[
                ("ricci_matrix", 1e-4),
                ("ricci_control", 1e-2),
                ("ricci_potential", 1e-9),
            ],
            Experiment::ProfileTable => &[("cubic_residual", 1e-9), ("ricci_potential", 1e-9)],
        };
        pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::Config(format!("unknown format `{s}` (csv or json)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub t_grid: Vec<f64>,
    pub n_samples: usize,
    pub graph_k: usize,
    pub seed: u64,
    pub tolerances: BTreeMap<String, f64>,
    pub output_path: PathBuf,
    pub format: Format,
    /// `ρ` values tabulated by `profile-table` and `ricci-audit`.
    pub rho_grid: Vec<f64>,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            t_grid: vec![1.0, 0.1, 0.01],
            n_samples: 500,
            graph_k: metricgeom::DEFAULT_GRAPH_K,
            seed: 42,
            tolerances: experiment.default_tolerances(),
            output_path: PathBuf::from("report.json"),
            format: Format::Json,
            rho_grid: vec![-10.0, -5.0, -2.0, -1.0, 0.0],
        }
    }

    /// Parse a flat `key = value` file. Blank lines and `#` comments are
    /// ignored. `experiment` may be omitted when `default` is given.
    pub fn from_kv_str(text: &str, default: Option<Experiment>) -> Result<Self> {
        let mut pairs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        let experiment = match pairs.iter().find(|(k, _)| k == "experiment") {
            Some((_, v)) => v.parse()?,
            None => default.ok_or_else(|| Error::Config("no experiment given".into()))?,
        };
        let mut cfg = Self::new(experiment);
        for (k, v) in &pairs {
            if k != "experiment" {
                cfg.set(k, v)?;
            }
        }
        Ok(cfg)
    }

    pub fn from_kv_file(path: &Path, default: Option<Experiment>) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_kv_str(&text, default)
    }

    /// Set one key; tolerances are addressed as `tol.<name>`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::Config(format!("{key}: invalid {what} `{value}`"));
        match key {
            "experiment" => {
                let e: Experiment = value.parse()?;
                if e != self.experiment {
                    self.experiment = e;
                    self.tolerances = e.default_tolerances();
                }
            }
            "t_grid" | "t-grid" => self.t_grid = parse_list(value).map_err(|_| bad("list"))?,
            "rho_grid" | "rho-grid" => {
                self.rho_grid = parse_list(value).map_err(|_| bad("list"))?
            }
            "n_samples" | "n" => self.n_samples = value.parse().map_err(|_| bad("integer"))?,
            "graph_k" | "k" => self.graph_k = value.parse().map_err(|_| bad("integer"))?,
            "seed" => self.seed = value.parse().map_err(|_| bad("integer"))?,
            "output_path" | "out" => self.output_path = PathBuf::from(value),
            "format" => self.format = value.parse()?,
            _ => {
                let name = key
                    .strip_prefix("tol.")
                    .ok_or_else(|| Error::Config(format!("unknown key `{key}`")))?;
                if !self.tolerances.contains_key(name) {
                    return Err(Error::Config(format!(
                        "{} has no tolerance `{name}` (known: {})",
                        self.experiment,
                        self.tolerances
                            .keys()
                            .cloned()
                            .collect::<Vec<_>>()
                            .join(", ")
                    )));
                }
                let v: f64 = value.parse().map_err(|_| bad("number"))?;
                self.tolerances.insert(name.to_string(), v);
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_grid.is_empty() {
            return Err(Error::Config("t_grid is empty".into()));
        }
        if let Some(t) = self.t_grid.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
            return Err(Error::Config(format!("t_grid entry {t} is outside (0, 1]")));
        }
        if self.t_grid.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config("t_grid must be strictly decreasing".into()));
        }
        if self.n_samples < 10 {
            return Err(Error::Config(format!(
                "n_samples must be >= 10, got {}",
                self.n_samples
            )));
        }
        if self.graph_k < 4 {
            return Err(Error::Config(format!(
                "graph_k must be >= 4, got {}",
                self.graph_k
            )));
        }
        if self.rho_grid.is_empty() || self.rho_grid.iter().any(|r| !r.is_finite()) {
            return Err(Error::Config(
                "rho_grid must be a nonempty list of finite values".into(),
            ));
        }
        for (k, v) in &self.tolerances {
            if !(v.is_finite() && *v >= 0.0) {
                return Err(Error::Config(format!(
                    "tolerance {k} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    fn tol(&self, name: &str) -> f64 {
        self.tolerances[name]
    }
}

fn parse_list(s: &str) -> std::result::Result<Vec<f64>, std::num::ParseFloatError> {
    s.split(',')
        .filter(|x| !x.trim().is_empty())
        .map(|x| x.trim().parse())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assert {
    pub name: String,
    pub pass: bool,
    pub observed: f64,
    pub bound: f64,
}

impl Assert {
    fn at_most(name: impl Into<String>, observed: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            pass: observed <= bound,
            observed,
            bound,
        }
    }

    fn at_least(name: impl Into<String>, observed: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            pass: observed >= bound,
            observed,
            bound,
        }
    }

    fn above(name: impl Into<String>, observed: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            pass: observed > bound,
            observed,
            bound,
        }
    }

    fn below(name: impl Into<String>, observed: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            pass: observed < bound,
            observed,
            bound,
        }
    }
}

pub type Row = Map<String, Value>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub experiment: Experiment,
    pub config: ExperimentConfig,
    pub rows: Vec<Row>,
    pub asserts: Vec<Assert>,
    pub version: String,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.asserts.iter().all(|a| a.pass)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }

    pub fn assert(&self, name: &str) -> Option<&Assert> {
        self.asserts.iter().find(|a| a.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }

    /// Rows as CSV; the header is the union of row keys in first-seen order.
    pub fn to_csv(&self) -> Result<String> {
        let mut header: Vec<&str> = Vec::new();
        for row in &self.rows {
            for k in row.keys() {
                if !header.contains(&k.as_str()) {
                    header.push(k);
                }
            }
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(&header).map_err(io)?;
        for row in &self.rows {
            let rec: Vec<String> = header.iter().map(|k| csv_cell(row.get(*k))).collect();
            w.write_record(&rec).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} (t_grid = {:?}, n = {}, k = {}, seed = {}): {} rows",
            self.experiment,
            self.config.t_grid,
            self.config.n_samples,
            self.config.graph_k,
            self.config.seed,
            self.rows.len()
        );
        for a in &self.asserts {
            let _ = writeln!(
                s,
                "  [{}] {}: observed {:.6e}, bound {:.6e}",
                if a.pass { "PASS" } else { "FAIL" },
                a.name,
                a.observed,
                a.bound
            );
        }
        let failed = self.asserts.iter().filter(|a| !a.pass).count();
        let _ = write!(
            s,
            "{} of {} asserts passed",
            self.asserts.len() - failed,
            self.asserts.len()
        );
        s
    }

    pub fn write(&self, path: &Path, format: Format) -> Result<()> {
        let text = match format {
            Format::Csv => self.to_csv()?,
            Format::Json => self.to_json()? + "\n",
        };
        std::fs::write(path, text)?;
        Ok(())
    }
}

fn csv_cell(v: Option<&Value>) -> String {
    match v {
        None | Some(Value::Null) => String::new(),
        Some(Value::Number(n)) => match (n.as_u64(), n.as_i64(), n.as_f64()) {
            (Some(u), _, _) => u.to_string(),
            (_, Some(i), _) => i.to_string(),
            (_, _, Some(f)) => format!("{f:.16e}"),
            _ => n.to_string(),
        },
        Some(Value::String(s)) => s.clone(),
        Some(other) => other.to_string(),
    }
}

fn row(pairs: Vec<(&str, Value)>) -> Row {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x)
        .map(Value::Number)
        .unwrap_or(Value::Null)
}

/// Least-squares line through `(ln t, ln v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub amplitude: f64,
    pub r_squared: f64,
}

/// Fit `v = amplitude · t^exponent` in log-log coordinates.
pub fn fit_power_law(pairs: &[(f64, f64)]) -> Result<PowerLawFit> {
    if pairs.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "power-law fit needs at least 3 pairs, got {}",
            pairs.len()
        )));
    }
    if let Some(&(t, v)) = pairs
        .iter()
        .find(|(t, v)| !(*t > 0.0 && *v > 0.0 && t.is_finite() && v.is_finite()))
    {
        return Err(Error::NonPositiveData(format!("({t}, {v})")));
    }
    let n = pairs.len() as f64;
    let xs: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter(
            "power-law fit needs distinct t values".into(),
        ));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - icpt - slope * x).powi(2))
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r_squared = if ss_tot <= f64::EPSILON * n {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(PowerLawFit {
        exponent: slope,
        amplitude: icpt.exp(),
        r_squared,
    })
}

/// Validate and run; the report is not written.
pub fn execute(config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    let (rows, asserts) = match config.experiment {
        Experiment::ProfileTable => profile_table(config)?,
        Experiment::DiamScaling => diam_scaling(config)?,
        Experiment::GhConverge => gh_converge(config)?,
        Experiment::RicciAudit => ricci_audit(config)?,
        Experiment::Estimates => estimates(config)?,
    };
    Ok(Report {
        experiment: config.experiment,
        config: config.clone(),
        rows,
        asserts,
        version: VERSION.to_string(),
    })
}

/// Run, write the report to `config.output_path` and return it with the
/// exit code.
pub fn run(config: &ExperimentConfig) -> (Option<Report>, i32) {
    match execute(config).and_then(|r| r.write(&config.output_path, config.format).map(|_| r)) {
        Ok(r) => {
            let code = r.exit_code();
            (Some(r), code)
        }
        Err(e) => {
            log::error!("{e}");
            (None, exit_code_for(&e))
        }
    }
}

/// Exit code of a failed run: configuration and I/O problems give 2, any
/// other error means an invariant could not be evaluated and gives 1.
pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Io(_) | Error::InvalidParameter(_) => 2,
        _ => 1,
    }
}

type Output = (Vec<Row>, Vec<Assert>);

fn profile_table(cfg: &ExperimentConfig) -> Result<Output> {
    let mut rows = Vec::new();
    let mut worst_cubic = 0.0f64;
    let mut worst_pot = 0.0f64;
    for &t in &cfg.t_grid {
        let params = ProfileParams::new(t)?;
        for &rho in &cfg.rho_grid {
            let ev = profile::eval_profile(params, rho)?;
            let cubic = ev.cubic_residual(t);
            let pot = curvature::ricci_potential_residual(t, &[rho]);
            worst_cubic = worst_cubic.max(cubic / (3.0 * (2.0 * ev.rho).exp()).max(1.0));
            worst_pot = worst_pot.max(if pot.is_nan() { f64::INFINITY } else { pot });
            rows.push(row(vec![
                ("t", num(t)),
                ("rho", num(rho)),
                ("uprime", num(ev.uprime)),
                ("usecond", num(ev.usecond)),
                ("cubic_residual", num(cubic)),
                ("ricci_potential_residual", num(pot)),
            ]));
        }
    }
    let asserts = vec![
        Assert::at_most(
            "cubic_residual_relative",
            worst_cubic,
            cfg.tol("cubic_residual"),
        ),
        Assert::at_most(
            "ricci_potential_residual",
            worst_pot,
            cfg.tol("ricci_potential"),
        ),
    ];
    Ok((rows, asserts))
}

fn diam_scaling(cfg: &ExperimentConfig) -> Result<Output> {
    let d1 = metricgeom::zero_section_diameter(1.0)?;
    let a1 = metricgeom::zero_section_area(1.0)?;
    let mut rows = Vec::new();
    let mut pairs = Vec::new();
    let mut cbrt_const = 0.0f64;
    let mut area_dev = 0.0f64;
    for &t in &cfg.t_grid {
        let d = metricgeom::zero_section_diameter(t)?;
        let a = metricgeom::zero_section_area(t)?;
        pairs.push((t, d));
        cbrt_const = cbrt_const.max(d / t.cbrt());
        area_dev = area_dev.max((a / t - a1).abs());
        rows.push(row(vec![
            ("t", num(t)),
            ("diameter", num(d)),
            ("diameter_over_sqrt_t", num(d / t.sqrt())),
            ("diameter_over_cbrt_t", num(d / t.cbrt())),
            ("area", num(a)),
            ("area_over_t", num(a / t)),
        ]));
    }
    let mut asserts = Vec::new();
    if pairs.len() >= 3 {
        let fit = fit_power_law(&pairs)?;
        asserts.push(Assert::at_most(
            "diameter_exponent_error",
            (fit.exponent - 0.5).abs(),
            cfg.tol("exponent"),
        ));
        asserts.push(Assert::at_least(
            "diameter_fit_r_squared",
            fit.r_squared,
            1.0 - cfg.tol("exponent"),
        ));
        log::info!(
            "diameter fit: exponent {} amplitude {}",
            fit.exponent,
            fit.amplitude
        );
    }
    // diam·t^{-1/3} ≤ diam at t = 1, the constant of the t^{1/3} bound.
    asserts.push(Assert::at_most(
        "cbrt_bound_constant",
        cbrt_const,
        d1 * (1.0 + 1e-12),
    ));
    asserts.push(Assert::at_most(
        "area_over_t_deviation",
        area_dev,
        cfg.tol("area_linearity"),
    ));
    Ok((rows, asserts))
}

fn gh_converge(cfg: &ExperimentConfig) -> Result<Output> {
    let cone = metricgeom::build_cloud(
        DomainSpec::Omega,
        FormKind::ConeMetric,
        cfg.n_samples,
        cfg.graph_k,
        cfg.seed,
    )?;
    let mut rows = Vec::new();
    let mut bounds = Vec::new();
    for &t in &cfg.t_grid {
        let est = metricgeom::gh_against(t, &cone)?;
        bounds.push(est.bound);
        rows.push(row(vec![
            ("t", num(t)),
            ("seed", json!(cfg.seed)),
            ("n", json!(cfg.n_samples)),
            ("graph_k", json!(cfg.graph_k)),
            ("gh_bound", num(est.bound)),
            (
                "zero_section_diameter",
                num(metricgeom::zero_section_diameter(t)?),
            ),
        ]));
    }
    let noise = cfg.tol("gh_noise");
    // Largest b(t_{i+1}) / b(t_i) along the decreasing grid.
    let worst_step = bounds.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
    let mut asserts = vec![Assert::at_least(
        "gh_bound_nonnegative",
        bounds.iter().copied().fold(f64::INFINITY, f64::min),
        0.0,
    )];
    if bounds.len() >= 2 {
        asserts.push(Assert::at_most(
            "gh_bound_step_ratio",
            worst_step,
            1.0 + noise,
        ));
    }
    let (t_hi, t_lo) = (cfg.t_grid[0], *cfg.t_grid.last().unwrap());
    if t_hi / t_lo >= 100.0 * (1.0 - 1e-12) {
        let ratio = bounds.last().unwrap() / bounds[0];
        asserts.push(Assert::below(
            "gh_collapse_ratio",
            ratio,
            cfg.tol("gh_ratio"),
        ));
    }
    Ok((rows, asserts))
}

fn ricci_audit(cfg: &ExperimentConfig) -> Result<Output> {
    let pts = sampling::sample_shell(RICCI_SHELL.0, RICCI_SHELL.1, cfg.n_samples, cfg.seed);
    let stencil = StencilSpec::default();
    let max_over = |kind: FormKind| -> Result<f64> {
        let vals: Vec<Result<f64>> = pts
            .par_iter()
            .map(|p| curvature::ricci_form(kind, p, &stencil).map(|r| curvature::max_entry(&r)))
            .collect();
        let mut worst = 0.0f64;
        for v in vals {
            worst = worst.max(v?);
        }
        Ok(worst)
    };
    let mut rows = Vec::new();
    let mut worst_ricci = 0.0f64;
    let mut worst_pot = 0.0f64;
    for &t in &cfg.t_grid {
        let r = max_over(FormKind::calabi(t)?)?;
        let pot = curvature::ricci_potential_residual(t, &cfg.rho_grid);
        let pot = if pot.is_nan() { f64::INFINITY } else { pot };
        worst_ricci = worst_ricci.max(r);
        worst_pot = worst_pot.max(pot);
        rows.push(row(vec![
            ("kind", json!("calabi")),
            ("t", num(t)),
            ("points", json!(pts.len())),
            ("max_ricci_entry", num(r)),
            ("max_potential_residual", num(pot)),
        ]));
    }
    let control = max_over(FormKind::OmegaHat)?;
    rows.push(row(vec![
        ("kind", json!("omega-hat")),
        ("t", Value::Null),
        ("points", json!(pts.len())),
        ("max_ricci_entry", num(control)),
        ("max_potential_residual", Value::Null),
    ]));
    let asserts = vec![
        Assert::at_most(
            "ricci_matrix_max_entry",
            worst_ricci,
            cfg.tol("ricci_matrix"),
        ),
        Assert::above("ricci_control_max_entry", control, cfg.tol("ricci_control")),
        Assert::at_most(
            "ricci_potential_residual",
            worst_pot,
            cfg.tol("ricci_potential"),
        ),
    ];
    Ok((rows, asserts))
}

/// Per-point quantities of the `estimates` experiment at one `t`.
#[derive(Debug, Clone, Copy)]
struct PointEstimates {
    v_hat_err: f64,
    v_calabi_err: f64,
    w_scaled: f64,
    lambda_min: f64,
    lambda_max_scaled: f64,
    fibre_trace: f64,
}

fn point_estimates(t: f64, p: &crate::chart::ResolvedPoint) -> Result<PointEstimates> {
    let kind = FormKind::CalabiFamily(t);
    let er = p.exp_rho();
    let rho = er.ln();
    let ev = profile::eval_profile(ProfileParams::new(t)?, rho)?;
    let v_hat = forms::vector_norm_sq(FormKind::OmegaHat, VectorField::V, p)?;
    let v_cal = forms::vector_norm_sq(kind, VectorField::V, p)?;
    let w = forms::vector_norm_sq(kind, VectorField::W, p)?;
    // The generalized eigenvalues do not depend on the chart.
    let q = p.in_unit_chart();
    let (lo, hi) = forms::compare_forms(&kind.eval(&q)?, &FormKind::ConifoldFlat.eval(&q)?)?;
    Ok(PointEstimates {
        v_hat_err: (v_hat - er).abs() / er,
        v_calabi_err: (v_cal - ev.usecond).abs() / ev.usecond,
        w_scaled: (rho / 2.0).exp() * w,
        lambda_min: lo,
        lambda_max_scaled: hi * er,
        fibre_trace: forms::fibrewise_trace_h(kind, p)?,
    })
}

fn estimates(cfg: &ExperimentConfig) -> Result<Output> {
    let sample = sampling::sample_domain(&DomainSpec::Omega, cfg.n_samples, cfg.seed);
    let bulk = &sample.points[sample.anchors..];

    // t-independent fibre sandwich of the reference form.
    let margins: Vec<Result<(f64, f64)>> =
        bulk.par_iter().map(forms::fibre_sandwich_margins).collect();
    let (mut lower, mut upper) = (f64::INFINITY, f64::INFINITY);
    for m in margins {
        match m {
            Ok((a, b)) => {
                lower = lower.min(a);
                upper = upper.min(b);
            }
            Err(Error::InfiniteFibre) => {}
            Err(e) => return Err(e),
        }
    }

    let mut rows = Vec::new();
    let mut asserts = vec![
        Assert::at_least("fibre_sandwich_lower", lower, -cfg.tol("sandwich")),
        Assert::at_least("fibre_sandwich_upper", upper, -cfg.tol("sandwich")),
    ];
    let mut c0s = Vec::new();
    let mut c1s = Vec::new();
    let (mut v_hat, mut v_cal, mut w_const) = (0.0f64, 0.0f64, 0.0f64);
    let rho_samples: Vec<f64> = bulk.iter().map(|p| p.exp_rho().ln()).collect();
    let mut kahler_ok = true;
    for &t in &cfg.t_grid {
        let per: Vec<Result<PointEstimates>> =
            bulk.par_iter().map(|p| point_estimates(t, p)).collect();
        let mut agg = PointEstimates {
            v_hat_err: 0.0,
            v_calabi_err: 0.0,
            w_scaled: 0.0,
            lambda_min: f64::INFINITY,
            lambda_max_scaled: 0.0,
            fibre_trace: 0.0,
        };
        for e in per {
            let e = e?;
            agg.v_hat_err = agg.v_hat_err.max(e.v_hat_err);
            agg.v_calabi_err = agg.v_calabi_err.max(e.v_calabi_err);
            agg.w_scaled = agg.w_scaled.max(e.w_scaled);
            agg.lambda_min = agg.lambda_min.min(e.lambda_min);
            agg.lambda_max_scaled = agg.lambda_max_scaled.max(e.lambda_max_scaled);
            agg.fibre_trace = agg.fibre_trace.max(e.fibre_trace);
        }
        let kr = profile::kahler_criterion(ProfileParams::new(t)?, &rho_samples)?;
        kahler_ok &= kr.passes();
        v_hat = v_hat.max(agg.v_hat_err);
        v_cal = v_cal.max(agg.v_calabi_err);
        w_const = w_const.max(agg.w_scaled);
        c0s.push(agg.lambda_min);
        c1s.push(agg.lambda_max_scaled);
        rows.push(row(vec![
            ("section", json!("pointwise")),
            ("t", num(t)),
            ("points", json!(bulk.len())),
            ("fibre_sandwich_lower", num(lower)),
            ("fibre_sandwich_upper", num(upper)),
            ("v_norm_omega_hat_rel_err", num(agg.v_hat_err)),
            ("v_norm_calabi_rel_err", num(agg.v_calabi_err)),
            ("w_collapse_constant", num(agg.w_scaled)),
            ("lambda_min", num(agg.lambda_min)),
            ("lambda_max_times_exp_rho", num(agg.lambda_max_scaled)),
            ("max_fibre_trace", num(agg.fibre_trace)),
            ("kahler_criterion", json!(kr.passes())),
        ]));
    }
    let spread = |v: &[f64]| {
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        hi / lo
    };
    asserts.push(Assert::at_most(
        "v_norm_omega_hat_rel_err",
        v_hat,
        cfg.tol("norm_identity"),
    ));
    asserts.push(Assert::at_most(
        "v_norm_calabi_rel_err",
        v_cal,
        cfg.tol("norm_identity"),
    ));
    asserts.push(Assert::at_most(
        "w_collapse_constant",
        w_const,
        cfg.tol("w_bound"),
    ));
    asserts.push(Assert::above(
        "tangential_lambda_min",
        c0s.iter().copied().fold(f64::INFINITY, f64::min),
        0.0,
    ));
    asserts.push(Assert::at_most(
        "tangential_lambda_min_spread",
        spread(&c0s),
        cfg.tol("stability"),
    ));
    asserts.push(Assert::at_most(
        "tangential_lambda_max_spread",
        spread(&c1s),
        cfg.tol("stability"),
    ));
    asserts.push(Assert::at_least(
        "kahler_criterion",
        if kahler_ok { 1.0 } else { 0.0 },
        1.0,
    ));

    // Diameter of Ω itself stays bounded along the grid.
    let mut diams = Vec::new();
    for &t in &cfg.t_grid {
        let c = metricgeom::build_cloud(
            DomainSpec::Omega,
            FormKind::calabi(t)?,
            cfg.n_samples,
            cfg.graph_k,
            cfg.seed,
        )?;
        let d = metricgeom::cloud_diameter(&c);
        diams.push(d);
        rows.push(row(vec![
            ("section", json!("omega-diameter")),
            ("t", num(t)),
            ("points", json!(cfg.n_samples)),
            ("cloud_diameter", num(d)),
        ]));
    }
    asserts.push(Assert::at_most(
        "omega_diameter_spread",
        spread(&diams),
        cfg.tol("stability"),
    ));

    // Search (δ, t) with diam(Ω_δ, ω_E(t)) below ε.
    let eps = cfg.tol("omega_delta_eps");
    let mut best = f64::INFINITY;
    'search: for &delta in &OMEGA_DELTA_GRID {
        for &t in &OMEGA_DELTA_T_GRID {
            let c = metricgeom::build_cloud(
                DomainSpec::omega_r(delta)?,
                FormKind::calabi(t)?,
                cfg.n_samples,
                cfg.graph_k,
                cfg.seed,
            )?;
            let d = metricgeom::cloud_diameter(&c);
            best = best.min(d);
            rows.push(row(vec![
                ("section", json!("omega-delta")),
                ("t", num(t)),
                ("points", json!(cfg.n_samples)),
                ("cloud_diameter", num(d)),
                ("delta", num(delta)),
            ]));
            if d < eps {
                break 'search;
            }
        }
    }
    asserts.push(Assert::below("omega_delta_diameter", best, eps));
    Ok((rows, asserts))
}
