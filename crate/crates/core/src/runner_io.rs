//! Experiment plumbing: configuration files, CSV and SVG output, binary
//! checkpoints and the parameter-sweep drivers behind the command line.
//!
//! A configuration is line-oriented text of the form `section.key = value`
//! with `#` comments. Every key has a documented default (see
//! [`KNOWN_KEYS`]); validators run at load time so that a bad file fails
//! before any compute starts.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::augmented_solver::{
    self as solver, SolverError, SolverParams, SolverState, StateSummary, Trajectory,
};
use crate::constitutive::{
    validate_drag_hypotheses, validate_exponents, validate_viscosity_growth, ConstitutiveSet,
    DensityRange, PressureLaw, ValidityReport, ViscosityLaw,
};
use crate::entropy_diag::EntropyReport;
use crate::linear_hypo::{self as linear, LinearError, LinearModel};
use crate::torus_fields::{GridSpec, PeriodicField, Rank};

/// Environment variable overriding the worker thread count.
pub const THREADS_ENV: &str = "KNSL_THREADS";

/// Exact CSV header of a report file.
pub const CSV_COLUMNS: [&str; 14] = [
    "t",
    "entropy",
    "kinetic_mixture",
    "internal",
    "diss_D",
    "diss_A",
    "diss_div",
    "diss_pressure",
    "diss_eps",
    "diss_drag",
    "residual",
    "mass",
    "min_rho",
    "drift_v",
];

/// Every accepted configuration key with its default, in file order.
pub const KNOWN_KEYS: [(&str, &str); 43] = [
    ("experiment.kind", "nonlinear"),
    ("grid.dim", "1"),
    ("grid.n", "64"),
    ("grid.length", "2*pi"),
    ("viscosity.law", "linear"),
    ("viscosity.m", "1"),
    ("viscosity.n", "1"),
    ("viscosity.coeff", "1"),
    ("viscosity.c0", "1"),
    ("viscosity.c1", "1"),
    ("viscosity.rho_star", "1"),
    ("pressure.law", "gamma"),
    ("pressure.a", "1"),
    ("pressure.gamma", "2"),
    ("pressure.c1", "1"),
    ("pressure.gamma_minus", "2"),
    ("pressure.gamma_plus", "2"),
    ("pressure.rho_star", "1"),
    ("drag.r1", "0"),
    ("drag.nu", "0.5"),
    ("drag.eta", "0.75"),
    ("solver.kappa", "0.5"),
    ("solver.eps", "0"),
    ("solver.s", "2"),
    ("solver.delta", "0"),
    ("solver.dt", "1e-3"),
    ("solver.t_end", "1"),
    ("solver.dealias", "true"),
    ("solver.cfl_safety", "0.5"),
    ("solver.density_floor", "1e-8"),
    ("initial.profile", "density_bump"),
    ("initial.a", "0.1"),
    ("initial.b", "0.1"),
    ("linear.mu", "1"),
    ("linear.conductivity", "1"),
    ("linear.k", "1,0,...,0"),
    ("linear.z0", "1,...,1"),
    ("linear.kmax", "8"),
    ("sweep.kappas", "0.2,0.35,0.5,0.65,0.8"),
    ("sweep.deltas", "0.1,0.05,0.025"),
    ("output.dir", "out"),
    ("output.report_interval", "0.05"),
    ("output.svg_columns", "entropy,kinetic_mixture,internal"),
];

const LOG_SCALE_KEY: &str = "output.log_scale";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Nonlinear,
    LinearBaro,
    LinearHeat,
    KappaSweep,
    DeltaSweep,
    Drag,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Nonlinear => "nonlinear",
            Self::LinearBaro => "linear-baro",
            Self::LinearHeat => "linear-heat",
            Self::KappaSweep => "kappa-sweep",
            Self::DeltaSweep => "delta-sweep",
            Self::Drag => "drag",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [
            Self::Nonlinear,
            Self::LinearBaro,
            Self::LinearHeat,
            Self::KappaSweep,
            Self::DeltaSweep,
            Self::Drag,
        ]
        .into_iter()
        .find(|k| k.name() == s)
    }

    pub fn is_linear(self) -> bool {
        matches!(self, Self::LinearBaro | Self::LinearHeat)
    }
}

/// Named analytic initial data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    /// `ρ0 = 1 + a cos x₁`, `u0 = b sin(x₁) x̂₁`.
    DensityBump { a: f64, b: f64 },
    /// `ρ0 = 1 + a cos x₁`, `u0 = b sin(x₁) x̂₂`; needs `d ≥ 2`.
    Shear { a: f64, b: f64 },
}

impl Profile {
    pub fn density(&self, grid: GridSpec) -> PeriodicField {
        let (Self::DensityBump { a, .. } | Self::Shear { a, .. }) = *self;
        PeriodicField::scalar_from_fn(grid, move |x| 1.0 + a * x[0].cos())
    }

    pub fn velocity(&self, grid: GridSpec) -> PeriodicField {
        let (axis, b) = match *self {
            Self::DensityBump { b, .. } => (0, b),
            Self::Shear { b, .. } => (1, b),
        };
        PeriodicField::vector_from_fn(grid, move |x, c| if c == axis { b * x[0].sin() } else { 0.0 })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSetup {
    pub model: LinearModel,
    pub k: Vec<f64>,
    pub z0: Vec<f64>,
    pub kmax: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub dir: PathBuf,
    /// Time between report rows.
    pub report_interval: f64,
    pub svg_columns: Vec<String>,
    pub log_scale: bool,
}

/// Fully validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub kind: ExperimentKind,
    pub grid: GridSpec,
    pub constitutive: ConstitutiveSet,
    pub params: SolverParams,
    pub initial: Profile,
    /// Present for the linear kinds.
    pub linear: Option<LinearSetup>,
    pub kappas: Vec<f64>,
    pub deltas: Vec<f64>,
    /// `(ν, η)` of the drag hypotheses.
    pub drag_bounds: (f64, f64),
    pub output: OutputSpec,
}

impl RunConfig {
    /// Steps between report rows.
    pub fn report_every(&self) -> usize {
        ((self.output.report_interval / self.params.dt).round() as usize).max(1)
    }

    pub fn initial_state(&self) -> Result<SolverState, SolverError> {
        solver::initial_state(
            &self.initial.density(self.grid),
            &self.initial.velocity(self.grid),
            self.params.kappa,
            &self.constitutive,
        )
    }
}

/// One problem found while loading a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigIssue {
    /// 1-based line, absent for defaults and whole-file checks.
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub struct ConfigErrors(pub Vec<ConfigIssue>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lines: Vec<String> = self.0.iter().map(ToString::to_string).collect();
        write!(f, "{}", lines.join("\n"))
    }
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("bad checkpoint magic {found:?}")]
    Magic { found: [u8; 4] },
    #[error("unsupported version {found} (this build reads version {CHECKPOINT_VERSION})")]
    UnsupportedVersion { found: u32 },
    #[error("truncated checkpoint: expected {expected} bytes, got {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("checkpoint grid is {found_dim}-d with N = {found_n:?}, target grid is {target_dim}-d with N = {target_n}")]
    DimensionMismatch {
        found_dim: usize,
        found_n: Vec<usize>,
        target_dim: usize,
        target_n: usize,
    },
    #[error(transparent)]
    State(#[from] SolverError),
}

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("invalid configuration:\n{0}")]
    Config(#[from] ConfigErrors),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Linear(#[from] LinearError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot emit an empty trajectory")]
    EmptyTrajectory,
    #[error("unknown report column `{0}`")]
    UnknownColumn(String),
}

impl RunnerError {
    /// 1 for anything caught before or outside the numerics, 2 for a
    /// numerical abort.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Solver(
                SolverError::DensityFloor { .. }
                | SolverError::NonFinite { .. }
                | SolverError::Cfl { .. },
            )
            | Self::Linear(LinearError::EigenFailure { .. }) => 2,
            _ => 1,
        }
    }
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> RunnerError + '_ {
    move |source| RunnerError::Io {
        path: path.to_path_buf(),
        source,
    }
}

// ---------------------------------------------------------------------------
// configuration

struct Entries {
    values: BTreeMap<String, (String, usize)>,
    issues: Vec<ConfigIssue>,
}

impl Entries {
    fn scan(text: &str) -> Self {
        let mut values = BTreeMap::new();
        let mut issues = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                issues.push(issue(line, format!("expected `section.key = value`, found `{content}`")));
                continue;
            };
            let key = key.trim();
            let value = value.trim().trim_matches('"').to_string();
            if key != LOG_SCALE_KEY && !KNOWN_KEYS.iter().any(|(k, _)| *k == key) {
                issues.push(issue(line, format!("unknown key `{key}`")));
            } else if let Some((_, first)) = values.get(key) {
                issues.push(issue(line, format!("duplicate key `{key}` (first set on line {first})")));
            } else {
                values.insert(key.to_string(), (value, line));
            }
        }
        Self { values, issues }
    }

    fn line(&self, key: &str) -> Option<usize> {
        self.values.get(key).map(|(_, l)| *l)
    }

    fn raw(&self, key: &str) -> Option<(&str, usize)> {
        self.values.get(key).map(|(v, l)| (v.as_str(), *l))
    }

    fn mismatch(&mut self, key: &str, line: usize, what: &str, found: &str) {
        self.issues.push(issue(line, format!("`{key}` expects {what}, found `{found}`")));
    }

    fn num(&mut self, key: &str, default: f64) -> f64 {
        let Some((v, line)) = self.raw(key).map(|(v, l)| (v.to_string(), l)) else {
            return default;
        };
        match parse_number(&v) {
            Some(x) => x,
            None => {
                self.mismatch(key, line, "a finite number", &v);
                default
            }
        }
    }

    fn count(&mut self, key: &str, default: usize) -> usize {
        let Some((v, line)) = self.raw(key).map(|(v, l)| (v.to_string(), l)) else {
            return default;
        };
        v.parse().unwrap_or_else(|_| {
            self.mismatch(key, line, "a nonnegative integer", &v);
            default
        })
    }

    fn flag(&mut self, key: &str, default: bool) -> bool {
        let Some((v, line)) = self.raw(key).map(|(v, l)| (v.to_string(), l)) else {
            return default;
        };
        v.parse().unwrap_or_else(|_| {
            self.mismatch(key, line, "`true` or `false`", &v);
            default
        })
    }

    fn list(&mut self, key: &str) -> Option<Vec<f64>> {
        let (v, line) = self.raw(key).map(|(v, l)| (v.to_string(), l))?;
        let parsed: Option<Vec<f64>> = v.split(',').map(|p| parse_number(p.trim())).collect();
        if parsed.is_none() {
            self.mismatch(key, line, "a comma-separated list of numbers", &v);
        }
        parsed
    }

    fn text(&self, key: &str, default: &str) -> String {
        self.raw(key).map_or(default, |(v, _)| v).to_string()
    }

    fn fail(&mut self, key: &str, message: impl Into<String>) {
        self.issues.push(ConfigIssue {
            line: self.line(key),
            message: message.into(),
        });
    }
}

fn issue(line: usize, message: String) -> ConfigIssue {
    ConfigIssue {
        line: Some(line),
        message,
    }
}

/// Numbers may also be written as `pi`, `2*pi` or `pi/2`.
fn parse_number(s: &str) -> Option<f64> {
    let pi = std::f64::consts::PI;
    let value = match s {
        "pi" => pi,
        _ if s.ends_with("*pi") => s.trim_end_matches("*pi").trim().parse::<f64>().ok()? * pi,
        _ if s.starts_with("pi/") => pi / s.trim_start_matches("pi/").trim().parse::<f64>().ok()?,
        _ => s.parse().ok()?,
    };
    value.is_finite().then_some(value)
}

fn report_failures(entries: &mut Entries, key: &str, report: &ValidityReport) {
    for c in report.failures() {
        entries.fail(
            key,
            format!("validator `{}` failed (value {}, threshold {})", c.name, c.value, c.threshold),
        );
    }
}

/// Parse and validate a configuration, collecting every problem found.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigErrors> {
    let mut e = Entries::scan(text);

    let kind_text = e.text("experiment.kind", "nonlinear");
    let kind = ExperimentKind::parse(&kind_text).unwrap_or_else(|| {
        e.fail("experiment.kind", format!("unknown experiment kind `{kind_text}`"));
        ExperimentKind::Nonlinear
    });

    let dim = e.count("grid.dim", 1);
    let n = e.count("grid.n", 64);
    let length = e.num("grid.length", TAU);

    let visc_law = e.text("viscosity.law", "linear");
    let vm = e.num("viscosity.m", 1.0);
    let vn = e.num("viscosity.n", 1.0);
    let coeff = e.num("viscosity.coeff", 1.0);
    let c0 = e.num("viscosity.c0", 1.0);
    let c1 = e.num("viscosity.c1", 1.0);
    let v_star = e.num("viscosity.rho_star", 1.0);

    let p_law = e.text("pressure.law", "gamma");
    let pa = e.num("pressure.a", 1.0);
    let gamma = e.num("pressure.gamma", 2.0);
    let pc1 = e.num("pressure.c1", 1.0);
    let gm = e.num("pressure.gamma_minus", 2.0);
    let gp = e.num("pressure.gamma_plus", 2.0);
    let p_star = e.num("pressure.rho_star", 1.0);

    let r1 = e.num("drag.r1", 0.0);
    let nu = e.num("drag.nu", 0.5);
    let eta = e.num("drag.eta", 0.75);

    let kappa = e.num("solver.kappa", 0.5);
    let eps = e.num("solver.eps", 0.0);
    let s = e.count("solver.s", 2);
    let delta = e.num("solver.delta", 0.0);
    let dt = e.num("solver.dt", 1e-3);
    let t_end = e.num("solver.t_end", 1.0);
    let dealias = e.flag("solver.dealias", true);
    let cfl_safety = e.num("solver.cfl_safety", 0.5);
    let density_floor = e.num("solver.density_floor", 1e-8);

    let profile_name = e.text("initial.profile", "density_bump");
    let a = e.num("initial.a", 0.1);
    let b = e.num("initial.b", 0.1);

    let mu_lin = e.num("linear.mu", 1.0);
    let cond = e.num("linear.conductivity", 1.0);
    let k_list = e.list("linear.k");
    let z0_list = e.list("linear.z0");
    let kmax = e.num("linear.kmax", 8.0);

    let kappas = e.list("sweep.kappas").unwrap_or_else(|| vec![0.2, 0.35, 0.5, 0.65, 0.8]);
    let deltas = e.list("sweep.deltas").unwrap_or_else(|| vec![0.1, 0.05, 0.025]);

    let dir = PathBuf::from(e.text("output.dir", "out"));
    let report_interval = e.num("output.report_interval", 0.05);
    let svg_columns: Vec<String> = e
        .text("output.svg_columns", "entropy,kinetic_mixture,internal")
        .split(',')
        .map(|c| c.trim().to_string())
        .collect();
    let log_scale = e.flag(LOG_SCALE_KEY, false);

    // syntax and type problems first, so validators do not cascade
    if !e.issues.is_empty() {
        return Err(ConfigErrors(e.issues));
    }

    let grid = match GridSpec::with_lengths(dim, n, &vec![length; dim.max(1)]) {
        Ok(g) => g,
        Err(err) => {
            e.fail("grid.n", format!("invalid grid: {err}"));
            GridSpec::new(1, 8).expect("fallback grid")
        }
    };

    let viscosity = match visc_law.as_str() {
        "linear" => Ok(ViscosityLaw::Linear),
        "single_power" => ViscosityLaw::single_power(vm, coeff),
        "power_law_pair" => ViscosityLaw::power_law_pair(vn, vm, c0, c1, v_star),
        other => {
            e.fail("viscosity.law", format!("unknown viscosity law `{other}`"));
            Ok(ViscosityLaw::Linear)
        }
    }
    .unwrap_or_else(|err| {
        e.fail("viscosity.law", err.to_string());
        ViscosityLaw::Linear
    });
    let pressure = match p_law.as_str() {
        "gamma" => PressureLaw::gamma_law(pa, gamma),
        "singular_cold" => PressureLaw::singular_cold(pc1, gm, gp, p_star),
        other => {
            e.fail("pressure.law", format!("unknown pressure law `{other}`"));
            PressureLaw::gamma_law(1.0, 2.0)
        }
    }
    .unwrap_or_else(|err| {
        e.fail("pressure.law", err.to_string());
        PressureLaw::GammaLaw { a: 1.0, gamma: 2.0 }
    });
    let constitutive = ConstitutiveSet::new(viscosity, pressure)
        .with_drag(r1)
        .unwrap_or_else(|err| {
            e.fail("drag.r1", err.to_string());
            ConstitutiveSet::new(viscosity, pressure)
        });

    let range = DensityRange::default();
    let inv = constitutive.check_invariants(range, 256);
    if !(inv.min_mu_prime > 0.0 && inv.pressure_monotone) {
        e.fail("viscosity.law", "constitutive laws violate mu' > 0 or p' >= 0 on the density window");
    }
    if let ViscosityLaw::PowerLawPair { .. } = viscosity {
        report_failures(
            &mut e,
            "viscosity.law",
            &validate_viscosity_growth(&constitutive, vn, vm, c0, c1, v_star, range),
        );
        if let PressureLaw::SingularCold { .. } = pressure {
            report_failures(&mut e, "pressure.law", &validate_exponents(vn, vm, gm, gp));
        }
    }

    let params = SolverParams {
        kappa,
        eps,
        s: s as u32,
        delta,
        dt,
        t_end,
        dealias,
        cfl_safety,
        density_floor,
    };
    // linear kinds check κ against their own, stricter constraints
    if !kind.is_linear() {
        if let Err(err) = params.validate() {
            let key = match &err {
                SolverError::InvalidParameter { name, .. } => format!("solver.{name}"),
                _ => "solver.kappa".into(),
            };
            e.fail(&key, err.to_string());
        }
    }

    let initial = match profile_name.as_str() {
        "density_bump" => Profile::DensityBump { a, b },
        "shear" => Profile::Shear { a, b },
        other => {
            e.fail("initial.profile", format!("unknown profile `{other}`"));
            Profile::DensityBump { a, b }
        }
    };
    if a.abs() >= 1.0 {
        e.fail("initial.a", "density amplitude must satisfy |a| < 1 to avoid vacuum");
    }
    if matches!(initial, Profile::Shear { .. }) && dim < 2 {
        e.fail("initial.profile", "the shear profile needs grid.dim >= 2");
    }

    match kind {
        ExperimentKind::KappaSweep => {
            for &k in &kappas {
                if !(k > 0.0 && k < 1.0) {
                    e.fail("sweep.kappas", format!("κ must lie in (0,1), found {k}"));
                }
            }
        }
        ExperimentKind::DeltaSweep => {
            if deltas.iter().any(|&d| !(d >= 0.0)) {
                e.fail("sweep.deltas", "mollifier widths must be nonnegative");
            }
        }
        ExperimentKind::Drag => {
            if !(r1 > 0.0) {
                e.fail("drag.r1", "the drag experiment needs drag.r1 > 0");
            }
            let gamma_exp = match pressure {
                PressureLaw::GammaLaw { gamma, .. } => gamma,
                PressureLaw::SingularCold { gamma_plus, .. } => gamma_plus,
            };
            report_failures(
                &mut e,
                "drag.nu",
                &validate_drag_hypotheses(&constitutive, nu, eta, gamma_exp, range),
            );
        }
        _ => {}
    }

    let linear = if kind.is_linear() {
        let model = if kind == ExperimentKind::LinearHeat {
            LinearModel::heat(dim, mu_lin, kappa, cond)
        } else {
            LinearModel::barotropic(dim, mu_lin, kappa)
        };
        match model {
            Ok(model) => {
                for c in linear::kappa_admissible(&model).constraints.iter().filter(|c| !c.passed) {
                    e.fail(
                        "solver.kappa",
                        format!("constraint `{}` fails: value {} not in ({}, {})", c.name, c.value, c.lower, c.upper),
                    );
                }
                let k = k_list.unwrap_or_else(|| {
                    let mut k = vec![0.0; dim];
                    k[0] = 1.0;
                    k
                });
                if k.len() != dim {
                    e.fail("linear.k", format!("wavevector needs {dim} components"));
                }
                let z0 = z0_list.unwrap_or_else(|| vec![1.0; model.size()]);
                if z0.len() != model.size() {
                    e.fail("linear.z0", format!("mode state needs {} entries", model.size()));
                }
                if !(kmax > 0.0) {
                    e.fail("linear.kmax", "must be positive");
                }
                if !(dt > 0.0 && t_end >= 0.0) {
                    e.fail("solver.dt", "need dt > 0 and t_end >= 0");
                }
                Some(LinearSetup { model, k, z0, kmax })
            }
            Err(err) => {
                e.fail("linear.mu", err.to_string());
                None
            }
        }
    } else {
        None
    };

    if !(report_interval > 0.0) {
        e.fail("output.report_interval", "must be positive");
    }
    for c in &svg_columns {
        if !CSV_COLUMNS.contains(&c.as_str()) {
            e.fail("output.svg_columns", format!("unknown report column `{c}`"));
        }
    }

    if !e.issues.is_empty() {
        return Err(ConfigErrors(e.issues));
    }
    Ok(RunConfig {
        kind,
        grid,
        constitutive,
        params,
        initial,
        linear,
        kappas,
        deltas,
        drag_bounds: (nu, eta),
        output: OutputSpec {
            dir,
            report_interval,
            svg_columns,
            log_scale,
        },
    })
}

pub fn load_config(path: &Path) -> Result<RunConfig, RunnerError> {
    let text = fs::read_to_string(path).map_err(io_error(path))?;
    Ok(parse_config(&text)?)
}

// ---------------------------------------------------------------------------
// reports

pub type ReportRow = (StateSummary, EntropyReport);

/// Value of a documented column in one row.
pub fn column_value(row: &ReportRow, name: &str) -> Option<f64> {
    let (s, r) = row;
    Some(match name {
        "t" => s.t,
        "entropy" => r.entropy,
        "kinetic_mixture" => r.kinetic_mixture,
        "internal" => r.internal,
        "diss_D" => r.diss_d,
        "diss_A" => r.diss_a,
        "diss_div" => r.diss_div,
        "diss_pressure" => r.diss_pressure,
        "diss_eps" => r.diss_eps,
        "diss_drag" => r.diss_drag,
        "residual" => r.residual,
        "mass" => s.mass,
        "min_rho" => s.min_rho,
        "drift_v" => s.drift_v,
        _ => return None,
    })
}

/// CSV text of a report table; `f64` Display is the shortest exact
/// round-trip form.
pub fn reports_csv(rows: &[ReportRow]) -> Result<String, RunnerError> {
    if rows.is_empty() {
        return Err(RunnerError::EmptyTrajectory);
    }
    let mut out = CSV_COLUMNS.join(",");
    out.push('\n');
    for row in rows {
        let fields: Vec<String> = CSV_COLUMNS
            .iter()
            .map(|c| column_value(row, c).expect("documented column").to_string())
            .collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    Ok(out)
}

/// Write the report CSV; nothing is created for an empty trajectory.
pub fn emit_reports(rows: &[ReportRow], path: &Path) -> Result<(), RunnerError> {
    let text = reports_csv(rows)?;
    write_file(path, &text)
}

fn write_file(path: &Path, text: &str) -> Result<(), RunnerError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_error(parent))?;
    }
    fs::write(path, text).map_err(io_error(path))
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Self-contained SVG line chart of the chosen columns against `t`. On a
/// log scale nonpositive samples are dropped.
pub fn svg_chart(rows: &[ReportRow], columns: &[&str], log_scale: bool) -> Result<String, RunnerError> {
    if rows.is_empty() {
        return Err(RunnerError::EmptyTrajectory);
    }
    let (w, h, margin) = (720.0, 420.0, 60.0);
    let transform = |y: f64| if log_scale { (y > 0.0).then(|| y.log10()) } else { Some(y) };
    let mut series = Vec::with_capacity(columns.len());
    for &c in columns {
        if column_value(&rows[0], c).is_none() {
            return Err(RunnerError::UnknownColumn(c.to_string()));
        }
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter_map(|r| {
                let y = transform(column_value(r, c)?)?;
                y.is_finite().then_some((r.0.t, y))
            })
            .collect();
        series.push((c, pts));
    }
    let all = series.iter().flat_map(|(_, p)| p.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        let pad = y0.abs().max(1.0) * 0.5;
        (y0, y1) = (y0 - pad, y1 + pad);
    }
    let px = |x: f64| margin + (x - x0) / (x1 - x0) * (w - 2.0 * margin);
    let py = |y: f64| h - margin - (y - y0) / (y1 - y0) * (h - 2.0 * margin);
    let label = |y: f64| if log_scale { format!("1e{y:.2}") } else { format!("{y:.6e}") };

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<path d="M{m} {m} V{b} H{r}" fill="none" stroke="black"/>"#,
        m = margin,
        b = h - margin,
        r = w - margin
    );
    for (y, anchor) in [(y0, h - margin), (y1, margin)] {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{anchor}" font-size="11" text-anchor="end">{}</text>"#,
            margin - 4.0,
            label(y)
        );
    }
    for (x, anchor) in [(x0, margin), (x1, w - margin)] {
        let _ = writeln!(
            svg,
            r#"<text x="{anchor}" y="{}" font-size="11" text-anchor="middle">t = {x}</text>"#,
            h - margin + 16.0
        );
    }
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            coords.join(" ")
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="12" fill="{color}">{name}</text>"#,
            w - margin + 4.0 - 120.0,
            margin + 14.0 * (i as f64 + 1.0)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn emit_svg(rows: &[ReportRow], columns: &[&str], log_scale: bool, path: &Path) -> Result<(), RunnerError> {
    let svg = svg_chart(rows, columns, log_scale)?;
    write_file(path, &svg)
}

// ---------------------------------------------------------------------------
// checkpoints

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"KNSL";
pub const CHECKPOINT_VERSION: u32 = 1;

/// `KNSL`, version, `d`, `N` per axis, time, then `ρ`, `w`, `v` samples,
/// all little-endian; vector fields are stored component by component.
pub fn checkpoint_save(state: &SolverState) -> Vec<u8> {
    let g = state.grid();
    let fields = [&state.rho, &state.w, &state.v];
    let samples: usize = fields.iter().map(|f| f.components().len() * g.len()).sum();
    let mut out = Vec::with_capacity(16 + 4 * g.dim() + 8 * samples);
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(g.dim() as u32).to_le_bytes());
    for _ in 0..g.dim() {
        out.extend_from_slice(&(g.n() as u32).to_le_bytes());
    }
    out.extend_from_slice(&state.t.to_le_bytes());
    for x in fields.iter().flat_map(|f| f.components()).flatten() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self, expected_total: usize) -> Result<[u8; N], CheckpointError> {
        let chunk = self
            .bytes
            .get(self.pos..self.pos + N)
            .ok_or(CheckpointError::Truncated {
                expected: expected_total.max(self.pos + N),
                actual: self.bytes.len(),
            })?;
        self.pos += N;
        Ok(chunk.try_into().expect("chunk length"))
    }

    fn u32(&mut self, expected_total: usize) -> Result<u32, CheckpointError> {
        self.take::<4>(expected_total).map(u32::from_le_bytes)
    }

    fn f64(&mut self, expected_total: usize) -> Result<f64, CheckpointError> {
        self.take::<8>(expected_total).map(f64::from_le_bytes)
    }
}

/// Decode a checkpoint onto `target`; the stored `d` and `N` must match.
pub fn checkpoint_load(bytes: &[u8], target: &GridSpec) -> Result<SolverState, CheckpointError> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take::<4>(12)?;
    if magic != CHECKPOINT_MAGIC {
        return Err(CheckpointError::Magic { found: magic });
    }
    let version = r.u32(12)?;
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::UnsupportedVersion { found: version });
    }
    let dim = r.u32(12)? as usize;
    let header = 12 + 4 * dim + 8;
    let ns = (0..dim).map(|_| r.u32(header).map(|n| n as usize)).collect::<Result<Vec<_>, _>>()?;
    if dim != target.dim() || ns.iter().any(|&n| n != target.n()) {
        return Err(CheckpointError::DimensionMismatch {
            found_dim: dim,
            found_n: ns,
            target_dim: target.dim(),
            target_n: target.n(),
        });
    }
    let len = target.len();
    let expected = header + 8 * len * (1 + 2 * dim);
    if bytes.len() != expected {
        return Err(CheckpointError::Truncated {
            expected,
            actual: bytes.len(),
        });
    }
    let t = r.f64(expected)?;
    let mut read_field = |comps: usize| -> Result<Vec<Vec<f64>>, CheckpointError> {
        (0..comps)
            .map(|_| (0..len).map(|_| r.f64(expected)).collect())
            .collect()
    };
    let rho = PeriodicField::from_components(*target, Rank::Scalar, read_field(1)?).map_err(SolverError::from)?;
    let w = PeriodicField::from_components(*target, Rank::Vector, read_field(dim)?).map_err(SolverError::from)?;
    let v = PeriodicField::from_components(*target, Rank::Vector, read_field(dim)?).map_err(SolverError::from)?;
    Ok(SolverState::new(t, rho, w, v)?)
}

// ---------------------------------------------------------------------------
// drivers

/// Files written and a short human-readable summary.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
}

impl Outcome {
    fn merge(&mut self, other: Outcome) {
        self.files.extend(other.files);
        self.summary.extend(other.summary);
    }
}

/// Largest `E_{n+1} − E_n` between consecutive report rows.
pub fn max_entropy_increase(rows: &[ReportRow]) -> f64 {
    rows.windows(2)
        .map(|w| w[1].1.entropy - w[0].1.entropy)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn write_run(cfg: &RunConfig, traj: &Trajectory, dir: &Path, stem: &str) -> Result<Outcome, RunnerError> {
    let mut out = Outcome::default();
    let csv = dir.join(format!("{stem}.csv"));
    emit_reports(&traj.rows, &csv)?;
    out.files.push(csv);
    let cols: Vec<&str> = cfg.output.svg_columns.iter().map(String::as_str).collect();
    let svg = dir.join(format!("{stem}.svg"));
    emit_svg(&traj.rows, &cols, cfg.output.log_scale, &svg)?;
    out.files.push(svg);
    let ckpt = dir.join(format!("{stem}.knsl"));
    fs::write(&ckpt, checkpoint_save(&traj.final_state)).map_err(io_error(&ckpt))?;
    out.files.push(ckpt);
    let last = traj.rows.last().expect("trajectory has an initial row");
    let first = &traj.rows[0];
    out.summary.push(format!(
        "{stem}: {} steps to t = {}, entropy {} -> {}, max increase {:e}, mass drift {:e}, min rho {}, drift_v {:e}",
        traj.steps,
        last.0.t,
        first.1.entropy,
        last.1.entropy,
        max_entropy_increase(&traj.rows),
        (last.0.mass - first.0.mass) / first.0.mass,
        traj.rows.iter().map(|r| r.0.min_rho).fold(f64::INFINITY, f64::min),
        last.0.drift_v,
    ));
    Ok(out)
}

/// One nonlinear trajectory with the configured parameters.
pub fn run_nonlinear(cfg: &RunConfig) -> Result<Outcome, RunnerError> {
    let initial = cfg.initial_state()?;
    let traj = solver::run(&initial, &cfg.params, &cfg.constitutive, cfg.report_every())?;
    write_run(cfg, &traj, &cfg.output.dir, cfg.kind.name())
}

/// Continue a checkpointed state to the configured final time.
pub fn resume(cfg: &RunConfig, checkpoint: &Path) -> Result<Outcome, RunnerError> {
    if cfg.kind.is_linear() {
        return Err(RunnerError::Usage("linear experiments have no checkpoints".into()));
    }
    let bytes = fs::read(checkpoint).map_err(io_error(checkpoint))?;
    let state = checkpoint_load(&bytes, &cfg.grid)?;
    if state.t >= cfg.params.t_end {
        return Err(RunnerError::Usage(format!(
            "checkpoint time {} is not before t_end = {}",
            state.t, cfg.params.t_end
        )));
    }
    let traj = solver::run(&state, &cfg.params, &cfg.constitutive, cfg.report_every())?;
    write_run(cfg, &traj, &cfg.output.dir, "resumed")
}

/// Final-row quantities of one sweep member.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub label: &'static str,
    pub value: f64,
    pub final_entropy: f64,
    pub max_entropy_increase: f64,
    pub max_residual: f64,
    pub min_rho: f64,
    pub final_drift_v: f64,
}

fn sweep_point(label: &'static str, value: f64, rows: &[ReportRow]) -> SweepPoint {
    let last = rows.last().expect("trajectory has an initial row");
    SweepPoint {
        label,
        value,
        final_entropy: last.1.entropy,
        max_entropy_increase: max_entropy_increase(rows),
        max_residual: rows.iter().map(|r| r.1.residual).fold(0.0, f64::max),
        min_rho: rows.iter().map(|r| r.0.min_rho).fold(f64::INFINITY, f64::min),
        final_drift_v: last.0.drift_v,
    }
}

fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut s = format!(
        "{},final_entropy,max_entropy_increase,max_residual,min_rho,final_drift_v\n",
        points.first().map_or("value", |p| p.label)
    );
    for p in points {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            p.value, p.final_entropy, p.max_entropy_increase, p.max_residual, p.min_rho, p.final_drift_v
        );
    }
    s
}

/// Concurrent runs over `values`, each writing its own subdirectory.
fn sweep_runs(
    cfg: &RunConfig,
    label: &'static str,
    values: &[f64],
    configure: impl Fn(&RunConfig, f64) -> Result<RunConfig, RunnerError> + Sync,
) -> Result<(Vec<SweepPoint>, Outcome), RunnerError> {
    let results: Vec<Result<(SweepPoint, Outcome), RunnerError>> = values
        .par_iter()
        .map(|&value| {
            let member = configure(cfg, value)?;
            let initial = member.initial_state()?;
            let traj = solver::run(&initial, &member.params, &member.constitutive, member.report_every())?;
            let dir = cfg.output.dir.join(format!("{label}_{value}"));
            let out = write_run(&member, &traj, &dir, "report")?;
            Ok((sweep_point(label, value, &traj.rows), out))
        })
        .collect();
    let mut points = Vec::with_capacity(values.len());
    let mut outcome = Outcome::default();
    for r in results {
        let (p, o) = r?;
        points.push(p);
        outcome.merge(o);
    }
    let summary = cfg.output.dir.join(format!("{label}_sweep.csv"));
    write_file(&summary, &sweep_csv(&points))?;
    outcome.files.push(summary);
    Ok((points, outcome))
}

/// Runs at every κ in the sweep list.
pub fn kappa_sweep(cfg: &RunConfig) -> Result<(Vec<SweepPoint>, Outcome), RunnerError> {
    sweep_runs(cfg, "kappa", &cfg.kappas, |base, kappa| {
        let mut c = base.clone();
        c.params.kappa = kappa;
        c.params.validate()?;
        Ok(c)
    })
}

/// Runs at every mollifier width in the sweep list.
pub fn delta_sweep(cfg: &RunConfig) -> Result<(Vec<SweepPoint>, Outcome), RunnerError> {
    sweep_runs(cfg, "delta", &cfg.deltas, |base, delta| {
        let mut c = base.clone();
        c.params = c.params.with_delta(delta)?;
        Ok(c)
    })
}

/// Decay rate per lattice shell `|k|² ≤ kmax²`.
pub fn linear_decay_table(model: &LinearModel, kmax: f64) -> Result<Vec<(f64, f64)>, LinearError> {
    linear::lattice_norms(model.dim, kmax)
        .into_par_iter()
        .map(|n2| {
            let mut k = vec![0.0; model.dim];
            k[0] = (n2 as f64).sqrt();
            Ok((k[0], linear::spectral_abscissa(model, &k)?))
        })
        .collect()
}

fn linear_setup(cfg: &RunConfig) -> Result<&LinearSetup, RunnerError> {
    cfg.linear
        .as_ref()
        .ok_or_else(|| RunnerError::Usage(format!("`{}` is not a linear experiment", cfg.kind.name())))
}

/// Mode trajectory plus decay table of a linear experiment.
pub fn run_linear(cfg: &RunConfig) -> Result<Outcome, RunnerError> {
    let setup = linear_setup(cfg)?;
    let samples = linear::simulate_linear(&setup.model, &setup.k, &setup.z0, cfg.params.dt, cfg.params.t_end)?;
    let mut csv = String::from("t,lyapunov,lyapunov_dissipation,energy,h1,curl,identity_gap\n");
    for s in &samples {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            s.t, s.lyapunov, s.lyapunov_dissipation, s.energy, s.h1, s.curl, s.identity_gap
        );
    }
    let mut out = Outcome::default();
    let trace = cfg.output.dir.join(format!("{}.csv", cfg.kind.name()));
    write_file(&trace, &csv)?;
    out.files.push(trace);

    let table = linear_decay_table(&setup.model, setup.kmax)?;
    let mut decay = String::from("k_abs,spectral_abscissa\n");
    for (k, a) in &table {
        let _ = writeln!(decay, "{k},{a}");
    }
    let path = cfg.output.dir.join("decay.csv");
    write_file(&path, &decay)?;
    out.files.push(path);

    let tail: Vec<(f64, f64)> = samples.iter().map(|s| (s.t, s.lyapunov)).filter(|&(_, q)| q > 0.0).collect();
    let abscissa = linear::spectral_abscissa(&setup.model, &setup.k)?;
    out.summary.push(format!(
        "{}: spectral abscissa {abscissa}, measured Q log-slope {}, band rate (|k| <= {}) {}, max identity gap {:e}",
        cfg.kind.name(),
        linear::log_slope(&tail),
        setup.kmax,
        table.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max),
        samples.iter().map(|s| s.identity_gap).fold(0.0, f64::max),
    ));
    Ok(out)
}

/// Band decay rate at every κ in the sweep list, inadmissible values flagged.
pub fn linear_kappa_sweep(cfg: &RunConfig) -> Result<Outcome, RunnerError> {
    let setup = linear_setup(cfg)?;
    let rows: Vec<Result<String, LinearError>> = cfg
        .kappas
        .par_iter()
        .map(|&kappa| {
            let model = LinearModel { kappa, ..setup.model };
            let admissible = linear::kappa_admissible(&model).passed();
            let rate = linear::decay_rate_over_band(&model, setup.kmax)?;
            Ok(format!("{kappa},{admissible},{rate}"))
        })
        .collect();
    let mut csv = String::from("kappa,admissible,band_decay_rate\n");
    for r in rows {
        csv.push_str(&r?);
        csv.push('\n');
    }
    let path = cfg.output.dir.join("linear_kappa_sweep.csv");
    write_file(&path, &csv)?;
    Ok(Outcome {
        files: vec![path],
        summary: vec![format!("{} kappa values swept", cfg.kappas.len())],
    })
}

/// What `run` does for each experiment kind.
pub fn run_experiment(cfg: &RunConfig) -> Result<Outcome, RunnerError> {
    match cfg.kind {
        ExperimentKind::Nonlinear | ExperimentKind::Drag => run_nonlinear(cfg),
        ExperimentKind::LinearBaro | ExperimentKind::LinearHeat => run_linear(cfg),
        ExperimentKind::KappaSweep | ExperimentKind::DeltaSweep => run_sweep(cfg),
    }
}

/// Sweep driver; for linear kinds this sweeps κ over the decay band.
pub fn run_sweep(cfg: &RunConfig) -> Result<Outcome, RunnerError> {
    let (points, mut out) = match cfg.kind {
        ExperimentKind::KappaSweep => kappa_sweep(cfg)?,
        ExperimentKind::DeltaSweep => delta_sweep(cfg)?,
        ExperimentKind::LinearBaro | ExperimentKind::LinearHeat => return linear_kappa_sweep(cfg),
        other => {
            return Err(RunnerError::Usage(format!(
                "`{}` is not a sweep; use kappa-sweep, delta-sweep or a linear kind",
                other.name()
            )))
        }
    };
    for p in points {
        out.summary.push(format!(
            "{} = {}: final entropy {}, max residual {:e}, final drift_v {:e}",
            p.label, p.value, p.final_entropy, p.max_residual, p.final_drift_v
        ));
    }
    Ok(out)
}

/// Apply the thread-count override, if set. Returns the requested count.
pub fn configure_threads() -> Result<Option<usize>, RunnerError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(None);
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| RunnerError::Usage(format!("{THREADS_ENV} must be a positive integer, found `{raw}`")))?;
    // a pool built earlier in the process keeps its size
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(Some(n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy_diag::EntropyReport;

    fn row(t: f64) -> ReportRow {
        (
            StateSummary {
                t,
                mass: TAU,
                min_rho: 0.9,
                max_rho: 1.1,
                drift_v: 1.0 / 3.0,
            },
            EntropyReport {
                time: t,
                entropy: 0.1 + t,
                ..Default::default()
            },
        )
    }

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = parse_config("experiment.kind = nonlinear\n").unwrap();
        assert_eq!(cfg.params.s, 2);
        assert!(cfg.params.dealias);
        assert_eq!(cfg.grid.dim(), 1);
        assert_eq!(cfg.kind, ExperimentKind::Nonlinear);
    }

    #[test]
    fn kappa_out_of_range_cites_line() {
        let err = parse_config("# header\nsolver.kappa = 1.2\n").unwrap_err();
        assert_eq!(err.0.len(), 1);
        assert_eq!(err.0[0].line, Some(2));
        assert!(err.0[0].message.contains("κ must lie in (0,1)"));
    }

    #[test]
    fn heat_config_passes_both_constraints() {
        let text = "experiment.kind = linear-heat\ngrid.dim = 3\nsolver.kappa = 0.3\nlinear.mu = 1\nlinear.conductivity = 1\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.linear.unwrap().model.size(), 5);
    }

    #[test]
    fn unknown_key_and_type_mismatch_are_located() {
        let err = parse_config("grid.n = many\nsolver.bogus = 1\n").unwrap_err();
        let lines: Vec<_> = err.0.iter().map(|i| i.line).collect();
        assert_eq!(lines, vec![Some(2), Some(1)]);
    }

    #[test]
    fn pi_expressions_parse() {
        assert_eq!(parse_number("2*pi"), Some(TAU));
        assert_eq!(parse_number("pi/2"), Some(std::f64::consts::FRAC_PI_2));
        assert_eq!(parse_number("inf"), None);
    }

    #[test]
    fn one_row_csv_format() {
        let csv = reports_csv(&[row(0.0)]).unwrap();
        let lines: Vec<&str> = csv.split('\n').collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], CSV_COLUMNS.join(","));
        assert!(lines[1].ends_with(",0.3333333333333333"));
        assert!(!csv.contains('\r'));
    }

    #[test]
    fn empty_trajectory_creates_no_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        assert!(matches!(emit_reports(&[], &path), Err(RunnerError::EmptyTrajectory)));
        assert!(!path.exists());
    }

    #[test]
    fn svg_is_self_contained() {
        let svg = svg_chart(&[row(0.0), row(1.0)], &["entropy", "drift_v"], true).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(matches!(
            svg_chart(&[row(0.0)], &["nope"], false),
            Err(RunnerError::UnknownColumn(_))
        ));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(RunnerError::EmptyTrajectory.exit_code(), 1);
        let abort = RunnerError::Solver(SolverError::NonFinite { t: 0.1 });
        assert_eq!(abort.exit_code(), 2);
    }

    fn sample_state() -> SolverState {
        let g = GridSpec::new(2, 8).unwrap();
        let rho = PeriodicField::scalar_from_fn(g, |x| 1.0 + 0.3 * (x[0] + 2.0 * x[1]).sin());
        let w = PeriodicField::vector_from_fn(g, |x, c| (c as f64 + 1.0) * x[1].cos() / 3.0);
        let v = PeriodicField::vector_from_fn(g, |x, c| x[c].sin() * 1e-7);
        SolverState::new(0.125, rho, w, v).unwrap()
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let s = sample_state();
        let blob = checkpoint_save(&s);
        assert_eq!(&blob[..4], b"KNSL");
        let back = checkpoint_load(&blob, s.grid()).unwrap();
        assert_eq!(back.t.to_bits(), s.t.to_bits());
        for (a, b) in [(&s.rho, &back.rho), (&s.w, &back.w), (&s.v, &back.v)] {
            let bits = |f: &PeriodicField| -> Vec<u64> {
                f.components().iter().flatten().map(|x| x.to_bits()).collect()
            };
            assert_eq!(bits(a), bits(b));
        }
    }

    #[test]
    fn checkpoint_errors() {
        let s = sample_state();
        let blob = checkpoint_save(&s);
        match checkpoint_load(&blob[..blob.len() - 3], s.grid()) {
            Err(CheckpointError::Truncated { expected, actual }) => {
                assert_eq!(expected, blob.len());
                assert_eq!(actual, blob.len() - 3);
            }
            other => panic!("unexpected {other:?}"),
        }
        let mut bumped = blob.clone();
        bumped[4] = 2;
        let err = checkpoint_load(&bumped, s.grid()).unwrap_err();
        assert!(err.to_string().contains("unsupported version"));
        let other = GridSpec::new(2, 16).unwrap();
        assert!(matches!(
            checkpoint_load(&blob, &other),
            Err(CheckpointError::DimensionMismatch { .. })
        ));
    }
}
