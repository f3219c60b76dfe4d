//! Experiment harness: error growth over time, convergence-order studies and
//! γ traces, all written as CSV.
//!
//! Runs are described by a [`RunSpec`], which can be read from JSON using the
//! same field names.

mod fit;
pub mod plot;

pub use fit::loglog_slope;
pub use plot::{plot_script, PlotKind};

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hbpc::{CorrectorScaling, HbpcConfig, QuadratureSource};
use crate::problems::reference::{kepler_reference, oscillator_reference, ReferenceError, ReferenceSolution};
use crate::problems::{Ivp, Kepler, KeplerFunctional, Oscillator};
use crate::relaxation::{integrate, IntegrateOptions, IntegrationError, Trajectory};
use crate::scalar::distance;
use crate::tableau::{builtin, TableauError};

/// Errors inside this window enter the convergence fit. The lower bound sits
/// above the accuracy floor of the numerical Kepler reference.
pub const FIT_WINDOW: (f64, f64) = (1e-11, 1e-1);
/// Minimum number of rows inside [`FIT_WINDOW`].
pub const MIN_FIT_ROWS: usize = 3;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid run specification: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Tableau(#[from] TableauError),
    #[error(transparent)]
    Reference(#[from] ReferenceError),
    #[error("only {rows} rows fall inside the fit window (need {MIN_FIT_ROWS})")]
    InsufficientAsymptoticRange { rows: usize },
    #[error("malformed CSV `{path}`: {reason}")]
    MalformedCsv { path: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    #[default]
    Oscillator,
    Kepler,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Oscillator => "oscillator",
            Self::Kepler => "kepler",
        }
    }

    /// First step size of the default halving sequence.
    pub fn default_dt(self) -> f64 {
        match self {
            Self::Oscillator => 0.4,
            Self::Kepler => 0.2,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FunctionalKind {
    /// The problem's own functional (angular momentum for Kepler).
    #[default]
    Default,
    Hamiltonian,
}

/// One step size or a list of them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DtSpec {
    Single(f64),
    List(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSpec {
    pub problem: ProblemKind,
    pub tableau: String,
    pub kmax: usize,
    pub relaxed: bool,
    pub dt: Option<DtSpec>,
    #[serde(rename = "T_end", alias = "t_end", alias = "tend")]
    pub t_end: f64,
    pub functional: FunctionalKind,
    pub corrector_scaling: CorrectorScaling,
    pub quadrature_source: QuadratureSource,
    pub output_dir: PathBuf,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            problem: ProblemKind::Oscillator,
            tableau: "HB-I2DRK6-3s".into(),
            kmax: 4,
            relaxed: false,
            dt: None,
            t_end: 10.0,
            functional: FunctionalKind::Default,
            corrector_scaling: CorrectorScaling::Global,
            quadrature_source: QuadratureSource::IterateK,
            output_dir: PathBuf::from("."),
        }
    }
}

/// `n` successive halvings starting at `first`.
pub fn halvings(first: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| first / 2f64.powi(i as i32)).collect()
}

impl RunSpec {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if !(self.t_end > 0.0) {
            return Err(HarnessError::InvalidSpec(format!("T_end must be positive, got {}", self.t_end)));
        }
        let dts = match &self.dt {
            Some(DtSpec::Single(dt)) => vec![*dt],
            Some(DtSpec::List(l)) => l.clone(),
            None => vec![],
        };
        if dts.iter().any(|&dt| !(dt > 0.0)) {
            return Err(HarnessError::InvalidSpec("every dt must be positive".into()));
        }
        Ok(())
    }

    /// The single step size of a growth or γ-trace run.
    pub fn single_dt(&self) -> Result<f64, HarnessError> {
        match &self.dt {
            Some(DtSpec::Single(dt)) => Ok(*dt),
            Some(DtSpec::List(l)) if l.len() == 1 => Ok(l[0]),
            Some(DtSpec::List(_)) => Err(HarnessError::InvalidSpec("this command takes a single dt".into())),
            None => Ok(self.problem.default_dt()),
        }
    }

    /// Step sizes of a convergence study, largest first. Defaults to six
    /// halvings from the problem's default step.
    pub fn dt_list(&self) -> Vec<f64> {
        let mut dts = match &self.dt {
            Some(DtSpec::List(l)) => l.clone(),
            Some(DtSpec::Single(dt)) => halvings(*dt, 6),
            None => halvings(self.problem.default_dt(), 6),
        };
        dts.sort_by(|a, b| b.total_cmp(a));
        dts.dedup();
        dts
    }

    pub fn problem(&self) -> Box<dyn Ivp<f64>> {
        match (self.problem, self.functional) {
            (ProblemKind::Oscillator, _) => Box::new(Oscillator),
            (ProblemKind::Kepler, FunctionalKind::Default) => Box::new(Kepler::default()),
            (ProblemKind::Kepler, FunctionalKind::Hamiltonian) => {
                Box::new(Kepler::with_functional(KeplerFunctional::Hamiltonian))
            }
        }
    }

    pub fn config(&self) -> Result<HbpcConfig<f64>, HarnessError> {
        Ok(HbpcConfig::new(builtin(&self.tableau)?, self.kmax)
            .with_corrector_scaling(self.corrector_scaling)
            .with_quadrature_source(self.quadrature_source))
    }

    pub fn reference(&self) -> Result<Arc<ReferenceSolution>, HarnessError> {
        Ok(match self.problem {
            ProblemKind::Oscillator => Arc::new(oscillator_reference()),
            ProblemKind::Kepler => kepler_reference(self.t_end)?,
        })
    }

    fn stem(&self, kind: &str) -> String {
        format!(
            "{kind}_{}_{}_kmax{}_{}",
            self.problem.name(),
            self.tableau,
            self.kmax,
            if self.relaxed { "relaxed" } else { "unrelaxed" }
        )
    }

    fn output_path(&self, kind: &str, dt: Option<f64>) -> PathBuf {
        let mut name = self.stem(kind);
        if let Some(dt) = dt {
            name.push_str(&format!("_dt{dt}"));
        }
        name.push_str(&format!("_tend{}.csv", self.t_end));
        self.output_dir.join(name)
    }
}

/// A run that may have stopped early; `failure` is set when it did.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub trajectory: Trajectory<f64>,
    pub failure: Option<IntegrationError>,
    /// Where the CSV went, for the file-writing commands.
    pub path: Option<PathBuf>,
}

impl RunOutcome {
    pub fn completed(&self) -> bool {
        self.failure.is_none()
    }
}

/// Runs `spec` with a single step size and attaches reference errors.
pub fn run_single(spec: &RunSpec) -> Result<RunOutcome, HarnessError> {
    spec.validate()?;
    let dt = spec.single_dt()?;
    let ivp = spec.problem();
    let cfg = spec.config()?;
    let reference = spec.reference()?;
    let opts = IntegrateOptions::with_relaxation(spec.relaxed);
    let (mut trajectory, failure) = match integrate(ivp.as_ref(), &cfg, dt, spec.t_end, &opts) {
        Ok(t) => (t, None),
        Err(f) => (f.partial, Some(f.error)),
    };
    trajectory.attach_errors(|t| reference.eval(t));
    Ok(RunOutcome {
        trajectory,
        failure,
        path: None,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, HarnessError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// `t,error,eta`, one row per accepted step.
pub fn write_growth_csv<W: Write>(trajectory: &Trajectory<f64>, out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "error", "eta"])?;
    for r in &trajectory.records {
        w.write_record([
            r.t.to_string(),
            r.error.map(|e| e.to_string()).unwrap_or_default(),
            r.eta.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `t,gamma`, one row per accepted step plus a `nan` row at the failure time
/// when the run aborted.
pub fn write_gamma_csv<W: Write>(outcome: &RunOutcome, out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "gamma"])?;
    for r in &outcome.trajectory.records {
        w.write_record([r.t.to_string(), r.gamma.to_string()])?;
    }
    if let Some(t) = outcome.failure.as_ref().and_then(IntegrationError::time) {
        w.write_record([t.to_string(), "nan".to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Error growth over time.
pub fn cmd_growth(spec: &RunSpec) -> Result<RunOutcome, HarnessError> {
    let mut outcome = run_single(spec)?;
    let path = spec.output_path("growth", Some(spec.single_dt()?));
    write_growth_csv(&outcome.trajectory, create(&path)?)?;
    outcome.path = Some(path);
    Ok(outcome)
}

/// Per-step relaxation parameter.
pub fn cmd_gamma_trace(spec: &RunSpec) -> Result<RunOutcome, HarnessError> {
    let mut outcome = run_single(spec)?;
    let path = spec.output_path("gamma", Some(spec.single_dt()?));
    write_gamma_csv(&outcome, create(&path)?)?;
    outcome.path = Some(path);
    Ok(outcome)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub dt: f64,
    /// Euclidean error at the achieved final time.
    pub error: f64,
    /// `|η(w_N) − η(w⁰)|`
    pub eta_drift: f64,
    pub final_time: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceFailure {
    pub dt: f64,
    pub error: IntegrationError,
}

#[derive(Clone, Debug)]
pub struct ConvergenceReport {
    pub spec: RunSpec,
    /// Completed runs, `dt` strictly decreasing.
    pub rows: Vec<ConvergenceRow>,
    pub failures: Vec<ConvergenceFailure>,
    pub expected_order: usize,
    pub path: Option<PathBuf>,
}

impl ConvergenceReport {
    /// Rows whose error lies inside [`FIT_WINDOW`].
    pub fn fit_rows(&self) -> Vec<&ConvergenceRow> {
        self.rows
            .iter()
            .filter(|r| r.error >= FIT_WINDOW.0 && r.error <= FIT_WINDOW.1)
            .collect()
    }

    /// Observed order: least-squares slope of `log error` over `log dt` on
    /// the rows inside the fit window.
    pub fn fitted_order(&self) -> Result<f64, HarnessError> {
        let rows = self.fit_rows();
        if rows.len() < MIN_FIT_ROWS {
            return Err(HarnessError::InsufficientAsymptoticRange { rows: rows.len() });
        }
        let dts: Vec<f64> = rows.iter().map(|r| r.dt).collect();
        let errs: Vec<f64> = rows.iter().map(|r| r.error).collect();
        loglog_slope(&dts, &errs).ok_or(HarnessError::InsufficientAsymptoticRange { rows: rows.len() })
    }

    /// `dt,error,eta_drift`
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["dt", "error", "eta_drift"])?;
        for r in &self.rows {
            w.write_record([r.dt.to_string(), r.error.to_string(), r.eta_drift.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs every step size of the study (concurrently) without writing files.
pub fn run_convergence(spec: &RunSpec) -> Result<ConvergenceReport, HarnessError> {
    spec.validate()?;
    let dts = spec.dt_list();
    if dts.len() < 4 {
        return Err(HarnessError::InvalidSpec(format!(
            "a convergence study needs at least 4 step sizes, got {}",
            dts.len()
        )));
    }
    let cfg = spec.config()?;
    let reference = spec.reference()?;
    let opts = IntegrateOptions::with_relaxation(spec.relaxed);

    let results: Vec<(f64, Result<Trajectory<f64>, IntegrationError>)> = dts
        .par_iter()
        .map(|&dt| {
            let ivp = spec.problem();
            (dt, integrate(ivp.as_ref(), &cfg, dt, spec.t_end, &opts).map_err(|f| f.error))
        })
        .collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (dt, result) in results {
        match result {
            Ok(run) => {
                let t_n = run.final_time();
                let w_n = run.final_state();
                rows.push(ConvergenceRow {
                    dt,
                    error: distance(w_n, &reference.eval(t_n)),
                    eta_drift: (spec.problem().eta(w_n) - run.eta0).abs(),
                    final_time: t_n,
                });
            }
            Err(error) => failures.push(ConvergenceFailure { dt, error }),
        }
    }
    Ok(ConvergenceReport {
        expected_order: cfg.expected_order(),
        spec: spec.clone(),
        rows,
        failures,
        path: None,
    })
}

/// Convergence study written as CSV. The CSV is written even when the fit
/// cannot be performed; that case is reported as
/// [`HarnessError::InsufficientAsymptoticRange`] by [`ConvergenceReport::fitted_order`].
pub fn cmd_convergence(spec: &RunSpec) -> Result<ConvergenceReport, HarnessError> {
    let mut report = run_convergence(spec)?;
    let path = spec.output_path("convergence", None);
    report.write_csv(create(&path)?)?;
    report.path = Some(path);
    Ok(report)
}

/// Least-squares slope of `log error` against `log t` over records with
/// `t ∈ [t_lo, t_hi]`.
pub fn growth_slope(trajectory: &Trajectory<f64>, t_lo: f64, t_hi: f64) -> Option<f64> {
    let (ts, errs): (Vec<f64>, Vec<f64>) = trajectory
        .records
        .iter()
        .filter(|r| r.t >= t_lo && r.t <= t_hi)
        .filter_map(|r| r.error.map(|e| (r.t, e)))
        .unzip();
    loglog_slope(&ts, &errs)
}
