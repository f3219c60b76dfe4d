//! Reference solutions for error measurements.
//!
//! The oscillator has a closed form. Kepler's problem uses a fine run of the
//! background implicit scheme `HB-I2DRK8-4s`, checked by halving the step and
//! cached on disk as JSON (location from `MDRELAX_CACHE_DIR`, falling back to
//! the system temp directory).

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{oscillator_exact, Ivp, Kepler};
use crate::hbpc::{background_rk_increment, StepError};
use crate::scalar::distance;
use crate::solvers::NewtonSettings;
use crate::tableau::builtin;

pub const CACHE_ENV: &str = "MDRELAX_CACHE_DIR";

/// Steps per unit of `T_end` in the Kepler reference: `Δt = T_end / 20000`.
pub const KEPLER_REFERENCE_STEPS: usize = 20_000;
const KEPLER_REFERENCE_METHOD: &str = "HB-I2DRK8-4s";
/// Largest admissible change of the final state under step halving.
pub const RICHARDSON_TOL: f64 = 1e-12;
const REFERENCE_NEWTON_TOL: f64 = 1e-15;
/// Number of samples in the dense-output stencil (degree 8).
const STENCIL: usize = 9;

#[derive(Debug, Error)]
pub enum ReferenceError {
    #[error("reference integration failed: {0}")]
    Step(#[from] StepError),
    #[error("reference changes by {change:e} under step halving (limit {RICHARDSON_TOL:e})")]
    ReferenceDivergence { change: f64 },
    #[error("invalid reference request: {0}")]
    InvalidArguments(String),
    #[error("reference cache I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("reference cache format: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReferenceKind {
    Exact,
    Numerical,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Provenance {
    pub method: String,
    pub dt: Option<f64>,
    /// Measured change of the final state under step halving.
    pub tolerance: Option<f64>,
}

#[derive(Clone, Debug)]
enum Source {
    Exact(fn(f64) -> Vec<f64>),
    Table { times: Vec<f64>, states: Vec<Vec<f64>> },
}

#[derive(Clone, Debug)]
pub struct ReferenceSolution {
    pub kind: ReferenceKind,
    pub provenance: Provenance,
    source: Source,
}

/// On-disk layout of a cached numerical reference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceCache {
    pub problem: String,
    pub method: String,
    pub dt: f64,
    #[serde(default)]
    pub richardson_change: Option<f64>,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl ReferenceSolution {
    pub fn exact(method: &str, f: fn(f64) -> Vec<f64>) -> Self {
        Self {
            kind: ReferenceKind::Exact,
            provenance: Provenance {
                method: method.to_string(),
                dt: None,
                tolerance: None,
            },
            source: Source::Exact(f),
        }
    }

    pub fn from_cache(cache: ReferenceCache) -> Result<Self, ReferenceError> {
        if cache.times.len() < STENCIL || cache.times.len() != cache.states.len() {
            return Err(ReferenceError::InvalidArguments(format!(
                "cache holds {} times and {} states",
                cache.times.len(),
                cache.states.len()
            )));
        }
        Ok(Self {
            kind: ReferenceKind::Numerical,
            provenance: Provenance {
                method: cache.method,
                dt: Some(cache.dt),
                tolerance: cache.richardson_change,
            },
            source: Source::Table {
                times: cache.times,
                states: cache.states,
            },
        })
    }

    /// Last time covered by stored samples (`∞` for closed forms).
    pub fn end_time(&self) -> f64 {
        match &self.source {
            Source::Exact(_) => f64::INFINITY,
            Source::Table { times, .. } => *times.last().expect("non-empty table"),
        }
    }

    /// Reference state at `t`; tabulated solutions use degree-8 Lagrange
    /// interpolation on the nine samples nearest to `t`.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        match &self.source {
            Source::Exact(f) => f(t),
            Source::Table { times, states } => {
                let n = times.len();
                let centre = times.partition_point(|&s| s < t);
                let start = centre.saturating_sub(STENCIL / 2).min(n - STENCIL);
                let idx = start..start + STENCIL;
                if let Some(i) = idx.clone().find(|&i| times[i] == t) {
                    return states[i].clone();
                }
                let mut out = vec![0.0; states[0].len()];
                for i in idx.clone() {
                    let weight: f64 = idx
                        .clone()
                        .filter(|&j| j != i)
                        .map(|j| (t - times[j]) / (times[i] - times[j]))
                        .product();
                    for (o, &s) in out.iter_mut().zip(&states[i]) {
                        *o += weight * s;
                    }
                }
                out
            }
        }
    }
}

pub fn oscillator_reference() -> ReferenceSolution {
    ReferenceSolution::exact("closed form (cos t, sin t)", oscillator_exact::<f64>)
}

/// `a + b` and its rounding error.
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Integrates `ivp` with the background scheme and records every state.
pub fn tabulate<P: Ivp<f64> + ?Sized>(
    ivp: &P,
    method: &str,
    t_end: f64,
    steps: usize,
) -> Result<ReferenceCache, ReferenceError> {
    if !(t_end > 0.0) || steps == 0 {
        return Err(ReferenceError::InvalidArguments(format!(
            "t_end = {t_end}, steps = {steps}"
        )));
    }
    let tableau = builtin::<f64>(method).map_err(|e| ReferenceError::InvalidArguments(e.to_string()))?;
    let newton = NewtonSettings {
        tol: REFERENCE_NEWTON_TOL,
        ..NewtonSettings::default()
    };
    let dt = t_end / steps as f64;
    let mut w = ivp.initial_state();
    // Each component is carried as an unevaluated sum `w + carry`, so the
    // rounding of the many O(Δt) increments does not accumulate.
    let mut carry = vec![0.0; w.len()];
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(w.clone());
    for n in 1..=steps {
        let dw = background_rk_increment(ivp, &w, dt, &tableau, &newton)?;
        for ((wi, ci), di) in w.iter_mut().zip(&mut carry).zip(dw) {
            let (sum, err) = two_sum(*wi, di);
            (*wi, *ci) = two_sum(sum, err + *ci);
        }
        times.push(if n == steps { t_end } else { n as f64 * dt });
        states.push(w.clone());
    }
    Ok(ReferenceCache {
        problem: ivp.name().to_string(),
        method: method.to_string(),
        dt,
        richardson_change: None,
        times,
        states,
    })
}

/// Tabulates with `steps` and `2·steps` and fails if the final states differ
/// by `RICHARDSON_TOL` or more.
pub fn tabulate_checked<P: Ivp<f64> + ?Sized>(
    ivp: &P,
    method: &str,
    t_end: f64,
    steps: usize,
) -> Result<ReferenceCache, ReferenceError> {
    let (coarse, fine) = rayon::join(
        || tabulate(ivp, method, t_end, steps),
        || tabulate(ivp, method, t_end, 2 * steps),
    );
    let mut coarse = coarse?;
    let fine = fine?;
    let change = distance(
        coarse.states.last().expect("non-empty"),
        fine.states.last().expect("non-empty"),
    );
    if !(change < RICHARDSON_TOL) {
        return Err(ReferenceError::ReferenceDivergence { change });
    }
    coarse.richardson_change = Some(change);
    Ok(coarse)
}

pub fn default_cache_dir() -> PathBuf {
    std::env::var_os(CACHE_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("mdrelax-cache"))
}

fn cache_file(dir: &Path, problem: &str, t_end: f64, dt: f64) -> PathBuf {
    dir.join(format!("{problem}_tend{t_end}_dt{dt:e}.json"))
}

type Memo = Mutex<HashMap<(u64, Option<PathBuf>), Arc<ReferenceSolution>>>;

fn memo() -> &'static Memo {
    static MEMO: OnceLock<Memo> = OnceLock::new();
    MEMO.get_or_init(Default::default)
}

/// Numerical Kepler reference on `[0, t_end]` with `Δt = t_end / 20000`,
/// using the default cache directory.
pub fn kepler_reference(t_end: f64) -> Result<Arc<ReferenceSolution>, ReferenceError> {
    kepler_reference_in(t_end, Some(&default_cache_dir()))
}

/// Like [`kepler_reference`] with an explicit cache directory (`None`
/// disables the on-disk cache). Results are also memoised in-process.
pub fn kepler_reference_in(
    t_end: f64,
    cache_dir: Option<&Path>,
) -> Result<Arc<ReferenceSolution>, ReferenceError> {
    if !(t_end > 0.0) {
        return Err(ReferenceError::InvalidArguments(format!("t_end = {t_end}")));
    }
    let key = (t_end.to_bits(), cache_dir.map(Path::to_path_buf));
    // Held for the whole computation so concurrent callers wait for one run.
    let mut memo = memo().lock().unwrap_or_else(|e| e.into_inner());
    if let Some(hit) = memo.get(&key) {
        return Ok(hit.clone());
    }

    let dt = t_end / KEPLER_REFERENCE_STEPS as f64;
    let path = cache_dir.map(|d| cache_file(d, "kepler", t_end, dt));
    let cached = path
        .as_ref()
        .and_then(|p| fs::read_to_string(p).ok())
        .and_then(|text| serde_json::from_str::<ReferenceCache>(&text).ok())
        .filter(|c| {
            c.problem == "kepler"
                && c.method == KEPLER_REFERENCE_METHOD
                && c.dt == dt
                && c.times.len() == KEPLER_REFERENCE_STEPS + 1
        });
    let table = match cached {
        Some(c) => c,
        None => {
            let fresh =
                tabulate_checked(&Kepler::default(), KEPLER_REFERENCE_METHOD, t_end, KEPLER_REFERENCE_STEPS)?;
            if let Some(p) = &path {
                if let Some(dir) = p.parent() {
                    fs::create_dir_all(dir)?;
                }
                // Write-then-rename keeps concurrent processes from reading a torn file.
                let tmp = p.with_extension(format!("json.{}", std::process::id()));
                fs::write(&tmp, serde_json::to_vec(&fresh)?)?;
                fs::rename(&tmp, p)?;
            }
            fresh
        }
    };
    let solution = Arc::new(ReferenceSolution::from_cache(table)?);
    memo.insert(key, solution.clone());
    Ok(solution)
}
