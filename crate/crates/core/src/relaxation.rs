//! Relaxation of HBPC steps onto the level set of the conserved functional,
//! and the time loop driving a whole run.
//!
//! A relaxed step replaces `w^{n+1}` by `wⁿ + γ(w^{n+1} − wⁿ)` with γ solving
//! `η(wⁿ + γd) = η(wⁿ)`, and advances time by `γΔt` instead of `Δt`.

use std::io::Write;

use thiserror::Error;

use crate::hbpc::{hbpc_step, HbpcConfig, StepFailed};
use crate::problems::Ivp;
use crate::scalar::{distance, dot, Scalar};
use crate::solvers::{solve_gamma, RootSettings, SolverError};

#[derive(Clone, Debug, PartialEq)]
pub struct RelaxedStep<T> {
    pub gamma: T,
    pub w_relaxed: Vec<T>,
    pub t_next: T,
    /// `η(w_relaxed) − η(w⁰)`
    pub eta_drift: T,
}

/// Relaxes the step `w_n → w_next` taken with nominal size `dt` from `t_n`.
///
/// A zero increment leaves the relaxation equation degenerate; it is
/// reported as `γ = 1`.
pub fn relax<T: Scalar, P: Ivp<T> + ?Sized>(
    ivp: &P,
    w_n: &[T],
    w_next: &[T],
    t_n: T,
    dt: T,
    eta0: T,
    settings: &RootSettings<T>,
) -> Result<RelaxedStep<T>, SolverError> {
    let d: Vec<T> = w_next.iter().zip(w_n).map(|(&a, &b)| a - b).collect();
    let along = |gamma: T| -> Vec<T> { w_n.iter().zip(&d).map(|(&w, &di)| w + gamma * di).collect() };
    let gamma = if d.iter().all(|x| x.is_zero()) {
        T::one()
    } else {
        let eta_n = ivp.eta(w_n);
        solve_gamma(
            |gamma| ivp.eta(&along(gamma)) - eta_n,
            |gamma| dot(&ivp.eta_grad(&along(gamma)), &d),
            settings,
        )?
    };
    let w_relaxed = if gamma == T::one() { w_next.to_vec() } else { along(gamma) };
    let eta_drift = ivp.eta(&w_relaxed) - eta0;
    Ok(RelaxedStep {
        gamma,
        w_relaxed,
        t_next: t_n + gamma * dt,
        eta_drift,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegrateOptions<T> {
    pub relaxed: bool,
    pub root: RootSettings<T>,
}

impl<T: Scalar> IntegrateOptions<T> {
    pub fn relaxed() -> Self {
        Self {
            relaxed: true,
            root: RootSettings::default(),
        }
    }

    pub fn unrelaxed() -> Self {
        Self {
            relaxed: false,
            root: RootSettings::default(),
        }
    }

    pub fn with_relaxation(relaxed: bool) -> Self {
        if relaxed {
            Self::relaxed()
        } else {
            Self::unrelaxed()
        }
    }
}

/// One accepted step.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord<T> {
    pub step: usize,
    pub t: T,
    pub state: Vec<T>,
    pub eta: T,
    /// 1 for unrelaxed runs.
    pub gamma: T,
    pub newton_iterations: usize,
    /// Euclidean distance to a reference solution at `t`, once attached.
    pub error: Option<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<T> {
    pub problem: String,
    pub initial_state: Vec<T>,
    pub eta0: T,
    pub records: Vec<RunRecord<T>>,
}

impl<T: Scalar> Trajectory<T> {
    fn new(problem: &str, w0: Vec<T>, eta0: T) -> Self {
        Self {
            problem: problem.to_string(),
            initial_state: w0,
            eta0,
            records: Vec::new(),
        }
    }

    pub fn final_time(&self) -> T {
        self.records.last().map_or(T::zero(), |r| r.t)
    }

    pub fn final_state(&self) -> &[T] {
        self.records
            .last()
            .map_or(&self.initial_state, |r| &r.state)
    }

    /// `max_n |η(wⁿ) − η(w⁰)|`
    pub fn max_eta_drift(&self) -> T {
        self.records
            .iter()
            .map(|r| (r.eta - self.eta0).abs())
            .fold(T::zero(), T::max)
    }

    pub fn max_gamma_deviation(&self) -> T {
        self.records
            .iter()
            .map(|r| (r.gamma - T::one()).abs())
            .fold(T::zero(), T::max)
    }

    /// Fills the `error` column against `reference` evaluated at each record's
    /// achieved time.
    pub fn attach_errors(&mut self, mut reference: impl FnMut(T) -> Vec<T>) {
        for r in &mut self.records {
            r.error = Some(distance(&r.state, &reference(r.t)));
        }
    }

    /// CSV with header `t,error,eta,gamma,newton_iters`; `error` is left
    /// empty when no reference was attached.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "error", "eta", "gamma", "newton_iters"])?;
        for r in &self.records {
            w.write_record([
                r.t.to_string(),
                r.error.map(|e| e.to_string()).unwrap_or_default(),
                r.eta.to_string(),
                r.gamma.to_string(),
                r.newton_iterations.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum IntegrationError {
    #[error(transparent)]
    StepFailed(#[from] StepFailed),
    #[error("relaxation failed after the step from t = {t}: {source}")]
    Relaxation { t: f64, source: SolverError },
    #[error("invalid integration arguments: {0}")]
    InvalidArguments(String),
}

impl IntegrationError {
    /// Start time of the failing step, if any step was attempted.
    pub fn time(&self) -> Option<f64> {
        match self {
            Self::StepFailed(f) => Some(f.t),
            Self::Relaxation { t, .. } => Some(*t),
            Self::InvalidArguments(_) => None,
        }
    }

    pub fn is_relaxation_root_not_found(&self) -> bool {
        matches!(
            self,
            Self::Relaxation {
                source: SolverError::RelaxationRootNotFound { .. },
                ..
            }
        )
    }
}

/// An aborted run together with everything computed before the failure.
#[derive(Clone, Debug, Error)]
#[error("{error}")]
pub struct IntegrationFailure<T> {
    pub error: IntegrationError,
    pub partial: Trajectory<T>,
}

/// Integrates from `t = 0` to `t_end` with nominal step `dt`.
///
/// The final step is clamped to `t_end − t`. In relaxed mode every step
/// advances time by `γ·h`, so the achieved final time (the last record's `t`)
/// may differ from `t_end` by `O(h^{p+1})`.
pub fn integrate<T: Scalar, P: Ivp<T> + ?Sized>(
    ivp: &P,
    cfg: &HbpcConfig<T>,
    dt: T,
    t_end: T,
    opts: &IntegrateOptions<T>,
) -> Result<Trajectory<T>, IntegrationFailure<T>> {
    let w0 = ivp.initial_state();
    let eta0 = ivp.eta(&w0);
    let mut run = Trajectory::new(ivp.name(), w0.clone(), eta0);
    if !(dt > T::zero()) || !(t_end > T::zero()) {
        return Err(IntegrationFailure {
            error: IntegrationError::InvalidArguments(format!("need dt > 0 and t_end > 0 (dt = {dt}, t_end = {t_end})")),
            partial: run,
        });
    }
    let slack = T::lit(1e-12).max(T::epsilon() * t_end * T::lit(4.0));

    let mut t = T::zero();
    let mut w = w0;
    let mut step = 0;
    loop {
        if t >= t_end - slack {
            break;
        }
        let last = t + dt >= t_end - slack;
        let h = if last { t_end - t } else { dt };

        let out = match hbpc_step(ivp, &w, t, h, cfg) {
            Ok(out) => out,
            Err(e) => {
                return Err(IntegrationFailure {
                    error: e.into(),
                    partial: run,
                })
            }
        };
        let (w_next, t_next, gamma) = if opts.relaxed {
            match relax(ivp, &w, &out.w_next, t, h, eta0, &opts.root) {
                Ok(r) => (r.w_relaxed, r.t_next, r.gamma),
                Err(source) => {
                    return Err(IntegrationFailure {
                        error: IntegrationError::Relaxation {
                            t: t.as_f64(),
                            source,
                        },
                        partial: run,
                    })
                }
            }
        } else {
            (out.w_next, if last { t_end } else { t + h }, T::one())
        };

        step += 1;
        run.records.push(RunRecord {
            step,
            t: t_next,
            eta: ivp.eta(&w_next),
            state: w_next.clone(),
            gamma,
            newton_iterations: out.diagnostics.total(),
            error: None,
        });
        t = t_next;
        w = w_next;
        if last {
            break;
        }
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{Linear, Oscillator};
    use crate::tableau::builtin;

    fn cfg(kmax: usize) -> HbpcConfig<f64> {
        HbpcConfig::new(builtin("HB-I2DRK6-3s").unwrap(), kmax)
    }

    #[test]
    fn increment_already_on_level_set_gives_unit_gamma() {
        let w_n = [1.0_f64, 0.0];
        let w_next = [0.6, 0.8];
        let r = relax(&Oscillator, &w_n, &w_next, 0.0, 0.1, 1.0, &RootSettings::default()).unwrap();
        assert_eq!(r.gamma, 1.0);
        assert_eq!(r.w_relaxed, w_next);
        assert!((r.t_next - 0.1).abs() < 1e-16);
    }

    #[test]
    fn zero_increment_convention() {
        let w = [0.3_f64, 0.4];
        let r = relax(&Oscillator, &w, &w, 2.0, 0.5, 0.25, &RootSettings::default()).unwrap();
        assert_eq!(r.gamma, 1.0);
        assert_eq!(r.t_next, 2.5);
    }

    #[test]
    fn squared_norm_gamma_matches_closed_form() {
        let w_n = [0.6_f64, 0.8];
        let w_next = [0.43, 0.91];
        let d = [w_next[0] - w_n[0], w_next[1] - w_n[1]];
        let closed = -2.0 * (w_n[0] * d[0] + w_n[1] * d[1]) / (d[0] * d[0] + d[1] * d[1]);
        let r = relax(&Oscillator, &w_n, &w_next, 0.0, 0.2, 1.0, &RootSettings::default()).unwrap();
        assert!((r.gamma - closed).abs() < 1e-13);
        assert!(r.eta_drift.abs() < 1e-14);
        assert!((r.t_next - 0.2 * closed).abs() < 1e-14);
    }

    #[test]
    fn uniform_grid_when_dt_divides_t_end() {
        let run = integrate(&Oscillator, &cfg(2), 0.25, 3.0, &IntegrateOptions::unrelaxed()).unwrap();
        assert_eq!(run.records.len(), 12);
        for (n, r) in run.records.iter().enumerate() {
            assert!((r.t - 0.25 * (n + 1) as f64).abs() < 1e-12);
            assert_eq!(r.gamma, 1.0);
        }
        assert_eq!(run.final_time(), 3.0);
    }

    #[test]
    fn clamped_final_step() {
        let run = integrate(&Oscillator, &cfg(2), 0.4, 1.0, &IntegrateOptions::unrelaxed()).unwrap();
        let times: Vec<f64> = run.records.iter().map(|r| r.t).collect();
        assert_eq!(times.len(), 3);
        assert!((times[1] - 0.8).abs() < 1e-15);
        assert_eq!(times[2], 1.0);
    }

    #[test]
    fn single_step_run() {
        let run = integrate(&Oscillator, &cfg(1), 0.5, 0.5, &IntegrateOptions::relaxed()).unwrap();
        assert_eq!(run.records.len(), 1);
    }

    #[test]
    fn relaxed_run_preserves_functional() {
        let run = integrate(&Oscillator, &cfg(4), 0.2, 10.0, &IntegrateOptions::relaxed()).unwrap();
        assert!(run.max_eta_drift() < 1e-13);
        assert!(run.max_gamma_deviation() > 0.0);
        // The clamped last step lands within (γ − 1)·h of t_end.
        assert!((run.final_time() - 10.0).abs() < 1e-5);
    }

    #[test]
    fn errors_and_csv() {
        let mut run = integrate(&Oscillator, &cfg(3), 0.5, 1.0, &IntegrateOptions::relaxed()).unwrap();
        let mut buf = Vec::new();
        run.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,error,eta,gamma,newton_iters\n"));
        assert!(text.lines().nth(1).unwrap().split(',').nth(1).unwrap().is_empty());

        run.attach_errors(crate::problems::oscillator_exact);
        assert!(run.records.iter().all(|r| r.error.unwrap() < 1e-2));
    }

    #[test]
    fn invalid_arguments() {
        let err = integrate(&Linear::new(-1.0), &cfg(1), 0.0, 1.0, &IntegrateOptions::unrelaxed()).unwrap_err();
        assert!(matches!(err.error, IntegrationError::InvalidArguments(_)));
    }
}
