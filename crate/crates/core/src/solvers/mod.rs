//! Damped Newton for stage systems and the safeguarded scalar root finder used
//! for the relaxation parameter.

mod newton;
mod root;

pub use newton::{damped_newton, damped_newton_with_jacobian, NewtonOutcome};
pub use root::solve_gamma;

use thiserror::Error;

use crate::problems::ProblemError;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum SolverError {
    #[error("Newton did not converge after {iterations} iterations (residual {residual_norm:e})")]
    NewtonDiverged {
        iterations: usize,
        residual_norm: f64,
        last_iterate: Vec<f64>,
    },
    #[error("singular Jacobian in Newton iteration {iteration}")]
    SingularJacobian { iteration: usize },
    #[error("no admissible relaxation root: {reason}")]
    RelaxationRootNotFound { reason: String },
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum JacobianMode {
    /// Central differences of the residual.
    #[default]
    FiniteDifference,
    /// Analytic tower Jacobians where the problem provides them, finite
    /// differences otherwise.
    Analytic,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonSettings<T> {
    /// Tolerance on the Euclidean norm of the residual.
    pub tol: T,
    pub max_iter: usize,
    /// Smallest damping factor tried before giving up.
    pub min_damping: T,
    pub jacobian: JacobianMode,
}

impl<T: Scalar> Default for NewtonSettings<T> {
    fn default() -> Self {
        Self {
            tol: T::default_solver_tol(),
            max_iter: 1000,
            min_damping: T::lit(2f64.powi(-30)),
            jacobian: JacobianMode::FiniteDifference,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RootSettings<T> {
    /// Tolerance on `|g(γ)|`.
    pub tol: T,
    pub max_iter: usize,
    /// Search interval `[γ_lo, γ_hi]`, which must contain 1.
    pub bracket: (T, T),
    /// Roots at or below this value are treated as the trivial root `γ = 0`.
    pub gamma_min: T,
}

impl<T: Scalar> Default for RootSettings<T> {
    fn default() -> Self {
        Self {
            tol: T::default_solver_tol(),
            max_iter: 100,
            bracket: (T::lit(0.5), T::lit(1.5)),
            gamma_min: T::lit(0.1),
        }
    }
}

impl<T: Scalar> RootSettings<T> {
    pub fn validate(&self) -> Result<(), String> {
        let (lo, hi) = self.bracket;
        if !(lo < T::one() && T::one() < hi) {
            return Err("bracket must contain 1 in its interior".into());
        }
        if !(self.gamma_min < lo) {
            return Err("gamma_min must lie below the bracket".into());
        }
        if !(self.tol > T::zero()) || self.max_iter == 0 {
            return Err("tolerance and iteration limit must be positive".into());
        }
        Ok(())
    }
}
