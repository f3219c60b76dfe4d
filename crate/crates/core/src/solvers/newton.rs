use super::{NewtonSettings, SolverError};
use crate::linalg::Matrix;
use crate::problems::{fd_jacobian, ProblemError};
use crate::scalar::{norm, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonOutcome<T> {
    pub solution: Vec<T>,
    pub iterations: usize,
    pub residual_norm: T,
}

/// Damped Newton with a central-difference Jacobian of `residual`.
pub fn damped_newton<T, R>(
    mut residual: R,
    x0: &[T],
    settings: &NewtonSettings<T>,
) -> Result<NewtonOutcome<T>, SolverError>
where
    T: Scalar,
    R: FnMut(&[T]) -> Result<Vec<T>, ProblemError>,
{
    // The closure is needed twice per iteration, once for the Jacobian.
    let residual = std::cell::RefCell::new(&mut residual);
    damped_newton_with_jacobian(
        |x| (residual.borrow_mut())(x),
        |x, _r| fd_jacobian(|y: &[T]| (residual.borrow_mut())(y), x, None),
        x0,
        settings,
    )
}

/// Damped Newton with a caller-supplied Jacobian `jacobian(x, residual(x))`.
///
/// Each step `Δx` solves `J Δx = -r` by LU with partial pivoting; the largest
/// `λ ∈ {1, 1/2, 1/4, …}` that strictly reduces `‖r‖₂` is accepted. Residual
/// evaluation failures at trial points count as non-reduction.
pub fn damped_newton_with_jacobian<T, R, J>(
    mut residual: R,
    mut jacobian: J,
    x0: &[T],
    settings: &NewtonSettings<T>,
) -> Result<NewtonOutcome<T>, SolverError>
where
    T: Scalar,
    R: FnMut(&[T]) -> Result<Vec<T>, ProblemError>,
    J: FnMut(&[T], &[T]) -> Result<Matrix<T>, ProblemError>,
{
    let mut x = x0.to_vec();
    let mut r = residual(&x)?;
    let mut r_norm = norm(&r);
    let diverged = |iterations: usize, r_norm: T, x: &[T]| SolverError::NewtonDiverged {
        iterations,
        residual_norm: r_norm.as_f64(),
        last_iterate: x.iter().map(|v| v.as_f64()).collect(),
    };

    for iteration in 0..settings.max_iter {
        if r_norm <= settings.tol {
            return Ok(NewtonOutcome {
                solution: x,
                iterations: iteration,
                residual_norm: r_norm,
            });
        }
        if !r_norm.is_finite() {
            return Err(diverged(iteration, r_norm, &x));
        }
        let jac = jacobian(&x, &r)?;
        let neg_r: Vec<T> = r.iter().map(|&v| -v).collect();
        let step = jac
            .lu_solve(&neg_r)
            .ok_or(SolverError::SingularJacobian { iteration })?;

        let mut lambda = T::one();
        loop {
            let trial: Vec<T> = x.iter().zip(&step).map(|(&xi, &si)| xi + lambda * si).collect();
            if let Ok(trial_r) = residual(&trial) {
                let trial_norm = norm(&trial_r);
                if trial_norm < r_norm {
                    x = trial;
                    r = trial_r;
                    r_norm = trial_norm;
                    break;
                }
            }
            lambda = lambda * T::lit(0.5);
            if lambda < settings.min_damping {
                return Err(diverged(iteration + 1, r_norm, &x));
            }
        }
    }
    if r_norm <= settings.tol {
        Ok(NewtonOutcome {
            solution: x,
            iterations: settings.max_iter,
            residual_norm: r_norm,
        })
    } else {
        Err(diverged(settings.max_iter, r_norm, &x))
    }
}
