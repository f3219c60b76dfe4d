//! Initial value problems `w' = Φ(w)` with their derivative towers and a
//! conserved functional.
//!
//! The tower of a problem is the sequence `F_1 = Φ`, `F_{d+1} = J_{F_d} Φ`, i.e.
//! `F_d(w(t)) = w^{(d)}(t)` along exact solutions.

mod kepler;
mod linear;
mod oscillator;
pub mod reference;

pub use kepler::{Kepler, KeplerFunctional};
pub use linear::Linear;
pub use oscillator::{oscillator_exact, Oscillator};

use thiserror::Error;

use crate::linalg::Matrix;
use crate::scalar::{norm, Scalar};

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ProblemError {
    #[error("right-hand side is singular at the requested state")]
    SingularState,
    #[error("derivative F_{requested} requested but the problem provides up to F_{available}")]
    DerivativeUnavailable { requested: usize, available: usize },
}

/// An autonomous initial value problem with a hand-coded derivative tower.
pub trait Ivp<T: Scalar>: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    fn initial_state(&self) -> Vec<T>;

    /// Highest `d` for which [`Ivp::tower`] is available.
    fn max_derivative(&self) -> usize;

    /// `F_d(w)` for `1 ≤ d ≤ max_derivative()`.
    fn tower(&self, d: usize, w: &[T]) -> Result<Vec<T>, ProblemError>;

    /// Analytic Jacobian of `F_d`, if the problem provides one.
    fn tower_jacobian(&self, _d: usize, _w: &[T]) -> Option<Result<Matrix<T>, ProblemError>> {
        None
    }

    /// The functional η conserved by the exact flow.
    fn eta(&self, w: &[T]) -> T;

    /// `∇η(w)`
    fn eta_grad(&self, w: &[T]) -> Vec<T>;

    /// `Φ(w)`
    fn rhs(&self, w: &[T]) -> Result<Vec<T>, ProblemError> {
        self.tower(1, w)
    }
}

pub(crate) fn check_derivative(d: usize, available: usize) -> Result<(), ProblemError> {
    if d == 0 || d > available {
        Err(ProblemError::DerivativeUnavailable {
            requested: d,
            available,
        })
    } else {
        Ok(())
    }
}

/// Default finite-difference step `√ε·(1+‖w‖)`.
pub fn default_fd_step<T: Scalar>(w: &[T]) -> T {
    T::epsilon().sqrt() * (T::one() + norm(w))
}

/// Central-difference Jacobian of `f` at `w`. Entry errors are `O(h²)`.
pub fn fd_jacobian<T, E, F>(mut f: F, w: &[T], h: Option<T>) -> Result<Matrix<T>, E>
where
    T: Scalar,
    F: FnMut(&[T]) -> Result<Vec<T>, E>,
{
    let h = h.unwrap_or_else(|| default_fd_step(w));
    let n = w.len();
    let mut probe = w.to_vec();
    let mut columns = Vec::with_capacity(n);
    for i in 0..n {
        // Divide by the representable step actually taken.
        let (up, down) = (w[i] + h, w[i] - h);
        probe[i] = up;
        let plus = f(&probe)?;
        probe[i] = down;
        let minus = f(&probe)?;
        probe[i] = w[i];
        let span = up - down;
        columns.push(
            plus.iter()
                .zip(&minus)
                .map(|(&p, &m)| (p - m) / span)
                .collect::<Vec<T>>(),
        );
    }
    let rows = columns.first().map_or(0, Vec::len);
    let mut jac = Matrix::zeros(rows, n);
    for (c, col) in columns.iter().enumerate() {
        for (r, &v) in col.iter().enumerate() {
            jac[(r, c)] = v;
        }
    }
    Ok(jac)
}

/// Central-difference directional derivative `(f(w+hv) - f(w-hv)) / 2h`.
pub fn fd_directional<T, E, F>(mut f: F, w: &[T], direction: &[T], h: T) -> Result<Vec<T>, E>
where
    T: Scalar,
    F: FnMut(&[T]) -> Result<Vec<T>, E>,
{
    let shifted = |sign: T| -> Vec<T> {
        w.iter()
            .zip(direction)
            .map(|(&x, &v)| x + sign * h * v)
            .collect()
    };
    let plus = f(&shifted(T::one()))?;
    let minus = f(&shifted(-T::one()))?;
    Ok(plus
        .iter()
        .zip(&minus)
        .map(|(&p, &m)| (p - m) / (h + h))
        .collect())
}
