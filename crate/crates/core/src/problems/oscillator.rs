use super::{check_derivative, Ivp, ProblemError};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Nonlinear oscillator `Φ(w) = (-w₂, w₁)/‖w‖²` with `w(0) = (1, 0)` and the
/// conserved functional `η(w) = ‖w‖²`.
///
/// Since `Φ(w) ⟂ w` the radius is constant along the flow, which makes the
/// whole tower closed-form: `F_d(w) = R^d w / ‖w‖^{2d}` with `R` the rotation
/// by a right angle.
#[derive(Clone, Copy, Debug, Default)]
pub struct Oscillator;

/// Highest tower entry offered; the closed form has no intrinsic limit.
const MAX_DERIVATIVE: usize = 12;

/// `R^d w` where `R(a, b) = (-b, a)`.
fn rotate<T: Scalar>(d: usize, w: &[T]) -> [T; 2] {
    match d % 4 {
        0 => [w[0], w[1]],
        1 => [-w[1], w[0]],
        2 => [-w[0], -w[1]],
        _ => [w[1], -w[0]],
    }
}

fn radius_sq<T: Scalar>(w: &[T]) -> Result<T, ProblemError> {
    let r2 = w[0] * w[0] + w[1] * w[1];
    if r2 == T::zero() {
        Err(ProblemError::SingularState)
    } else {
        Ok(r2)
    }
}

/// Exact solution from `w(0) = (1, 0)`: `(cos t, sin t)`.
pub fn oscillator_exact<T: Scalar>(t: T) -> Vec<T> {
    vec![t.cos(), t.sin()]
}

impl<T: Scalar> Ivp<T> for Oscillator {
    fn name(&self) -> &str {
        "oscillator"
    }

    fn dim(&self) -> usize {
        2
    }

    fn initial_state(&self) -> Vec<T> {
        vec![T::one(), T::zero()]
    }

    fn max_derivative(&self) -> usize {
        MAX_DERIVATIVE
    }

    fn tower(&self, d: usize, w: &[T]) -> Result<Vec<T>, ProblemError> {
        check_derivative(d, MAX_DERIVATIVE)?;
        let scale = radius_sq(w)?.powi(-(d as i32));
        Ok(rotate(d, w).iter().map(|&x| x * scale).collect())
    }

    /// `J_{F_d} = R^d / r^{2d} - 2d (R^d w) wᵀ / r^{2d+2}`
    fn tower_jacobian(&self, d: usize, w: &[T]) -> Option<Result<Matrix<T>, ProblemError>> {
        Some((|| {
            check_derivative(d, MAX_DERIVATIVE)?;
            let r2 = radius_sq(w)?;
            let scale = r2.powi(-(d as i32));
            let col0 = rotate(d, &[T::one(), T::zero()]);
            let col1 = rotate(d, &[T::zero(), T::one()]);
            let rw = rotate(d, w);
            let k = T::lit(2.0 * d as f64) * scale / r2;
            let mut jac = Matrix::zeros(2, 2);
            for r in 0..2 {
                jac[(r, 0)] = col0[r] * scale - k * rw[r] * w[0];
                jac[(r, 1)] = col1[r] * scale - k * rw[r] * w[1];
            }
            Ok(jac)
        })())
    }

    fn eta(&self, w: &[T]) -> T {
        w[0] * w[0] + w[1] * w[1]
    }

    fn eta_grad(&self, w: &[T]) -> Vec<T> {
        vec![w[0] + w[0], w[1] + w[1]]
    }
}
