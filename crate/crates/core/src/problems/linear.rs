use super::{check_derivative, Ivp, ProblemError};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Scalar linear test equation `w' = λw`, whose tower is `F_d(w) = λ^d w`.
///
/// Its η is `w²`, which is only conserved for `λ = 0`; the problem is meant
/// for order and stability checks, not for relaxation.
#[derive(Clone, Copy, Debug)]
pub struct Linear {
    pub lambda: f64,
    pub w0: f64,
}

impl Linear {
    pub fn new(lambda: f64) -> Self {
        Self { lambda, w0: 1.0 }
    }

    pub fn exact<T: Scalar>(&self, t: T) -> T {
        T::lit(self.w0) * (T::lit(self.lambda) * t).exp()
    }
}

const MAX_DERIVATIVE: usize = 12;

impl<T: Scalar> Ivp<T> for Linear {
    fn name(&self) -> &str {
        "linear"
    }

    fn dim(&self) -> usize {
        1
    }

    fn initial_state(&self) -> Vec<T> {
        vec![T::lit(self.w0)]
    }

    fn max_derivative(&self) -> usize {
        MAX_DERIVATIVE
    }

    fn tower(&self, d: usize, w: &[T]) -> Result<Vec<T>, ProblemError> {
        check_derivative(d, MAX_DERIVATIVE)?;
        Ok(vec![T::lit(self.lambda).powi(d as i32) * w[0]])
    }

    fn tower_jacobian(&self, d: usize, _w: &[T]) -> Option<Result<Matrix<T>, ProblemError>> {
        Some(
            check_derivative(d, MAX_DERIVATIVE)
                .map(|_| Matrix::from_row_major(1, 1, vec![T::lit(self.lambda).powi(d as i32)])),
        )
    }

    fn eta(&self, w: &[T]) -> T {
        w[0] * w[0]
    }

    fn eta_grad(&self, w: &[T]) -> Vec<T> {
        vec![w[0] + w[0]]
    }
}
