use super::{check_derivative, Ivp, ProblemError};
use crate::scalar::Scalar;

/// Which conserved quantity drives relaxation for [`Kepler`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum KeplerFunctional {
    /// `w₁w₄ − w₂w₃`
    #[default]
    AngularMomentum,
    /// `½(w₃² + w₄²) − (w₁² + w₂²)^{-1/2}`
    Hamiltonian,
}

/// Planar Kepler problem with state `(x₁, x₂, v₁, v₂)` and
/// `w(0) = (1/2, 0, 0, √(1/3))`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Kepler {
    pub functional: KeplerFunctional,
}

impl Kepler {
    pub fn with_functional(functional: KeplerFunctional) -> Self {
        Self { functional }
    }

    pub fn angular_momentum<T: Scalar>(w: &[T]) -> T {
        w[0] * w[3] - w[1] * w[2]
    }

    pub fn hamiltonian<T: Scalar>(w: &[T]) -> T {
        let half = T::lit(0.5);
        half * (w[2] * w[2] + w[3] * w[3]) - (w[0] * w[0] + w[1] * w[1]).sqrt().recip()
    }
}

/// Position, velocity, their inner products and inverse powers of `r`.
struct Kinematics<T> {
    x: [T; 2],
    v: [T; 2],
    inv_r3: T,
    inv_r5: T,
    inv_r7: T,
    /// `x·v`
    rho: T,
}

impl<T: Scalar> Kinematics<T> {
    fn new(w: &[T]) -> Result<Self, ProblemError> {
        let r2 = w[0] * w[0] + w[1] * w[1];
        if r2 == T::zero() {
            return Err(ProblemError::SingularState);
        }
        let inv_r = r2.sqrt().recip();
        let inv_r2 = inv_r * inv_r;
        let inv_r3 = inv_r2 * inv_r;
        Ok(Self {
            x: [w[0], w[1]],
            v: [w[2], w[3]],
            inv_r3,
            inv_r5: inv_r3 * inv_r2,
            inv_r7: inv_r3 * inv_r2 * inv_r2,
            rho: w[0] * w[2] + w[1] * w[3],
        })
    }

    /// `ẍ = -x/r³`
    fn accel(&self) -> [T; 2] {
        [-self.x[0] * self.inv_r3, -self.x[1] * self.inv_r3]
    }

    /// `x⃛ = -v/r³ + 3ρx/r⁵`
    fn jerk(&self) -> [T; 2] {
        let c = T::lit(3.0) * self.rho * self.inv_r5;
        [
            -self.v[0] * self.inv_r3 + c * self.x[0],
            -self.v[1] * self.inv_r3 + c * self.x[1],
        ]
    }

    /// `x⁗ = -a/r³ + 6ρv/r⁵ + 3ρ̇x/r⁵ - 15ρ²x/r⁷` with `ρ̇ = |v|² + x·a`.
    fn snap(&self) -> [T; 2] {
        let a = self.accel();
        let rho_dot = self.v[0] * self.v[0]
            + self.v[1] * self.v[1]
            + self.x[0] * a[0]
            + self.x[1] * a[1];
        let cv = T::lit(6.0) * self.rho * self.inv_r5;
        let cx = T::lit(3.0) * rho_dot * self.inv_r5 - T::lit(15.0) * self.rho * self.rho * self.inv_r7;
        [
            -a[0] * self.inv_r3 + cv * self.v[0] + cx * self.x[0],
            -a[1] * self.inv_r3 + cv * self.v[1] + cx * self.x[1],
        ]
    }
}

impl<T: Scalar> Ivp<T> for Kepler {
    fn name(&self) -> &str {
        "kepler"
    }

    fn dim(&self) -> usize {
        4
    }

    fn initial_state(&self) -> Vec<T> {
        vec![T::lit(0.5), T::zero(), T::zero(), T::lit(3.0).recip().sqrt()]
    }

    fn max_derivative(&self) -> usize {
        3
    }

    fn tower(&self, d: usize, w: &[T]) -> Result<Vec<T>, ProblemError> {
        check_derivative(d, 3)?;
        let k = Kinematics::new(w)?;
        let (upper, lower) = match d {
            1 => (k.v, k.accel()),
            2 => (k.accel(), k.jerk()),
            _ => (k.jerk(), k.snap()),
        };
        Ok(vec![upper[0], upper[1], lower[0], lower[1]])
    }

    fn eta(&self, w: &[T]) -> T {
        match self.functional {
            KeplerFunctional::AngularMomentum => Self::angular_momentum(w),
            KeplerFunctional::Hamiltonian => Self::hamiltonian(w),
        }
    }

    fn eta_grad(&self, w: &[T]) -> Vec<T> {
        match self.functional {
            KeplerFunctional::AngularMomentum => vec![w[3], -w[2], -w[1], w[0]],
            KeplerFunctional::Hamiltonian => {
                let r2 = w[0] * w[0] + w[1] * w[1];
                let inv_r3 = (r2 * r2 * r2).sqrt().recip();
                vec![w[0] * inv_r3, w[1] * inv_r3, w[2], w[3]]
            }
        }
    }
}
