use super::{check_config, HbpcConfig, StepError};
use crate::problems::{Ivp, ProblemError};
use crate::scalar::{axpy, Scalar};
use crate::solvers::{damped_newton, NewtonSettings};
use crate::tableau::MdTableau;

/// One step of the fully implicit multiderivative Runge-Kutta scheme
///
/// ```text
/// W_l = wⁿ + Σ_d Δt^d Σ_j B^{(d)}_{lj} F_d(W_j),   w^{n+1} = wⁿ + Σ_d Δt^d Σ_j b^{(d)}_j F_d(W_j)
/// ```
///
/// solved as one stacked `s·dim` system by damped Newton with a
/// finite-difference Jacobian. HBPC iterates converge to these stages, so
/// this serves as the fixed-point oracle and as a reference generator.
pub fn background_rk_step<T: Scalar, P: Ivp<T> + ?Sized>(
    ivp: &P,
    w_n: &[T],
    dt: T,
    tableau: &MdTableau<T>,
    newton: &NewtonSettings<T>,
) -> Result<Vec<T>, StepError> {
    let mut w = background_rk_increment(ivp, w_n, dt, tableau, newton)?;
    for (wi, &a) in w.iter_mut().zip(w_n) {
        *wi = *wi + a;
    }
    Ok(w)
}

/// The increment `w^{n+1} − wⁿ` of [`background_rk_step`].
///
/// The Newton unknowns are the stage increments `W_l − wⁿ`, which are
/// `O(Δt)`; callers that accumulate many small steps can add the increment
/// with compensated summation.
pub fn background_rk_increment<T: Scalar, P: Ivp<T> + ?Sized>(
    ivp: &P,
    w_n: &[T],
    dt: T,
    tableau: &MdTableau<T>,
    newton: &NewtonSettings<T>,
) -> Result<Vec<T>, StepError> {
    check_config(ivp, &HbpcConfig::new(tableau.clone(), 0))?;
    let dim = w_n.len();
    let s = tableau.stages();
    let m = tableau.derivatives();
    let dt_pows: Vec<T> = (1..=m).map(|d| dt.powi(d as i32)).collect();

    let towers_of = |stacked: &[T]| -> Result<Vec<Vec<Vec<T>>>, ProblemError> {
        stacked
            .chunks_exact(dim)
            .map(|z| {
                let w: Vec<T> = z.iter().zip(w_n).map(|(&a, &b)| a + b).collect();
                (1..=m).map(|d| ivp.tower(d, &w)).collect()
            })
            .collect()
    };
    let residual = |stacked: &[T]| -> Result<Vec<T>, ProblemError> {
        let towers = towers_of(stacked)?;
        let mut r = Vec::with_capacity(s * dim);
        for (l, z_l) in stacked.chunks_exact(dim).enumerate() {
            let mut r_l = z_l.to_vec();
            for d in 1..=m {
                for (j, &coeff) in tableau.row(d, l).iter().enumerate() {
                    if coeff != T::zero() {
                        axpy(-dt_pows[d - 1] * coeff, &towers[j][d - 1], &mut r_l);
                    }
                }
            }
            r.extend(r_l);
        }
        Ok(r)
    };

    let guess = vec![T::zero(); s * dim];
    let stages = damped_newton(residual, &guess, newton)
        .map_err(StepError::BackgroundSolveFailed)?
        .solution;
    let towers = towers_of(&stages)?;
    let mut dw = vec![T::zero(); dim];
    for d in 1..=m {
        for (j, &weight) in tableau.weights(d).iter().enumerate() {
            axpy(dt_pows[d - 1] * weight, &towers[j][d - 1], &mut dw);
        }
    }
    Ok(dw)
}
