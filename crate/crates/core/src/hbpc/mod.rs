//! Hermite-Birkhoff predictor-corrector (HBPC) stepping.
//!
//! One step from `wⁿ` runs an implicit Taylor predictor on every stage, then
//! `kmax` correction sweeps that iterate towards the fully implicit background
//! multiderivative Runge-Kutta scheme of the tableau, and finally an explicit
//! update. The resulting order is `min(kmax + m, q)`.

mod background;

pub use background::{background_rk_increment, background_rk_step};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Matrix;
use crate::problems::{Ivp, ProblemError};
use crate::scalar::{axpy, factorial, Scalar};
use crate::solvers::{
    damped_newton, damped_newton_with_jacobian, JacobianMode, NewtonOutcome, NewtonSettings,
    SolverError,
};
use crate::tableau::MdTableau;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum StepError {
    #[error("predictor failed on stage {stage}: {source}")]
    PredictorFailed { stage: usize, source: SolverError },
    #[error("corrector failed on stage {stage}, iterate {k}: {source}")]
    CorrectorFailed {
        stage: usize,
        k: usize,
        source: SolverError,
    },
    #[error("background Runge-Kutta solve failed: {0}")]
    BackgroundSolveFailed(SolverError),
    #[error("tableau needs {needed} derivatives but the problem provides {available}")]
    InsufficientDerivatives { needed: usize, available: usize },
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

/// Step size entering the Taylor difference terms of the corrector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorrectorScaling {
    /// `Δt^d` on every stage.
    #[default]
    Global,
    /// `(c_l Δt)^d`, matching the predictor.
    PerStage,
}

/// Which iterate feeds the quadrature of a correction sweep.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureSource {
    /// Only iterate `k`; stages decouple.
    #[default]
    IterateK,
    /// Stages already corrected within the current sweep are used as soon as
    /// they are available (Gauss-Seidel order).
    SerialSweep,
}

#[derive(Clone, Debug)]
pub struct HbpcConfig<T> {
    pub tableau: MdTableau<T>,
    pub kmax: usize,
    pub corrector_scaling: CorrectorScaling,
    pub quadrature_source: QuadratureSource,
    pub newton: NewtonSettings<T>,
}

impl<T: Scalar> HbpcConfig<T> {
    pub fn new(tableau: MdTableau<T>, kmax: usize) -> Self {
        Self {
            tableau,
            kmax,
            corrector_scaling: CorrectorScaling::default(),
            quadrature_source: QuadratureSource::default(),
            newton: NewtonSettings::default(),
        }
    }

    pub fn with_corrector_scaling(mut self, scaling: CorrectorScaling) -> Self {
        self.corrector_scaling = scaling;
        self
    }

    pub fn with_quadrature_source(mut self, source: QuadratureSource) -> Self {
        self.quadrature_source = source;
        self
    }

    pub fn with_newton(mut self, newton: NewtonSettings<T>) -> Self {
        self.newton = newton;
        self
    }

    /// `min(kmax + m, q)`
    pub fn expected_order(&self) -> usize {
        (self.kmax + self.tableau.derivatives()).min(self.tableau.order())
    }
}

/// Stage values of one iterate together with their tower evaluations.
#[derive(Clone, Debug, PartialEq)]
pub struct StageBlock<T> {
    pub k: usize,
    pub stages: Vec<Vec<T>>,
    /// `towers[l][d-1] = F_d(stages[l])`
    pub towers: Vec<Vec<Vec<T>>>,
}

impl<T: Scalar> StageBlock<T> {
    pub fn evaluate<P: Ivp<T> + ?Sized>(
        ivp: &P,
        k: usize,
        stages: Vec<Vec<T>>,
        m: usize,
    ) -> Result<Self, ProblemError> {
        let towers = stages
            .iter()
            .map(|w| eval_towers(ivp, w, m))
            .collect::<Result<_, _>>()?;
        Ok(Self { k, stages, towers })
    }

    pub fn tower(&self, d: usize, l: usize) -> &[T] {
        &self.towers[l][d - 1]
    }
}

fn eval_towers<T: Scalar, P: Ivp<T> + ?Sized>(
    ivp: &P,
    w: &[T],
    m: usize,
) -> Result<Vec<Vec<T>>, ProblemError> {
    (1..=m).map(|d| ivp.tower(d, w)).collect()
}

/// Per-phase Newton iteration totals of one step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepDiagnostics {
    pub predictor_iterations: usize,
    pub corrector_iterations: usize,
}

impl StepDiagnostics {
    pub fn total(&self) -> usize {
        self.predictor_iterations + self.corrector_iterations
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutput<T> {
    pub w_next: Vec<T>,
    pub diagnostics: StepDiagnostics,
}

/// Failure of a whole step, annotated with the step's start time.
#[derive(Clone, Debug, PartialEq, Error)]
#[error("step from t = {t} failed: {source}")]
pub struct StepFailed {
    pub t: f64,
    pub source: StepError,
}

/// `(-1)^{d-1} θ^d / d!` for `d = 1..=m`.
fn taylor_coefficients<T: Scalar>(theta: T, m: usize) -> Vec<T> {
    (1..=m)
        .map(|d| {
            let sign = if d % 2 == 1 { T::one() } else { -T::one() };
            sign * theta.powi(d as i32) / factorial::<T>(d)
        })
        .collect()
}

/// Solves `w = base + Σ_d alpha[d-1] F_d(w)` by damped Newton from `guess`.
fn solve_stage<T: Scalar, P: Ivp<T> + ?Sized>(
    ivp: &P,
    base: &[T],
    alpha: &[T],
    guess: &[T],
    newton: &NewtonSettings<T>,
) -> Result<NewtonOutcome<T>, SolverError> {
    let residual = |w: &[T]| -> Result<Vec<T>, ProblemError> {
        let mut r: Vec<T> = w.iter().zip(base).map(|(&x, &b)| x - b).collect();
        for (d, &a) in alpha.iter().enumerate() {
            axpy(-a, &ivp.tower(d + 1, w)?, &mut r);
        }
        Ok(r)
    };
    let analytic = newton.jacobian == JacobianMode::Analytic
        && ivp.tower_jacobian(1, guess).is_some();
    if analytic {
        let jacobian = |w: &[T], _r: &[T]| -> Result<Matrix<T>, ProblemError> {
            let mut jac = Matrix::identity(w.len());
            for (d, &a) in alpha.iter().enumerate() {
                let jd = ivp
                    .tower_jacobian(d + 1, w)
                    .expect("analytic Jacobian availability checked")?;
                jac.add_scaled(-a, &jd);
            }
            Ok(jac)
        };
        damped_newton_with_jacobian(residual, jacobian, guess, newton)
    } else {
        damped_newton(residual, guess, newton)
    }
}

fn check_config<T: Scalar, P: Ivp<T> + ?Sized>(ivp: &P, cfg: &HbpcConfig<T>) -> Result<(), StepError> {
    let needed = cfg.tableau.derivatives();
    if ivp.max_derivative() < needed {
        return Err(StepError::InsufficientDerivatives {
            needed,
            available: ivp.max_derivative(),
        });
    }
    Ok(())
}

/// Implicit Taylor predictor: every stage solves
/// `w = wⁿ + Σ_d (-1)^{d-1} (c_l Δt)^d / d! F_d(w)` independently.
///
/// Returns the `k = 0` block and the Newton iteration total.
pub fn predict<T: Scalar, P: Ivp<T> + ?Sized>(
    ivp: &P,
    w_n: &[T],
    dt: T,
    cfg: &HbpcConfig<T>,
) -> Result<(StageBlock<T>, usize), StepError> {
    check_config(ivp, cfg)?;
    let m = cfg.tableau.derivatives();
    let mut iterations = 0;
    let mut stages = Vec::with_capacity(cfg.tableau.stages());
    for (l, &c) in cfg.tableau.nodes().iter().enumerate() {
        if c == T::zero() {
            stages.push(w_n.to_vec());
            continue;
        }
        let alpha = taylor_coefficients(c * dt, m);
        let out = solve_stage(ivp, w_n, &alpha, w_n, &cfg.newton)
            .map_err(|source| StepError::PredictorFailed { stage: l, source })?;
        iterations += out.iterations;
        stages.push(out.solution);
    }
    Ok((StageBlock::evaluate(ivp, 0, stages, m)?, iterations))
}

/// `I_l = Σ_d Δt^d Σ_j B^{(d)}_{lj} F_d(w^{[k],j})`
pub fn quadrature<T: Scalar>(block: &StageBlock<T>, dt: T, tableau: &MdTableau<T>, l: usize) -> Vec<T> {
    quadrature_from(|d, j| block.tower(d, j), dt, tableau, l)
}

fn quadrature_from<'a, T: Scalar>(
    tower: impl Fn(usize, usize) -> &'a [T],
    dt: T,
    tableau: &MdTableau<T>,
    l: usize,
) -> Vec<T> {
    let dim = tower(1, 0).len();
    let mut sum = vec![T::zero(); dim];
    let mut dt_pow = T::one();
    for d in 1..=tableau.derivatives() {
        dt_pow = dt_pow * dt;
        for (j, &coeff) in tableau.row(d, l).iter().enumerate() {
            if coeff != T::zero() {
                axpy(dt_pow * coeff, tower(d, j), &mut sum);
            }
        }
    }
    sum
}

/// `b`-weighted quadrature `Σ_d Δt^d Σ_j b^{(d)}_j F_d(w^{[k],j})`.
fn update_quadrature<T: Scalar>(block: &StageBlock<T>, dt: T, tableau: &MdTableau<T>) -> Vec<T> {
    let dim = block.stages[0].len();
    let mut sum = vec![T::zero(); dim];
    let mut dt_pow = T::one();
    for d in 1..=tableau.derivatives() {
        dt_pow = dt_pow * dt;
        for (j, &weight) in tableau.weights(d).iter().enumerate() {
            axpy(dt_pow * weight, block.tower(d, j), &mut sum);
        }
    }
    sum
}

fn corrector_theta<T: Scalar>(cfg: &HbpcConfig<T>, dt: T, l: usize) -> T {
    match cfg.corrector_scaling {
        CorrectorScaling::Global => dt,
        CorrectorScaling::PerStage => cfg.tableau.nodes()[l] * dt,
    }
}

/// One correction sweep: every stage solves
/// `w = wⁿ + Σ_d (-1)^{d-1} θ^d/d! (F_d(w) − F_d(w^{[k],l})) + I_l`,
/// warm-started from `w^{[k],l}`.
///
/// Returns the `k + 1` block and the Newton iteration total.
pub fn correct<T: Scalar, P: Ivp<T> + ?Sized>(
    ivp: &P,
    w_n: &[T],
    dt: T,
    cfg: &HbpcConfig<T>,
    block_k: &StageBlock<T>,
) -> Result<(StageBlock<T>, usize), StepError> {
    check_config(ivp, cfg)?;
    let tableau = &cfg.tableau;
    let m = tableau.derivatives();
    let s = tableau.stages();
    let k = block_k.k;
    let mut iterations = 0;
    let mut stages: Vec<Vec<T>> = Vec::with_capacity(s);
    let mut towers: Vec<Vec<Vec<T>>> = Vec::with_capacity(s);

    for l in 0..s {
        let integral = match cfg.quadrature_source {
            QuadratureSource::IterateK => quadrature(block_k, dt, tableau, l),
            QuadratureSource::SerialSweep => quadrature_from(
                |d, j| {
                    if j < l {
                        &towers[j][d - 1]
                    } else {
                        block_k.tower(d, j)
                    }
                },
                dt,
                tableau,
                l,
            ),
        };
        let alpha = taylor_coefficients(corrector_theta(cfg, dt, l), m);
        let mut base: Vec<T> = w_n.iter().zip(&integral).map(|(&a, &b)| a + b).collect();
        for (d, &a) in alpha.iter().enumerate() {
            axpy(-a, block_k.tower(d + 1, l), &mut base);
        }
        let out = solve_stage(ivp, &base, &alpha, &block_k.stages[l], &cfg.newton)
            .map_err(|source| StepError::CorrectorFailed { stage: l, k, source })?;
        iterations += out.iterations;
        towers.push(eval_towers(ivp, &out.solution, m)?);
        stages.push(out.solution);
    }
    Ok((
        StageBlock {
            k: k + 1,
            stages,
            towers,
        },
        iterations,
    ))
}

/// Explicit update from the last two iterates.
///
/// Stiffly accurate tableaux return the last stage of `block_last`. Otherwise
/// the free stage index of the update formula is fixed to the last stage:
/// `wⁿ + Σ_d (-1)^{d-1} θ^d/d! (F_d(w^{[K],s}) − F_d(w^{[K-1],s})) + Σ_d Δt^d Σ_j b^{(d)}_j F_d(w^{[K-1],j})`.
/// Without a previous iterate (`kmax = 0`) the difference term is dropped and
/// the weights act on the predictor block.
pub fn update<T: Scalar>(
    w_n: &[T],
    dt: T,
    cfg: &HbpcConfig<T>,
    block_last: &StageBlock<T>,
    block_prev: Option<&StageBlock<T>>,
) -> Vec<T> {
    let tableau = &cfg.tableau;
    let s = tableau.stages();
    if tableau.stiffly_accurate() {
        return block_last.stages[s - 1].clone();
    }
    let Some(prev) = block_prev else {
        let mut w = w_n.to_vec();
        axpy(T::one(), &update_quadrature(block_last, dt, tableau), &mut w);
        return w;
    };
    let mut w = w_n.to_vec();
    axpy(T::one(), &update_quadrature(prev, dt, tableau), &mut w);
    let alpha = taylor_coefficients(corrector_theta(cfg, dt, s - 1), tableau.derivatives());
    for (d, &a) in alpha.iter().enumerate() {
        axpy(a, block_last.tower(d + 1, s - 1), &mut w);
        axpy(-a, prev.tower(d + 1, s - 1), &mut w);
    }
    w
}

/// One full HBPC step: predict, `kmax` corrections, update.
pub fn hbpc_step<T: Scalar, P: Ivp<T> + ?Sized>(
    ivp: &P,
    w_n: &[T],
    t_n: T,
    dt: T,
    cfg: &HbpcConfig<T>,
) -> Result<StepOutput<T>, StepFailed> {
    let annotate = |source| StepFailed {
        t: t_n.as_f64(),
        source,
    };
    let (mut last, predictor_iterations) = predict(ivp, w_n, dt, cfg).map_err(annotate)?;
    let mut prev = None;
    let mut corrector_iterations = 0;
    for _ in 0..cfg.kmax {
        let (next, iters) = correct(ivp, w_n, dt, cfg, &last).map_err(annotate)?;
        corrector_iterations += iters;
        prev = Some(std::mem::replace(&mut last, next));
    }
    Ok(StepOutput {
        w_next: update(w_n, dt, cfg, &last, prev.as_ref()),
        diagnostics: StepDiagnostics {
            predictor_iterations,
            corrector_iterations,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{oscillator_exact, Linear, Oscillator};
    use crate::scalar::distance;
    use crate::tableau::builtin;

    fn cfg(name: &str, kmax: usize) -> HbpcConfig<f64> {
        HbpcConfig::new(builtin(name).unwrap(), kmax)
    }

    #[test]
    fn expected_orders() {
        assert_eq!(cfg("HB-I2DRK6-3s", 0).expected_order(), 2);
        assert_eq!(cfg("HB-I2DRK6-3s", 4).expected_order(), 6);
        assert_eq!(cfg("HB-I2DRK6-3s", 10).expected_order(), 6);
        assert_eq!(cfg("HB-I2DRK8-4s", 6).expected_order(), 8);
        assert_eq!(cfg("HB-I3DRK6-2s", 1).expected_order(), 4);
    }

    #[test]
    fn predictor_first_stage_is_start_value() {
        let w_n = vec![0.6, 0.8];
        let (block, _) = predict(&Oscillator, &w_n, 0.2, &cfg("HB-I2DRK6-3s", 2)).unwrap();
        assert_eq!(block.stages[0], w_n);
        assert_eq!(block.k, 0);
    }

    #[test]
    fn predictor_on_linear_problem_matches_closed_form() {
        // w(1 - z + z²/2) = wⁿ with z = λΔt, for the stage with c = 1.
        let lambda = -1.7;
        let dt = 0.3;
        let (block, _) = predict(&Linear::new(lambda), &[1.0], dt, &cfg("HB-I2DRK6-3s", 0)).unwrap();
        let z: f64 = lambda * dt;
        let closed = 1.0 / (1.0 - z + z * z / 2.0);
        assert!((block.stages[2][0] - closed).abs() < 1e-14);
        // Stage with c = 1/2.
        let z = z / 2.0;
        assert!((block.stages[1][0] - 1.0 / (1.0 - z + z * z / 2.0)).abs() < 1e-14);
    }

    #[test]
    fn predictor_stage_is_close_to_exact_flow() {
        let dt = 0.2;
        let c = cfg("HB-I2DRK6-3s", 0);
        let (block, _) = predict(&Oscillator, &[1.0, 0.0], dt, &c).unwrap();
        for (l, &node) in c.tableau.nodes().iter().enumerate() {
            let exact = oscillator_exact(node * dt);
            // Second-order implicit Taylor: local error O((c Δt)³).
            assert!(distance(&block.stages[l], &exact) <= (node * dt).powi(3), "stage {l}");
        }
    }

    #[test]
    fn quadrature_of_zero_row_and_constant_field() {
        let c = cfg("HB-I3DRK6-2s", 1);
        let (block, _) = predict(&Oscillator, &[1.0, 0.0], 0.1, &c).unwrap();
        assert_eq!(quadrature(&block, 0.1, &c.tableau, 0), vec![0.0, 0.0]);

        // Φ ≡ v: F_1 = v, higher towers vanish.
        let v = vec![0.25, -2.0];
        let block = StageBlock {
            k: 0,
            stages: vec![vec![0.0; 2]; 3],
            towers: vec![vec![v.clone(), vec![0.0; 2]]; 3],
        };
        let t = builtin::<f64>("HB-I2DRK6-3s").unwrap();
        for l in 0..3 {
            let q = quadrature(&block, 0.4, &t, l);
            for (qi, vi) in q.iter().zip(&v) {
                assert!((qi - t.nodes()[l] * 0.4 * vi).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn corrector_keeps_first_stage_fixed() {
        let c = cfg("HB-I2DRK8-4s", 3);
        let w_n = vec![1.0, 0.0];
        let (mut block, _) = predict(&Oscillator, &w_n, 0.3, &c).unwrap();
        for k in 1..=3 {
            block = correct(&Oscillator, &w_n, 0.3, &c, &block).unwrap().0;
            assert_eq!(block.k, k);
            assert_eq!(block.stages[0], w_n);
        }
    }

    #[test]
    fn update_without_correction_difference() {
        let c = cfg("HB-I2DRK6-3s", 1);
        let (block, _) = predict(&Oscillator, &[1.0, 0.0], 0.2, &c).unwrap();
        assert_eq!(update(&[1.0, 0.0], 0.2, &c, &block, Some(&block)), block.stages[2]);
    }

    #[test]
    fn one_step_close_to_exact() {
        let out = hbpc_step(&Oscillator, &[1.0, 0.0], 0.0, 0.2, &cfg("HB-I2DRK6-3s", 4)).unwrap();
        let err = distance(&out.w_next, &oscillator_exact(0.2));
        // Local error of an order-6 step is bounded by Δt⁷ here (observed ~8.6e-7).
        assert!(err <= 0.2f64.powi(7), "{err:e}");
        assert!(out.diagnostics.predictor_iterations > 0);
        assert!(out.diagnostics.corrector_iterations > 0);
    }

    #[test]
    fn analytic_and_fd_jacobians_agree() {
        let mut c = cfg("HB-I3DRK6-2s", 3);
        let fd = hbpc_step(&Oscillator, &[1.0, 0.0], 0.0, 0.3, &c).unwrap();
        c.newton.jacobian = JacobianMode::Analytic;
        let an = hbpc_step(&Oscillator, &[1.0, 0.0], 0.0, 0.3, &c).unwrap();
        assert!(distance(&fd.w_next, &an.w_next) < 1e-14);
    }

    #[test]
    fn missing_derivatives_are_reported() {
        let c = HbpcConfig::new(
            MdTableau::from_rational(
                crate::tableau::hermite_birkhoff_tableau(
                    &[crate::tableau::rational(0, 1), crate::tableau::rational(1, 1)],
                    4,
                )
                .unwrap(),
            ),
            1,
        );
        let kepler = crate::problems::Kepler::default();
        let w0: Vec<f64> = kepler.initial_state();
        let err = hbpc_step(&kepler, &w0, 0.0, 0.1, &c).unwrap_err();
        assert_eq!(
            err.source,
            StepError::InsufficientDerivatives {
                needed: 4,
                available: 3
            }
        );
    }
}
