//! Multiderivative time integration with the Hermite-Birkhoff
//! predictor-corrector (HBPC) scheme and functional-preserving relaxation.
//!
//! The building blocks are
//!
//! * [`tableau`]: multiderivative Runge-Kutta tableaux generated exactly from
//!   Hermite-Birkhoff quadrature, including the built-in schemes;
//! * [`problems`]: autonomous IVPs with hand-coded derivative towers and a
//!   conserved functional, plus reference solutions;
//! * [`solvers`]: damped Newton and the safeguarded relaxation root finder;
//! * [`hbpc`]: predict / correct / update and the background implicit scheme;
//! * [`relaxation`]: the relaxed time loop on a non-uniform time grid;
//! * [`harness`]: growth, convergence and γ-trace experiments with CSV output.
//!
//! The numerics are generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix double precision, which is what the experiments use.
//!
//! ```
//! use mdrelax::{builtin, integrate, HbpcConfig, IntegrateOptions, Oscillator};
//!
//! let cfg = HbpcConfig::<f64>::new(builtin("HB-I2DRK6-3s").unwrap(), 4);
//! let run = integrate(&Oscillator, &cfg, 0.2, 2.0, &IntegrateOptions::relaxed()).unwrap();
//! let last = run.records.last().unwrap();
//! assert!((last.eta - 1.0).abs() < 1e-12);
//! ```

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::result_large_err)]

pub mod harness;
pub mod hbpc;
pub mod linalg;
pub mod problems;
pub mod relaxation;
pub mod scalar;
pub mod solvers;
pub mod tableau;

pub use hbpc::{
    background_rk_step, correct, hbpc_step, predict, quadrature, update, CorrectorScaling,
    HbpcConfig, QuadratureSource, StageBlock, StepError, StepFailed, StepOutput,
};
pub use problems::{oscillator_exact, Ivp, Kepler, KeplerFunctional, Linear, Oscillator, ProblemError};
pub use relaxation::{
    integrate, relax, IntegrateOptions, IntegrationError, IntegrationFailure, RelaxedStep, RunRecord,
    Trajectory,
};
pub use scalar::Scalar;
pub use solvers::{damped_newton, solve_gamma, JacobianMode, NewtonSettings, RootSettings, SolverError};
pub use tableau::{builtin, hermite_birkhoff_tableau, verify_quadrature_order, MdTableau, TableauError};

/// Double-precision tableau.
pub type Tableau = MdTableau<f64>;
/// Single-precision tableau.
pub type Tableau32 = MdTableau<f32>;
pub type Config = HbpcConfig<f64>;
pub type Config32 = HbpcConfig<f32>;
pub type Record = RunRecord<f64>;
pub type Run = Trajectory<f64>;
