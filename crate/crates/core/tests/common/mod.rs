#![allow(dead_code)]

use mdrelax::problems::fd_directional;
use mdrelax::scalar::{dot, norm};
use mdrelax::{Ivp, Kepler, KeplerFunctional, Oscillator};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STATES_PER_PROBLEM: usize = 20;
pub const TOWER_TOL: f64 = 1e-5;
pub const STATIONARITY_TOL: f64 = 1e-12;
const FD_STEP: f64 = 1e-6;

/// Random states with `‖w‖ ∈ [0.5, 2]`, rejecting those with `w₁² + w₂² < min_q2`.
pub fn random_states(dim: usize, min_q2: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(STATES_PER_PROBLEM);
    while out.len() < STATES_PER_PROBLEM {
        let dir: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = norm(&dir);
        if n < 1e-3 {
            continue;
        }
        let r = rng.gen_range(0.5..2.0);
        let w: Vec<f64> = dir.iter().map(|x| x * r / n).collect();
        if w[0] * w[0] + w[1] * w[1] >= min_q2 {
            out.push(w);
        }
    }
    out
}

/// Worst ratio `defect / tolerance` over all tower and stationarity checks;
/// the suite passes when it is at most 1.
pub fn check_problem(ivp: &dyn Ivp<f64>, states: &[Vec<f64>]) -> Result<f64, String> {
    let mut worst: f64 = 0.0;
    for w in states {
        let phi = ivp.rhs(w).map_err(|e| e.to_string())?;
        for d in 1..=2.min(ivp.max_derivative() - 1) {
            let next = ivp.tower(d + 1, w).map_err(|e| e.to_string())?;
            let fd = fd_directional(|x| ivp.tower(d, x), w, &phi, FD_STEP).map_err(|e| e.to_string())?;
            let defect = next.iter().zip(&fd).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let tol = TOWER_TOL * (1.0 + norm(&next));
            if defect > tol {
                return Err(format!("{}: F_{} defect {defect:.3e} > {tol:.3e} at {w:?}", ivp.name(), d + 1));
            }
            worst = worst.max(defect / tol);
        }
        let stationarity = dot(&ivp.eta_grad(w), &phi).abs();
        let tol = STATIONARITY_TOL * (1.0 + dot(w, w));
        if stationarity > tol {
            return Err(format!("{}: ∇η·Φ = {stationarity:.3e} > {tol:.3e} at {w:?}", ivp.name()));
        }
        worst = worst.max(stationarity / tol);
    }
    Ok(worst)
}

/// Full property suite over the oscillator and both Kepler functionals.
pub fn tower_suite() -> Result<f64, String> {
    let osc = check_problem(&Oscillator, &random_states(2, 0.0, 11))?;
    let kepler_states = random_states(4, 0.1, 12);
    let l = check_problem(&Kepler::default(), &kepler_states)?;
    let h = check_problem(&Kepler::with_functional(KeplerFunctional::Hamiltonian), &kepler_states)?;
    Ok(osc.max(l).max(h))
}
