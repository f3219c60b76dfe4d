//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use mdrelax::harness::{growth_slope, halvings, loglog_slope, run_convergence, run_single, DtSpec, ProblemKind, RunSpec};
use mdrelax::problems::reference::kepler_reference;
use mdrelax::scalar::distance;
use mdrelax::tableau::{rational, verify_quadrature_order, BUILTIN_NAMES};
use mdrelax::{
    background_rk_step, builtin, hbpc_step, hermite_birkhoff_tableau, integrate, HbpcConfig, IntegrateOptions, Ivp,
    Kepler, NewtonSettings, Oscillator,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

/// Largest step of the Kepler convergence study. The orbit has eccentricity
/// 5/6, and for every configuration all six halvings from here complete.
/// Coarser steps lose the stage solutions near perihelion.
const KEPLER_FIRST_DT: f64 = 0.002;

fn spec(problem: ProblemKind, tableau: &str, kmax: usize, relaxed: bool, t_end: f64) -> RunSpec {
    RunSpec {
        problem,
        tableau: tableau.into(),
        kmax,
        relaxed,
        t_end,
        ..RunSpec::default()
    }
}

fn m_q(tableau: &str) -> (usize, usize) {
    let t = builtin::<f64>(tableau).unwrap();
    (t.derivatives(), t.order())
}

fn fitted(spec: &RunSpec) -> Result<f64, String> {
    let report = run_convergence(spec).map_err(|e| e.to_string())?;
    if let Some(f) = report.failures.first() {
        return Err(format!("dt={} failed: {}", f.dt, f.error));
    }
    report.fitted_order().map_err(|e| e.to_string())
}

fn ac1_tableau_reproduction() -> Outcome {
    let t = hermite_birkhoff_tableau(&[rational(0, 1), rational(1, 1)], 3).map_err(|e| e.to_string())?;
    let zero = rational(0, 1);
    let expected = [
        [rational(1, 2), rational(1, 2)],
        [rational(1, 10), rational(-1, 10)],
        [rational(1, 120), rational(1, 120)],
    ];
    for (d, row) in expected.iter().enumerate() {
        if t.coeffs[d][0] != [zero.clone(), zero.clone()] {
            return Err(format!("B^({}) row 1 = {:?}", d + 1, t.coeffs[d][0]));
        }
        if t.coeffs[d][1] != *row {
            return Err(format!("B^({}) row 2 = {:?}", d + 1, t.coeffs[d][1]));
        }
        if t.weights[d] != *row {
            return Err(format!("b^({}) = {:?}", d + 1, t.weights[d]));
        }
    }
    Ok("B^(2)_2 = (1/10, -1/10), B^(3)_2 = (1/120, 1/120)".into())
}

fn ac2_quadrature_orders() -> Outcome {
    let orders: Vec<usize> = BUILTIN_NAMES
        .iter()
        .map(|n| verify_quadrature_order(&builtin::<f64>(n).unwrap()))
        .collect();
    if orders == [6, 8, 6] {
        Ok(format!("{orders:?}"))
    } else {
        Err(format!("{orders:?}"))
    }
}

fn ac3_oscillator_orders() -> Outcome {
    let mut table = Vec::new();
    let mut bad = Vec::new();
    for name in BUILTIN_NAMES {
        let (m, q) = m_q(name);
        for kmax in 0..=4 {
            let p = (kmax + m).min(q) as f64;
            let obs = fitted(&spec(ProblemKind::Oscillator, name, kmax, false, 10.0))?;
            table.push(format!("{name}/k{kmax}:{obs:.2}"));
            if (obs - p).abs() > 0.3 {
                bad.push(format!("{name} kmax={kmax}: {obs:.3} vs {p}"));
            }
        }
    }
    if bad.is_empty() {
        Ok(table.join(" "))
    } else {
        Err(bad.join("; "))
    }
}

fn ac4_odd_even_decoupling() -> Outcome {
    let name = "HB-I2DRK6-3s";
    let (m, q) = m_q(name);
    let mut notes = Vec::new();
    let mut ok = true;
    for kmax in [1, 3] {
        let need = ((kmax + m) as f64 + 0.7).min(q as f64);
        let obs = fitted(&spec(ProblemKind::Oscillator, name, kmax, true, 10.0))?;
        ok &= obs >= need;
        notes.push(format!("kmax={kmax}: {obs:.3} (need >= {need})"));
    }
    if ok {
        Ok(notes.join(", "))
    } else {
        Err(notes.join(", "))
    }
}

fn ac5_kepler_orders() -> Outcome {
    let mut table = Vec::new();
    let mut bad = Vec::new();
    for name in BUILTIN_NAMES {
        let (m, q) = m_q(name);
        for kmax in 1..=3 {
            let p = (kmax + m).min(q) as f64;
            for relaxed in [false, true] {
                let tag = if relaxed { "r" } else { "u" };
                let mut s = spec(ProblemKind::Kepler, name, kmax, relaxed, 5.0);
                s.dt = Some(DtSpec::List(halvings(KEPLER_FIRST_DT, 6)));
                match fitted(&s) {
                    Ok(obs) => {
                        table.push(format!("{name}/k{kmax}{tag}:{obs:.2}"));
                        if (obs - p).abs() > 0.3 {
                            bad.push(format!("{name} kmax={kmax} {tag}: {obs:.3} vs {p}"));
                        }
                    }
                    Err(e) => bad.push(format!("{name} kmax={kmax} {tag}: {e}")),
                }
            }
        }
    }
    if bad.is_empty() {
        Ok(table.join(" "))
    } else {
        Err(bad.join("; "))
    }
}

fn ac6_functional_preservation() -> Outcome {
    let cfg = HbpcConfig::new(builtin::<f64>("HB-I2DRK6-3s").unwrap(), 4);
    let osc = match integrate(&Oscillator, &cfg, 0.2, 100.0, &IntegrateOptions::relaxed()) {
        Ok(run) => {
            let drift = run.records.iter().map(|r| (r.eta - 1.0).abs()).fold(0.0, f64::max);
            (drift <= 1e-11, format!("oscillator {drift:.2e} (<= 1e-11)"))
        }
        Err(f) => (false, format!("oscillator aborted: {}", f.error)),
    };
    let kep = match integrate(&Kepler::default(), &cfg, 0.05, 10.0, &IntegrateOptions::relaxed()) {
        Ok(run) => {
            let drift = run.max_eta_drift();
            (drift <= 1e-12, format!("kepler {drift:.2e} (<= 1e-12)"))
        }
        Err(f) => (false, format!("kepler aborted: {}", f.error)),
    };
    let msg = format!("{}, {}", osc.1, kep.1);
    if osc.0 && kep.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn ac7_growth_slopes() -> Outcome {
    let mut slopes = Vec::new();
    for relaxed in [true, false] {
        let mut s = spec(ProblemKind::Oscillator, "HB-I2DRK6-3s", 4, relaxed, 100.0);
        s.dt = Some(DtSpec::Single(0.2));
        let run = run_single(&s).map_err(|e| e.to_string())?;
        if let Some(e) = run.failure {
            return Err(e.to_string());
        }
        slopes.push(growth_slope(&run.trajectory, 10.0, 100.0).ok_or("no slope")?);
    }
    let msg = format!("relaxed {:.3} in [0.7, 1.3], unrelaxed {:.3} in [1.6, 2.4]", slopes[0], slopes[1]);
    if (0.7..=1.3).contains(&slopes[0]) && (1.6..=2.4).contains(&slopes[1]) {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn ac8_relaxed_failure() -> Outcome {
    let cfg = HbpcConfig::new(builtin::<f64>("HB-I2DRK6-3s").unwrap(), 4);
    match integrate(&Kepler::default(), &cfg, 0.5, 10.0, &IntegrateOptions::relaxed()) {
        Ok(run) => Err(format!("reached t = {}", run.final_time())),
        Err(f) if f.error.is_relaxation_root_not_found() => {
            Ok(format!("RelaxationRootNotFound at t = {:?}", f.error.time().unwrap_or(f64::NAN)))
        }
        Err(f) => Err(format!("unexpected failure: {}", f.error)),
    }
}

fn ac9_fixed_point() -> Outcome {
    let problems: [&dyn Ivp<f64>; 2] = [&Oscillator, &Kepler::default()];
    let mut worst: f64 = 0.0;
    for ivp in problems {
        for name in BUILTIN_NAMES {
            let tableau = builtin::<f64>(name).unwrap();
            let w0 = ivp.initial_state();
            let cfg = HbpcConfig::new(tableau.clone(), 30);
            let hb = hbpc_step(ivp, &w0, 0.0, 0.1, &cfg).map_err(|e| e.to_string())?;
            let bg = background_rk_step(ivp, &w0, 0.1, &tableau, &NewtonSettings::default()).map_err(|e| e.to_string())?;
            let diff = distance(&hb.w_next, &bg);
            if diff > 1e-12 {
                return Err(format!("{} {name}: {diff:.3e}", ivp.name()));
            }
            worst = worst.max(diff);
        }
    }
    Ok(format!("max difference {worst:.2e}"))
}

fn ac10_gamma_scaling() -> Outcome {
    let cfg = HbpcConfig::new(builtin::<f64>("HB-I2DRK6-3s").unwrap(), 4);
    let dts = [0.2, 0.1, 0.05, 0.025];
    let mut devs = Vec::new();
    for dt in dts {
        let run = integrate(&Oscillator, &cfg, dt, dt, &IntegrateOptions::relaxed()).map_err(|f| f.error.to_string())?;
        devs.push(run.max_gamma_deviation());
    }
    let slope = loglog_slope(&dts, &devs).ok_or_else(|| format!("degenerate deviations {devs:?}"))?;
    let devs: Vec<String> = devs.iter().map(|d| format!("{d:.2e}")).collect();
    let msg = format!("slope {slope:.3} (>= 6.5), |γ-1| = [{}]", devs.join(", "));
    if slope >= 6.5 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn ac11_tower_suite() -> Outcome {
    common::tower_suite().map(|worst| format!("worst defect/tolerance {worst:.2e}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("AC1 tableau reproduction", ac1_tableau_reproduction),
        ("AC2 quadrature orders", ac2_quadrature_orders),
        ("AC3 oscillator order table", ac3_oscillator_orders),
        ("AC4 odd-even decoupling", ac4_odd_even_decoupling),
        ("AC5 kepler order table", ac5_kepler_orders),
        ("AC6 functional preservation", ac6_functional_preservation),
        ("AC7 error growth slopes", ac7_growth_slopes),
        ("AC8 relaxed failure diagnostic", ac8_relaxed_failure),
        ("AC9 fixed point", ac9_fixed_point),
        ("AC10 gamma scaling", ac10_gamma_scaling),
        ("AC11 tower property suite", ac11_tower_suite),
    ];
    // Shared by AC5 and the Kepler growth runs; computing it up front keeps
    // the per-criterion timings honest.
    let start = Instant::now();
    if let Err(e) = kepler_reference(5.0).and(kepler_reference(10.0)) {
        println!("kepler reference unavailable: {e}");
    }
    println!("kepler reference ready in {:.1}s", start.elapsed().as_secs_f64());

    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name} [{secs:.1}s]: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name} [{secs:.1}s]: {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
